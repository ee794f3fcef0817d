"""Regression back-ends: linear epsilon-SVR, kernel ridge, relevance vectors.

All three share the same contract: features are z-scored with statistics
frozen at fit time, targets keep their scale, predictions are deterministic.
The SVR is solved in the dual by pairwise coordinate updates on the
max-violating pair, with an unregularized intercept recovered exactly from
the piecewise-linear one-dimensional problem; convergence is certified by the
primal-dual gap, so the reported objective is trustworthy to the requested
relative tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ModelError

SVR_REL_TOL = 1e-6
RVM_PRUNE_ALPHA = 1e12
RVM_LOGALPHA_TOL = 1e-3
RVM_MAX_ITER = 1000
STD_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class StandardizerState:
    mean: np.ndarray
    std: np.ndarray  # floored, never zero

    @classmethod
    def fit(cls, x: np.ndarray) -> "StandardizerState":
        mean = x.mean(axis=0)
        std = np.maximum(x.std(axis=0), STD_FLOOR)
        return cls(mean, std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.mean.shape[0]:
            raise ModelError(
                f"feature dim {x.shape[1]} does not match standardizer dim {self.mean.shape[0]}"
            )
        return (x - self.mean) / self.std


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"  # "linear" | "rbf"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ModelError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None and self.gamma <= 0:
            raise ModelError("rbf kernel needs gamma > 0")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return a @ b.T
        if self.gamma is None:
            raise ModelError("rbf gamma not resolved; use resolve_kernel first")
        sq = (a**2).sum(axis=1)[:, None] + (b**2).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


def _check_training_inputs(x: np.ndarray, y: np.ndarray, min_rows: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ModelError("X must be n x D with one target per row")
    if x.shape[0] < min_rows:
        raise ModelError(f"need at least {min_rows} training rows, got {x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ModelError("non-finite training inputs")
    return x, y


# ---------------------------------------------------------------------------
# Support vector regression (linear kernel, epsilon-insensitive loss)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SvrModel:
    w: np.ndarray
    b: float
    C: float
    epsilon: float
    standardizer: StandardizerState
    objective_trace: np.ndarray = field(default=None, repr=False)  # dual objective, non-increasing
    primal_objective: float = float("nan")


def svr_primal_objective(w: np.ndarray, b: float, xs: np.ndarray, y: np.ndarray,
                         C: float, epsilon: float) -> float:
    """0.5 * w'w + C * sum(max(|Xw + b - y| - eps, 0)) on standardized features."""
    residual = xs @ w + b - y
    loss = np.maximum(np.abs(residual) - epsilon, 0.0)
    return 0.5 * float(w @ w) + C * float(loss.sum())


def _optimal_intercept(residual: np.ndarray, epsilon: float) -> float:
    """Exact minimizer of sum(max(|r + b| - eps, 0)) over b.

    The objective is convex piecewise linear with breakpoints at -r_i +/- eps;
    the optimum region is bracketed by breakpoints, so evaluating all of them
    and returning the midpoint of the flat minimum is exact.
    """
    candidates = np.concatenate([-residual - epsilon, -residual + epsilon])
    losses = np.maximum(np.abs(residual[None, :] + candidates[:, None]) - epsilon, 0.0).sum(axis=1)
    best = losses.min()
    flat = candidates[losses <= best + 1e-12 * max(1.0, best)]
    return float((flat.min() + flat.max()) / 2.0)


def fit_svr(x: np.ndarray, y: np.ndarray, C: float = 1.0, epsilon: float = 0.1,
            max_updates: int = 2_000_000) -> SvrModel:
    """Train linear epsilon-SVR, certified to 1e-6 relative objective accuracy.

    Dual variables come in (alpha+, alpha-) pairs per training row; each step
    exactly minimizes the dual along the max-violating pair while preserving
    the intercept constraint sum(alpha+ - alpha-) = 0.  Stops when the KKT
    violation vanishes or the primal-dual gap certifies the tolerance.
    """
    if C <= 0:
        raise ModelError("C must be > 0")
    if epsilon < 0:
        raise ModelError("epsilon must be >= 0")
    x, y = _check_training_inputs(x, y, min_rows=2)
    standardizer = StandardizerState.fit(x)
    xs = standardizer.apply(x)
    n = xs.shape[0]

    K = xs @ xs.T
    beta = np.zeros(n)         # alpha+ - alpha-
    alpha_p = np.zeros(n)
    alpha_m = np.zeros(n)
    g = np.zeros(n)            # K @ beta, maintained incrementally
    dual = 0.0
    trace = [dual]

    check_interval = max(200, 2 * n)
    since_check = 0
    best: tuple[float, np.ndarray, float] | None = None

    for _ in range(max_updates):
        # gradients of the dual wrt alpha+ and alpha-
        grad_p = g + epsilon - y
        grad_m = -g + epsilon + y
        # "up" candidates can grow, "low" candidates can shrink along the constraint
        up_p = np.where(alpha_p < C, -grad_p, -np.inf)
        up_m = np.where(alpha_m > 0.0, grad_m, -np.inf)
        low_p = np.where(alpha_p > 0.0, -grad_p, np.inf)
        low_m = np.where(alpha_m < C, grad_m, np.inf)
        up_vals = np.maximum(up_p, up_m)
        low_vals = np.minimum(low_p, low_m)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        violation = up_vals[i] - low_vals[j]
        if violation <= 1e-12:
            break

        i_plus = up_p[i] >= up_m[i]   # which of the pair at row i moves
        j_plus = low_p[j] <= low_m[j]

        # step t moves beta_i by +t and beta_j by -t
        deriv = -up_vals[i] + low_vals[j]
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-15)
        t = -deriv / quad

        if i_plus:
            hi_i = C - alpha_p[i]
        else:
            hi_i = alpha_m[i]
        if j_plus:
            hi_j = alpha_p[j]
        else:
            hi_j = C - alpha_m[j]
        t = min(t, hi_i, hi_j)
        if t <= 0.0:
            break  # numerically blocked; gap check below already ran on best

        if i_plus:
            alpha_p[i] += t
        else:
            alpha_m[i] -= t
        if j_plus:
            alpha_p[j] -= t
        else:
            alpha_m[j] += t
        beta[i] += t
        beta[j] -= t
        dual += deriv * t + 0.5 * quad * t * t
        trace.append(dual)
        g += t * (K[i] - K[j])

        since_check += 1
        if since_check >= check_interval:
            since_check = 0
            w = xs.T @ beta
            bb = _optimal_intercept(xs @ w - y, epsilon)
            primal = svr_primal_objective(w, bb, xs, y, C, epsilon)
            if best is None or primal < best[0]:
                best = (primal, w, bb)
            if primal + dual <= SVR_REL_TOL * max(1.0, abs(primal)):
                break

    w = xs.T @ beta
    b = _optimal_intercept(xs @ w - y, epsilon)
    primal = svr_primal_objective(w, b, xs, y, C, epsilon)
    if best is not None and best[0] < primal:
        primal, w, b = best
    return SvrModel(w, b, C, epsilon, standardizer, np.asarray(trace), primal)


# ---------------------------------------------------------------------------
# Kernel ridge regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KrrModel:
    dual_coefs: np.ndarray
    bias: float
    lam: float
    kernel: KernelSpec
    training_inputs: np.ndarray  # standardized
    standardizer: StandardizerState
    solve_residual: float = float("nan")  # ||(K+lam I)a - y_c|| / ||y_c||


def fit_krr(x: np.ndarray, y: np.ndarray, lam: float = 1.0,
            kernel: KernelSpec = KernelSpec("linear")) -> KrrModel:
    """Closed-form dual ridge: (K + lam*I) alpha = y - mean(y)."""
    if lam <= 0:
        raise ModelError("lambda must be > 0")
    x, y = _check_training_inputs(x, y, min_rows=1)
    standardizer = StandardizerState.fit(x)
    xs = standardizer.apply(x)
    n = xs.shape[0]

    K = kernel.gram(xs, xs)
    bias = float(y.mean())
    y_c = y - bias
    A = K + lam * np.eye(n)
    try:
        factor = cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        factor = cho_factor(A + 1e-10 * np.trace(A) / n * np.eye(n), lower=True)
    alpha = cho_solve(factor, y_c)
    y_norm = float(np.linalg.norm(y_c))
    residual = float(np.linalg.norm(A @ alpha - y_c)) / max(y_norm, 1e-300)
    return KrrModel(alpha, bias, lam, kernel, xs, standardizer, residual)


# ---------------------------------------------------------------------------
# Relevance vector machine
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RvmModel:
    relevant_basis: np.ndarray   # indices into the original training rows
    weights: np.ndarray          # posterior means for retained bases
    noise_var: float
    alphas: np.ndarray           # precisions for retained bases
    bias: float
    kernel: KernelSpec
    basis_inputs: np.ndarray     # standardized rows backing the retained bases
    standardizer: StandardizerState
    n_iterations: int = 0


def fit_rvm(x: np.ndarray, y: np.ndarray,
            kernel: KernelSpec = KernelSpec("linear")) -> RvmModel:
    """Sparse Bayesian regression by evidence maximization.

    One basis function per training row (k(., x_j)); per-basis precisions are
    re-estimated as gamma_j / mu_j^2 and bases with precision above 1e12 are
    pruned outright, so pruned weights are exactly zero.
    """
    x, y = _check_training_inputs(x, y, min_rows=2)
    standardizer = StandardizerState.fit(x)
    xs = standardizer.apply(x)
    n = xs.shape[0]

    bias = float(y.mean())
    y_c = y - bias
    phi_full = kernel.gram(xs, xs)

    # zero columns can never contribute; drop them before iterating
    col_norms = np.linalg.norm(phi_full, axis=0)
    active = np.flatnonzero(col_norms > 1e-12)
    alphas = np.full(active.size, 1e-3)
    sigma2 = max(float(np.var(y_c)) * 0.1, 1e-6)

    mu = np.zeros(active.size)
    iterations = 0
    for iterations in range(1, RVM_MAX_ITER + 1):
        if active.size == 0:
            break
        phi = phi_full[:, active]
        H = np.diag(alphas) + (phi.T @ phi) / sigma2
        try:
            factor = cho_factor(H, lower=True)
        except np.linalg.LinAlgError:
            H = H + 1e-8 * np.trace(H) / H.shape[0] * np.eye(H.shape[0])
            factor = cho_factor(H, lower=True)
        sigma_post = cho_solve(factor, np.eye(active.size))
        mu = sigma_post @ (phi.T @ y_c) / sigma2

        gammas = 1.0 - alphas * np.diag(sigma_post)
        mu_sq = mu**2
        with np.errstate(divide="ignore", invalid="ignore"):
            new_alphas = np.where(mu_sq > 1e-300, gammas / mu_sq, np.inf)
        new_alphas = np.maximum(new_alphas, 1e-300)

        residual = y_c - phi @ mu
        dof = n - float(gammas.sum())
        if dof > 1e-6:
            sigma2 = max(float(residual @ residual) / dof, 1e-12)

        keep = new_alphas < RVM_PRUNE_ALPHA
        log_change = np.abs(np.log(new_alphas[keep]) - np.log(alphas[keep])) if keep.any() else np.array([0.0])
        pruned_any = not keep.all()
        active = active[keep]
        alphas = new_alphas[keep]
        mu = mu[keep]
        if not pruned_any and (log_change.size == 0 or log_change.max() < RVM_LOGALPHA_TOL):
            break

    return RvmModel(active, mu, sigma2, alphas, bias, kernel,
                    xs[active].copy() if active.size else np.zeros((0, xs.shape[1])),
                    standardizer, iterations)


# ---------------------------------------------------------------------------
# Prediction and the uniform model-spec front door
# ---------------------------------------------------------------------------


def predict(model: SvrModel | KrrModel | RvmModel, x: np.ndarray) -> np.ndarray:
    """Predict targets for an m x D matrix; standardization happens inside."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ModelError("X must be a 2-D matrix")
    if isinstance(model, SvrModel):
        xs = model.standardizer.apply(x)
        return xs @ model.w + model.b
    if isinstance(model, KrrModel):
        xs = model.standardizer.apply(x)
        return model.kernel.gram(xs, model.training_inputs) @ model.dual_coefs + model.bias
    if isinstance(model, RvmModel):
        xs = model.standardizer.apply(x)
        if model.relevant_basis.size == 0:
            return np.full(x.shape[0], model.bias)
        return model.kernel.gram(xs, model.basis_inputs) @ model.weights + model.bias
    raise ModelError(f"unknown model type {type(model).__name__}")


@dataclass(frozen=True)
class ModelSpec:
    """What to fit: model kind, hyperparameters, kernel, optional search grid."""

    kind: str  # "svr" | "krr" | "rvm"
    C: float = 1.0
    epsilon: float = 0.1
    lam: float = 1.0
    kernel: KernelSpec = KernelSpec("linear")
    grid: tuple[tuple[str, tuple[float, ...]], ...] = ()

    def __post_init__(self):
        if self.kind not in ("svr", "krr", "rvm"):
            raise ModelError(f"unknown model kind {self.kind!r}")

    def with_params(self, **params) -> "ModelSpec":
        updates = dict(kind=self.kind, C=self.C, epsilon=self.epsilon,
                       lam=self.lam, kernel=self.kernel, grid=())
        updates.update(params)
        return ModelSpec(**updates)

    def grid_candidates(self) -> list["ModelSpec"]:
        """Cartesian product of the grid axes; empty grid gives just self."""
        specs = [self.with_params()]
        for name, values in self.grid:
            if name not in ("C", "epsilon", "lam"):
                raise ModelError(f"unknown grid parameter {name!r}")
            specs = [s.with_params(**{name: v}) for s in specs for v in values]
        return specs


def resolve_kernel(spec: ModelSpec, n_features: int) -> KernelSpec:
    """Fill in gamma = 1/D for rbf kernels declared without an explicit gamma."""
    k = spec.kernel
    if k.kind == "rbf" and k.gamma is None:
        return KernelSpec("rbf", 1.0 / n_features)
    return k


def fit_model(spec: ModelSpec, x: np.ndarray, y: np.ndarray):
    if spec.kind == "svr":
        return fit_svr(x, y, C=spec.C, epsilon=spec.epsilon)
    kernel = resolve_kernel(spec, x.shape[1])
    if spec.kind == "krr":
        return fit_krr(x, y, lam=spec.lam, kernel=kernel)
    return fit_rvm(x, y, kernel=kernel)
