"""Short-term feature extraction: MFCC, shifted delta cepstra, pitch.

All operations are pure functions of (audio, config).  Extraction defaults
follow common speech practice: 25 ms Hamming frames every 10 ms, pre-emphasis
0.97, 23 mel filters, orthonormal DCT-II with C0 retained.  The frame
dimension is fully determined by the config:

    dim = n_cepstra * (1 + sdc_n_blocks) + (2 if use_pitch else 0)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.fftpack import dct

from .corpus import AudioBuffer
from .errors import DspError

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class DspConfig:
    frame_len_ms: float = 25.0
    frame_shift_ms: float = 10.0
    preemphasis: float = 0.97
    n_mel_filters: int = 23
    n_cepstra: int = 20
    sdc_delta: int = 1        # delta advance/delay
    sdc_block_shift: int = 3  # distance between blocks
    sdc_n_blocks: int = 7     # blocks stacked after the base cepstra
    use_pitch: bool = False
    include_c0: bool = True
    cepstral_mean_norm: bool = False

    def __post_init__(self):
        if self.n_cepstra < 1:
            raise DspError("n_cepstra must be >= 1")
        if self.n_cepstra > self.n_mel_filters:
            raise DspError("n_cepstra cannot exceed n_mel_filters")
        if self.sdc_n_blocks < 0 or self.sdc_delta < 1 or self.sdc_block_shift < 1:
            raise DspError("invalid SDC parameters")
        if self.frame_shift_ms > self.frame_len_ms or self.frame_shift_ms <= 0:
            raise DspError("need 0 < frame_shift_ms <= frame_len_ms")
        if not (0.0 <= self.preemphasis < 1.0):
            raise DspError("preemphasis must be in [0, 1)")

    @property
    def frame_dim(self) -> int:
        """Final frame dimension after SDC stacking and optional pitch."""
        return self.n_cepstra * (1 + self.sdc_n_blocks) + (2 if self.use_pitch else 0)

    def digest(self) -> str:
        text = repr(tuple(sorted(self.__dict__.items())))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class FrameSequence:
    frames: np.ndarray  # T x d float64
    config_hash: str

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise DspError("frames must be a non-empty T x d matrix")
        if not np.all(np.isfinite(self.frames)):
            raise DspError("frames contain non-finite values")

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def _frame_sizes(cfg: DspConfig, sample_rate: int) -> tuple[int, int]:
    frame_len = int(round(cfg.frame_len_ms * sample_rate / 1000.0))
    frame_shift = int(round(cfg.frame_shift_ms * sample_rate / 1000.0))
    if frame_len < 2 or frame_shift < 1:
        raise DspError("frame length/shift too small for this sample rate")
    return frame_len, frame_shift


def frame_count(n_samples: int, frame_len: int, frame_shift: int) -> int:
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // frame_shift + 1


def _frame_signal(x: np.ndarray, frame_len: int, frame_shift: int) -> np.ndarray:
    n_frames = frame_count(x.size, frame_len, frame_shift)
    if n_frames < 1:
        raise DspError(f"audio shorter than one frame ({x.size} < {frame_len} samples)")
    idx = np.arange(frame_len)[None, :] + frame_shift * np.arange(n_frames)[:, None]
    return x[idx]


def mel_filterbank(n_filters: int, nfft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters on FFT bins, 0 Hz to Nyquist."""
    low_mel = 0.0
    high_mel = 2595.0 * np.log10(1.0 + (sample_rate / 2.0) / 700.0)
    mel_points = np.linspace(low_mel, high_mel, n_filters + 2)
    hz_points = 700.0 * (10.0 ** (mel_points / 2595.0) - 1.0)
    bins = np.floor((nfft + 1) * hz_points / sample_rate).astype(int)
    fb = np.zeros((n_filters, nfft // 2 + 1))
    for j in range(n_filters):
        for i in range(bins[j], bins[j + 1]):
            fb[j, i] = (i - bins[j]) / max(bins[j + 1] - bins[j], 1)
        for i in range(bins[j + 1], bins[j + 2]):
            fb[j, i] = (bins[j + 2] - i) / max(bins[j + 2] - bins[j + 1], 1)
    return fb


def extract_mfcc(audio: AudioBuffer, cfg: DspConfig) -> FrameSequence:
    """Pre-emphasis, Hamming window, power spectrum, mel filterbank, log, DCT-II."""
    x = np.asarray(audio.samples, dtype=np.float64)
    frame_len, frame_shift = _frame_sizes(cfg, audio.sample_rate)
    if cfg.preemphasis > 0.0:
        x = np.concatenate(([x[0]], x[1:] - cfg.preemphasis * x[:-1]))
    frames = _frame_signal(x, frame_len, frame_shift)
    frames = frames * np.hamming(frame_len)

    nfft = 1
    while nfft < frame_len:
        nfft *= 2
    power = np.abs(np.fft.rfft(frames, nfft)) ** 2 / nfft
    fb = mel_filterbank(cfg.n_mel_filters, nfft, audio.sample_rate)
    mel_energy = np.maximum(power @ fb.T, LOG_FLOOR)
    cepstra = dct(np.log(mel_energy), type=2, axis=1, norm="ortho")
    if cfg.include_c0:
        cepstra = cepstra[:, : cfg.n_cepstra]
    else:
        cepstra = cepstra[:, 1 : cfg.n_cepstra + 1]
    if cfg.cepstral_mean_norm:
        cepstra = cepstra - cepstra.mean(axis=0)
    return FrameSequence(np.ascontiguousarray(cepstra), cfg.digest())


def append_sdc(mfcc: FrameSequence, cfg: DspConfig) -> FrameSequence:
    """Stack shifted delta blocks: for block j, c(t+j*P+d) - c(t+j*P-d).

    Out-of-range frame indices are clamped to the edge frames, which keeps T
    unchanged and makes all deltas exactly zero for constant sequences.
    """
    if mfcc.dim != cfg.n_cepstra:
        raise DspError(f"expected {cfg.n_cepstra}-dim cepstra, got {mfcc.dim}")
    c = mfcc.frames
    T = c.shape[0]
    if cfg.sdc_n_blocks == 0:
        return mfcc
    t = np.arange(T)
    blocks = [c]
    for j in range(cfg.sdc_n_blocks):
        plus = np.clip(t + j * cfg.sdc_block_shift + cfg.sdc_delta, 0, T - 1)
        minus = np.clip(t + j * cfg.sdc_block_shift - cfg.sdc_delta, 0, T - 1)
        blocks.append(c[plus] - c[minus])
    return FrameSequence(np.hstack(blocks), cfg.digest())


def _pitch_track(audio: AudioBuffer, cfg: DspConfig,
                 fmin: float = 60.0, fmax: float = 400.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (log_f0, voicing) via the normalized autocorrelation peak."""
    x = np.asarray(audio.samples, dtype=np.float64)
    frame_len, frame_shift = _frame_sizes(cfg, audio.sample_rate)
    frames = _frame_signal(x, frame_len, frame_shift)
    frames = frames - frames.mean(axis=1, keepdims=True)
    T = frames.shape[0]

    lag_min = max(2, int(np.floor(audio.sample_rate / fmax)))
    lag_max = min(frame_len - 2, int(np.ceil(audio.sample_rate / fmin)))
    if lag_max <= lag_min:
        raise DspError("frame too short for the pitch search range")

    f0 = np.zeros(T)
    voicing = np.zeros(T)
    for i in range(T):
        f = frames[i]
        denom0 = float(f @ f)
        if denom0 <= 0.0:
            continue
        best_r, best_lag = 0.0, 0
        for lag in range(lag_min, lag_max + 1):
            a, b = f[:-lag], f[lag:]
            den = np.sqrt(float(a @ a) * float(b @ b))
            if den <= 0.0:
                continue
            r = float(a @ b) / den
            if r > best_r:
                best_r, best_lag = r, lag
        if best_lag > 0:
            f0[i] = audio.sample_rate / best_lag
            voicing[i] = min(max(best_r, 0.0), 1.0)

    voiced = voicing >= 0.3
    if voiced.sum() >= 3:
        # 3-point median over the voiced track smooths octave glitches
        vi = np.flatnonzero(voiced)
        vals = f0[vi]
        smoothed = vals.copy()
        for k in range(1, len(vi) - 1):
            smoothed[k] = np.median(vals[k - 1 : k + 2])
        f0[vi] = smoothed
    log_f0 = np.zeros(T)
    if voiced.any():
        vi = np.flatnonzero(voiced)
        log_f0 = np.interp(np.arange(T), vi, np.log(f0[vi]))
    else:
        log_f0[:] = np.log(100.0)  # arbitrary flat track for fully unvoiced audio
    return log_f0, voicing


def append_pitch(frames: FrameSequence, audio: AudioBuffer, cfg: DspConfig) -> FrameSequence:
    """Append [log-f0, voicing score] columns; unvoiced log-f0 is interpolated."""
    if not cfg.use_pitch:
        raise DspError("append_pitch called with use_pitch=false")
    log_f0, voicing = _pitch_track(audio, cfg)
    if log_f0.shape[0] != frames.n_frames:
        raise DspError(
            f"pitch track has {log_f0.shape[0]} frames, features have {frames.n_frames}"
        )
    out = np.hstack([frames.frames, log_f0[:, None], voicing[:, None]])
    return FrameSequence(out, cfg.digest())


def extract_frames(audio: AudioBuffer, cfg: DspConfig) -> FrameSequence:
    """Full short-term chain for one utterance: MFCC -> SDC -> optional pitch."""
    seq = extract_mfcc(audio, cfg)
    seq = append_sdc(seq, cfg)
    if cfg.use_pitch:
        seq = append_pitch(seq, audio, cfg)
    if seq.dim != cfg.frame_dim:
        raise DspError(f"frame dim {seq.dim} does not match config dim {cfg.frame_dim}")
    return seq
