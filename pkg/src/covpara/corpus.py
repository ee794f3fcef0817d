"""Corpus handling: manifests, WAV I/O, rating standardization, synthetic data.

The synthetic corpus stands in for the proprietary recordings the experiment
protocol was designed around: each generated utterance is filtered noise plus
a harmonic component whose spectral tilt oscillates, and the size of the tilt
swing is a strictly increasing function of the gold rating.  Speaker identity
enters through timbre offsets (f0, static tilt, resonance, tempo) that are
independent of the rating, so leave-one-speaker-out evaluation stays honest.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AudioError, CorpusError

MANIFEST_HEADER = ["utterance_id", "audio_path", "speaker_id", "rating"]


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    audio_path: str
    speaker_id: str
    rating: float


@dataclass(frozen=True)
class CorpusManifest:
    records: tuple[UtteranceRecord, ...]
    rating_kind: str = "raw"  # "raw" | "standardized"
    base_dir: Path = field(default_factory=Path)

    def speakers(self) -> list[str]:
        return sorted({r.speaker_id for r in self.records})

    def by_speaker(self) -> dict[str, list[UtteranceRecord]]:
        groups: dict[str, list[UtteranceRecord]] = {}
        for rec in self.records:
            groups.setdefault(rec.speaker_id, []).append(rec)
        return groups

    def utterance_ids(self) -> list[str]:
        return [r.utterance_id for r in self.records]

    def ratings(self) -> np.ndarray:
        return np.array([r.rating for r in self.records], dtype=np.float64)

    def resolve_audio(self, rec: UtteranceRecord) -> Path:
        return self.base_dir / rec.audio_path


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate: int


def load_manifest(path: str | Path, rating_kind: str = "raw") -> CorpusManifest:
    """Load and validate a manifest CSV (header: utterance_id,audio_path,speaker_id,rating).

    Audio paths are interpreted relative to the manifest's directory and must
    exist.  Raw ratings must be finite and lie in [0, 4].  At least two
    distinct speakers are required so a LOSO plan is possible.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"manifest not found: {path}")
    if rating_kind not in ("raw", "standardized"):
        raise CorpusError(f"unknown rating_kind {rating_kind!r}")
    base_dir = path.parent
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty manifest") from None
        if header != MANIFEST_HEADER:
            raise CorpusError(f"{path}: bad header {header!r}, expected {MANIFEST_HEADER!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CorpusError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            utt_id, audio_path, speaker_id, rating_text = row
            if not utt_id or not speaker_id:
                raise CorpusError(f"{path}:{lineno}: empty utterance_id or speaker_id")
            if utt_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate utterance_id {utt_id!r}")
            seen.add(utt_id)
            try:
                rating = float(rating_text)
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: unparseable rating {rating_text!r}") from None
            if not np.isfinite(rating):
                raise CorpusError(f"{path}:{lineno}: non-finite rating")
            if rating_kind == "raw" and not (0.0 <= rating <= 4.0):
                raise CorpusError(f"{path}:{lineno}: raw rating {rating} outside [0, 4]")
            if not (base_dir / audio_path).is_file():
                raise CorpusError(f"{path}:{lineno}: audio file not found: {audio_path}")
            records.append(UtteranceRecord(utt_id, audio_path, speaker_id, rating))
    if not records:
        raise CorpusError(f"{path}: manifest has no records")
    speakers = {r.speaker_id for r in records}
    if len(speakers) < 2:
        raise CorpusError("LOSO requires >=2 speakers")
    return CorpusManifest(tuple(records), rating_kind, base_dir)


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    """Write a manifest CSV; audio paths are stored as given (relative)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for rec in manifest.records:
            writer.writerow([rec.utterance_id, rec.audio_path, rec.speaker_id, repr(rec.rating)])


def standardize_ratings(manifest: CorpusManifest) -> CorpusManifest:
    """Z-score all ratings over the manifest (population stddev, divide by N).

    The output has mean 0 and unit variance exactly; the transform is applied
    once globally, never per fold, mirroring a precomputed gold standard.
    """
    if manifest.rating_kind != "raw":
        raise CorpusError("already standardized")
    y = manifest.ratings()
    if y.size < 2 or np.all(y == y[0]):
        raise CorpusError("cannot standardize: all ratings identical (zero variance)")
    mean = float(y.mean())
    std = float(y.std())  # population estimator
    z = (y - mean) / std
    records = tuple(replace(rec, rating=float(v)) for rec, v in zip(manifest.records, z))
    return CorpusManifest(records, "standardized", manifest.base_dir)


def read_wav(path: str | Path) -> AudioBuffer:
    """Read a 16-bit PCM mono WAV file, scaling samples to [-1, 1) by 1/32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            sample_rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise AudioError(f"{path}: not a readable WAV file ({exc})") from None
    if n_channels != 1:
        raise AudioError(f"{path}: mono required, got {n_channels} channels")
    if sampwidth != 2:
        raise AudioError(f"{path}: 16-bit PCM required, got {8 * sampwidth}-bit")
    if len(raw) < 2 * n_frames:
        raise AudioError(f"{path}: truncated file ({len(raw)} bytes for {n_frames} frames)")
    ints = np.frombuffer(raw, dtype="<i2")
    if ints.size == 0:
        raise AudioError(f"{path}: empty audio stream")
    return AudioBuffer(ints.astype(np.float64) / 32768.0, sample_rate)


def write_wav(path: str | Path, audio: AudioBuffer) -> None:
    """Write 16-bit PCM mono WAV; read_wav(write_wav(x)) is exact on 1/32768 grid."""
    samples = np.asarray(audio.samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise AudioError("audio samples must be a non-empty 1-D sequence")
    ints = np.clip(np.rint(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(audio.sample_rate))
        wf.writeframes(ints.tobytes())


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

SYNTH_SAMPLE_RATE = 16000


def _speaker_timbre(rng: np.random.Generator) -> dict:
    return {
        "f0": float(rng.uniform(95.0, 230.0)),
        "base_tilt": float(rng.uniform(-2.5, 0.5)),      # dB/octave, static
        "syllable_rate": float(rng.uniform(2.4, 4.6)),   # Hz
        "resonance_hz": float(rng.uniform(700.0, 2100.0)),
        "resonance_gain": float(rng.uniform(1.5, 3.0)),
        "noise_gain": float(rng.uniform(0.05, 0.09)),
    }


def _tilt_swing(rating: float) -> float:
    # Strictly increasing map from rating in [0, 4] to a dB/octave swing.
    return 0.8 + 0.55 * rating


def synthesize_utterance(rating: float, timbre: dict, rng: np.random.Generator,
                         sample_rate: int = SYNTH_SAMPLE_RATE) -> AudioBuffer:
    """Render one utterance whose tilt-swing parameter encodes the rating.

    The harmonic stack is amplitude-shaped per harmonic by a time-varying
    spectral tilt (base tilt + swing * sine); only the swing depends on the
    rating, so the rating lives in the second-order frame statistics that
    covariance pooling measures, not in the utterance mean alone.
    """
    dur = float(rng.uniform(1.1, 1.45))
    n = int(round(dur * sample_rate))
    t = np.arange(n) / sample_rate

    f0 = timbre["f0"] * (1.0 + 0.04 * rng.uniform(-1.0, 1.0))
    swing = _tilt_swing(rating)
    mod_rate = timbre["syllable_rate"]
    tilt_phase = rng.uniform(0.0, 2.0 * np.pi)
    env_phase = rng.uniform(0.0, 2.0 * np.pi)

    tilt = timbre["base_tilt"] + swing * np.sin(2.0 * np.pi * mod_rate * t + tilt_phase)
    envelope = 0.55 + 0.45 * np.sin(2.0 * np.pi * mod_rate * t + env_phase)

    # slight vibrato keeps harmonics off exact FFT bins
    vib = 1.0 + 0.004 * np.sin(2.0 * np.pi * 5.3 * t + rng.uniform(0.0, 2.0 * np.pi))
    phase0 = np.cumsum(2.0 * np.pi * f0 * vib / sample_rate)

    res_hz = timbre["resonance_hz"]
    voiced = np.zeros(n)
    h = 1
    while h * f0 < 6500.0:
        fh = h * f0
        octaves = np.log2(fh / 1000.0)
        gain = 10.0 ** (tilt * octaves / 20.0) / h ** 0.8
        gain *= 1.0 + timbre["resonance_gain"] * np.exp(-0.5 * ((fh - res_hz) / 300.0) ** 2)
        voiced += gain * np.sin(h * phase0)
        h += 1
    voiced *= envelope

    noise = rng.normal(0.0, 1.0, n)
    spectrum = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    shape = np.ones_like(freqs)
    nz = freqs > 50.0
    shape[nz] = 10.0 ** (timbre["base_tilt"] * np.log2(freqs[nz] / 1000.0) / 20.0)
    shape[~nz] = shape[nz][0] if nz.any() else 1.0
    noise = np.fft.irfft(spectrum * shape, n)
    noise *= timbre["noise_gain"] / max(np.std(noise), 1e-12)

    signal = voiced + noise * np.max(np.abs(voiced))
    signal *= 0.72 / max(np.max(np.abs(signal)), 1e-12)
    return AudioBuffer(signal, sample_rate)


def generate_synthetic_corpus(n_speakers: int, utts_per_speaker: int, seed: int,
                              out_dir: str | Path) -> CorpusManifest:
    """Generate WAV files plus manifest.csv and params.csv under out_dir.

    Deterministic for a given seed: re-running produces byte-identical files.
    params.csv records the embedded tilt-swing parameter per utterance, whose
    rank order matches the rating by construction.
    """
    if n_speakers < 2:
        raise CorpusError("synthetic corpus requires >=2 speakers")
    if utts_per_speaker < 1:
        raise CorpusError("utts_per_speaker must be >=1")
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    try:
        audio_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CorpusError(f"cannot create output directory {out_dir}: {exc}") from None

    root = np.random.SeedSequence(seed)
    speaker_seeds = root.spawn(n_speakers)
    records: list[UtteranceRecord] = []
    params_rows: list[tuple[str, str, str]] = []
    for s in range(n_speakers):
        speaker_id = f"spk{s + 1:02d}"
        spk_rng = np.random.default_rng(speaker_seeds[s])
        timbre = _speaker_timbre(spk_rng)
        for u in range(utts_per_speaker):
            utt_id = f"{speaker_id}_u{u + 1:03d}"
            rating = round(float(spk_rng.uniform(0.0, 4.0)), 3)
            audio = synthesize_utterance(rating, timbre, spk_rng)
            rel_path = f"audio/{utt_id}.wav"
            write_wav(out_dir / rel_path, audio)
            records.append(UtteranceRecord(utt_id, rel_path, speaker_id, rating))
            params_rows.append((utt_id, repr(_tilt_swing(rating)), repr(rating)))

    manifest = CorpusManifest(tuple(records), "raw", out_dir)
    save_manifest(manifest, out_dir / "manifest.csv")
    with open(out_dir / "params.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["utterance_id", "tilt", "rating"])
        writer.writerows(params_rows)
    return manifest
