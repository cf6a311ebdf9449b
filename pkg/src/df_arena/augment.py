"""Seeded noise/music/speech mixing at controlled SNR, and RIR reverberation.

Every random choice in a corpus run (interferer file, loop offset, target
SNR) is drawn from a per-file generator seeded by a stable hash of the run
seed and the trial id, so a run is a pure function of (input bytes, spec):
output bytes are identical regardless of worker count or visit order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from hashlib import blake2b
from pathlib import Path

import numpy as np

from .errors import AugmentError
from .wavio import AudioBuffer, read_wav, rms, write_wav

ADDITIVE_CATEGORIES = ("noise", "music", "speech")
CATEGORIES = ADDITIVE_CATEGORIES + ("reverb",)
CLIP_POLICIES = ("peak-normalize", "hard-clip")

# Default target-SNR ranges (dB) per additive category.
DEFAULT_SNR_RANGES = {
    "noise": (0.0, 15.0),
    "speech": (13.0, 20.0),
    "music": (5.0, 15.0),
}

MANIFEST_NAME = "augment_manifest.jsonl"

# Kernels at or below this length convolve directly (exact arithmetic for
# impulse-like RIRs); longer ones go through the FFT path.
_DIRECT_CONV_MAX = 256


@dataclass(frozen=True)
class AugmentSpec:
    """Perturbation recipe for one corpus run."""

    category: str
    source_dir: Path
    seed: int
    snr_range_db: tuple[float, float] | None = None
    clip_policy: str = "peak-normalize"

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise AugmentError(f"unknown category {self.category!r}; expected one of {CATEGORIES}")
        if self.clip_policy not in CLIP_POLICIES:
            raise AugmentError(f"unknown clip policy {self.clip_policy!r}; expected one of {CLIP_POLICIES}")
        if self.category == "reverb":
            if self.snr_range_db is not None:
                raise AugmentError("snr_range_db applies to additive categories only, not reverb")
        else:
            snr = self.snr_range_db if self.snr_range_db is not None else DEFAULT_SNR_RANGES[self.category]
            low, high = float(snr[0]), float(snr[1])
            if low > high:
                raise AugmentError(f"invalid SNR range: low {low} > high {high}")
            object.__setattr__(self, "snr_range_db", (low, high))
        object.__setattr__(self, "source_dir", Path(self.source_dir))


@dataclass(frozen=True)
class FileOutcome:
    input_path: str
    output_path: str
    category: str
    source_file: str
    file_seed: int
    snr_db: float | None = None
    realized_snr_db: float | None = None
    loop_offset: int | None = None
    rir_id: str | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class AugmentSummary:
    category: str
    seed: int
    entries: tuple[FileOutcome, ...]
    failures: tuple[tuple[str, str], ...]
    manifest_path: str

    @property
    def n_processed(self) -> int:
        return len(self.entries)


def file_seed(run_seed: int, trial_id: str) -> int:
    """Stable 64-bit per-file seed from the run seed and the trial id."""
    h = blake2b(f"{run_seed}:{trial_id}".encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _fit_length(w: np.ndarray, n: int, offset: int) -> np.ndarray:
    """Loop (with wraparound start) or crop the interferer to n samples."""
    if w.size >= n:
        start = offset % (w.size - n + 1)
        return w[start : start + n]
    idx = (offset + np.arange(n)) % w.size
    return w[idx]


def _apply_clip_policy(samples: np.ndarray, policy: str):
    """Returns (samples, scale); scale is the uniform factor peak-normalize
    applied (1.0 when nothing exceeded full scale, or under hard-clip)."""
    peak = float(np.max(np.abs(samples)))
    if peak <= 1.0:
        return samples, 1.0
    if policy == "peak-normalize":
        scale = 1.0 / peak
        return samples * scale, scale
    return np.clip(samples, -1.0, 1.0), 1.0


def _mix(clean: np.ndarray, fitted: np.ndarray, snr_db: float, clip_policy: str):
    """Scale the fitted interferer to the target SNR and add it to clean.

    Returns (samples, gain, scale): gain is the interferer multiplier that
    realizes snr_db exactly (pre-clipping), scale the whole-mix factor that
    the clip policy applied afterwards (1.0 when nothing clipped).
    """
    rms_clean = rms(clean)
    if rms_clean == 0.0:
        raise AugmentError("clean signal is silent (zero RMS)")
    rms_noise = rms(fitted)
    if rms_noise == 0.0:
        raise AugmentError("interferer segment is silent (zero RMS)")
    gain = rms_clean / (rms_noise * 10.0 ** (snr_db / 20.0))
    mixed, scale = _apply_clip_policy(clean + gain * fitted, clip_policy)
    return mixed, gain, scale


def mix_at_snr(
    clean: AudioBuffer,
    interferer: AudioBuffer,
    snr_db: float,
    clip_policy: str = "peak-normalize",
    offset: int = 0,
) -> AudioBuffer:
    """Add the interferer to the clean signal at an exact target SNR.

    The interferer is looped or cropped to the clean length (``offset``
    selects the start point), then scaled so that the pre-clipping SNR
    equals ``snr_db`` by construction. If the mix exceeds full scale the
    clip policy is applied: peak-normalize rescales the whole mix to peak 1,
    hard-clip saturates.
    """
    if clip_policy not in CLIP_POLICIES:
        raise AugmentError(f"unknown clip policy {clip_policy!r}")
    fitted = _fit_length(interferer.samples, len(clean), offset)
    mixed, _, _ = _mix(clean.samples, fitted, snr_db, clip_policy)
    return AudioBuffer(mixed, clean.sample_rate)


def _convolve_full(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    if h.size <= _DIRECT_CONV_MAX:
        return np.convolve(x, h)
    n_out = x.size + h.size - 1
    size = 1 << (n_out - 1).bit_length()
    spectrum = np.fft.rfft(x, size) * np.fft.rfft(h, size)
    return np.fft.irfft(spectrum, size)[:n_out]


def reverberate(clean: AudioBuffer, rir: AudioBuffer) -> AudioBuffer:
    """Convolve with a room impulse response, preserving length and level.

    Full linear convolution truncated to the clean length, then rescaled so
    the output RMS equals the input RMS.
    """
    if rms(rir) == 0.0:
        raise AugmentError("RIR is silent (zero RMS)")
    wet = _convolve_full(clean.samples, rir.samples)[: len(clean)]
    rms_in = rms(clean)
    rms_out = rms(wet)
    if rms_in == 0.0 or rms_out == 0.0:
        return AudioBuffer(np.zeros(len(clean)), clean.sample_rate)
    return AudioBuffer(wet * (rms_in / rms_out), clean.sample_rate)


def _list_wavs(directory: Path, recursive: bool) -> list[Path]:
    it = directory.rglob("*") if recursive else directory.iterdir()
    files = [p for p in it if p.is_file() and p.suffix.lower() == ".wav"]
    return sorted(files, key=lambda p: p.relative_to(directory).as_posix())


def _process_one(
    in_path: Path, out_dir: Path, spec: AugmentSpec, sources: list[Path], source_root: Path
) -> FileOutcome:
    trial_id = in_path.stem
    seed = file_seed(spec.seed, trial_id)
    rng = np.random.default_rng(seed)
    # Draw order is fixed: source index, then SNR (additive only), then offset.
    src = sources[int(rng.integers(0, len(sources)))]
    source_rel = src.relative_to(source_root).as_posix()
    clean = read_wav(in_path)
    out_path = out_dir / in_path.name

    if spec.category == "reverb":
        rir = read_wav(src)
        wet = reverberate(clean, rir)
        samples, scale = _apply_clip_policy(wet.samples, spec.clip_policy)
        write_wav(out_path, AudioBuffer(samples, clean.sample_rate))
        return FileOutcome(
            input_path=str(in_path),
            output_path=str(out_path),
            category=spec.category,
            source_file=source_rel,
            file_seed=seed,
            rir_id=source_rel,
            scale=scale,
        )

    low, high = spec.snr_range_db
    snr_db = float(rng.uniform(low, high))
    interferer = read_wav(src)
    n = len(clean)
    span = interferer.samples.size - n + 1 if interferer.samples.size >= n else interferer.samples.size
    offset = int(rng.integers(0, max(1, span)))
    fitted = _fit_length(interferer.samples, n, offset)
    mixed, gain, scale = _mix(clean.samples, fitted, snr_db, spec.clip_policy)
    realized = 20.0 * math.log10(rms(clean.samples) / rms(gain * fitted))
    write_wav(out_path, AudioBuffer(mixed, clean.sample_rate))
    return FileOutcome(
        input_path=str(in_path),
        output_path=str(out_path),
        category=spec.category,
        source_file=source_rel,
        file_seed=seed,
        snr_db=snr_db,
        realized_snr_db=realized,
        loop_offset=offset,
        scale=scale,
    )


def augment_corpus(
    in_dir: str | Path,
    out_dir: str | Path,
    spec: AugmentSpec,
    jobs: int = 1,
) -> AugmentSummary:
    """Perturb every WAV in in_dir into out_dir, deterministically.

    Writes ``augment_manifest.jsonl`` next to the outputs with one line per
    processed file recording every random choice; re-running with the same
    inputs and spec reproduces the outputs byte for byte, at any ``jobs``.
    Per-file failures are collected and reported, not fatal.
    """
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    if not in_dir.is_dir():
        raise AugmentError(f"input directory not found: {in_dir}")
    if in_dir.resolve() == out_dir.resolve():
        raise AugmentError("out_dir must differ from in_dir (outputs keep the input basenames)")
    if not spec.source_dir.is_dir():
        raise AugmentError(f"source directory not found: {spec.source_dir}")
    sources = _list_wavs(spec.source_dir, recursive=True)
    if not sources:
        raise AugmentError(f"source directory {spec.source_dir} contains no WAV files")
    inputs = _list_wavs(in_dir, recursive=False)
    if not inputs:
        raise AugmentError(f"input directory {in_dir} contains no WAV files")
    if jobs < 1:
        raise AugmentError(f"jobs must be >= 1, got {jobs}")
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(p: Path):
        try:
            return _process_one(p, out_dir, spec, sources, spec.source_dir), None
        except Exception as e:  # collected per file; the run continues
            return None, (str(p), f"{type(e).__name__}: {e}")

    if jobs == 1:
        results = [work(p) for p in inputs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, inputs))

    entries = tuple(outcome for outcome, _ in results if outcome is not None)
    failures = tuple(failure for _, failure in results if failure is not None)

    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for outcome in entries:  # input order, independent of completion order
            fh.write(json.dumps(asdict(outcome), sort_keys=True) + "\n")
    return AugmentSummary(
        category=spec.category,
        seed=spec.seed,
        entries=entries,
        failures=failures,
        manifest_path=str(manifest_path),
    )
