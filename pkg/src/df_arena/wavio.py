"""Minimal RIFF/WAVE reader-writer for 16 kHz mono corpora.

Supports exactly what the augmentation pipeline consumes: PCM 16-bit and
IEEE float 32-bit, mono, 16000 Hz. Anything else is a hard error; there is
no silent resampling or downmixing. Output is always PCM 16-bit, no dither.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AudioError

REQUIRED_SAMPLE_RATE = 16000

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3


@dataclass(frozen=True)
class AudioBuffer:
    """Mono float64 samples at 16 kHz. Integer input is scaled by 1/32768."""

    samples: np.ndarray
    sample_rate: int = REQUIRED_SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate != REQUIRED_SAMPLE_RATE:
            raise AudioError(
                f"unsupported sample rate {self.sample_rate} Hz; {REQUIRED_SAMPLE_RATE} Hz required"
            )
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise AudioError("audio buffer must be a non-empty 1-D signal")
        if not np.all(np.isfinite(self.samples)):
            raise AudioError("audio buffer contains non-finite samples")

    def __len__(self) -> int:
        return int(self.samples.size)


def rms(x: np.ndarray | AudioBuffer) -> float:
    if isinstance(x, AudioBuffer):
        x = x.samples
    return float(np.sqrt(np.mean(np.square(x))))


def read_wav(path: str | Path) -> AudioBuffer:
    """Read a mono 16 kHz PCM16/float32 WAV file.

    Raises AudioError for any other rate, channel count, or codec; callers
    are expected to convert offline rather than rely on hidden resampling.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise AudioError(f"file not found: {path}")
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioError(f"{path}: truncated header or not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        body_end = body_start + chunk_size
        if body_end > len(data):
            raise AudioError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise AudioError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            payload = data[body_start:body_end]
        pos = body_end + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise AudioError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format not in (_FMT_PCM, _FMT_IEEE_FLOAT):
        raise AudioError(
            f"{path}: unsupported codec (format tag {audio_format}); "
            "PCM 16-bit or IEEE float 32-bit required"
        )
    if channels != 1:
        raise AudioError(f"{path}: {channels} channels; mono required")
    if sample_rate != REQUIRED_SAMPLE_RATE:
        raise AudioError(
            f"{path}: unsupported sample rate {sample_rate} Hz; "
            f"{REQUIRED_SAMPLE_RATE} Hz required (no resampling is performed)"
        )
    if audio_format == _FMT_PCM:
        if bits != 16:
            raise AudioError(f"{path}: PCM must be 16-bit, got {bits}-bit")
        usable = len(payload) - (len(payload) % 2)
        samples = np.frombuffer(payload[:usable], dtype="<i2").astype(np.float64) / 32768.0
    else:
        if bits != 32:
            raise AudioError(f"{path}: IEEE float must be 32-bit, got {bits}-bit")
        usable = len(payload) - (len(payload) % 4)
        samples = np.frombuffer(payload[:usable], dtype="<f4").astype(np.float64)
    if samples.size == 0:
        raise AudioError(f"{path}: empty data chunk")
    if not np.all(np.isfinite(samples)):
        raise AudioError(f"{path}: non-finite samples")
    return AudioBuffer(samples, sample_rate)


def write_wav(path: str | Path, buffer: AudioBuffer) -> None:
    """Write PCM 16-bit mono. Samples are clamped to [-1, 1] on the way out."""
    x = np.clip(buffer.samples, -1.0, 1.0)
    q = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
    payload = q.tobytes()
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack(
                "<IHHIIHH",
                16,
                _FMT_PCM,
                1,
                buffer.sample_rate,
                buffer.sample_rate * 2,
                2,
                16,
            ),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    Path(path).write_bytes(header + payload)
