"""Time-domain audio containers and WAV file I/O.

The separation stack works on mono, peak-normalized waveforms whose length
is a multiple of the codec's downsampling factor. This module owns that
contract: a hand-rolled RIFF/WAVE parser (so malformed files fail with a
byte offset instead of a silent misread), windowed-sinc resampling, and the
normalization/trimming pipeline that turns an arbitrary WAV into an
:class:`AudioChunk`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly


class WavParseError(ValueError):
    """Malformed RIFF/WAVE data. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedWavError(WavParseError):
    """Well-formed WAV using a codec or layout we do not handle."""


@dataclass
class AudioChunk:
    """A normalized mono waveform.

    samples: float64 array of shape (T,), every entry in [-1, 1].
    sample_rate: sampling frequency in Hz.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    def validate(self, divisible_by: int | None = None) -> None:
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        peak = np.max(np.abs(self.samples)) if len(self) else 0.0
        if peak > 1.0 + 1e-9:
            raise ValueError(f"waveform exceeds [-1, 1] (peak {peak:.6g})")
        if divisible_by is not None and len(self) % divisible_by != 0:
            raise ValueError(
                f"length {len(self)} is not a multiple of the downsampling factor {divisible_by}"
            )


def mix(x1: AudioChunk, x2: AudioChunk) -> AudioChunk:
    """Half-sum mixture of two equal-length stems."""
    if len(x1) != len(x2):
        raise ValueError(f"stem lengths differ: {len(x1)} vs {len(x2)}")
    if x1.sample_rate != x2.sample_rate:
        raise ValueError("stem sample rates differ")
    return AudioChunk(0.5 * x1.samples + 0.5 * x2.samples, x1.sample_rate)


def peak_normalize(samples: np.ndarray, headroom: float = 1.0) -> np.ndarray:
    """Scale so the peak magnitude equals ``headroom``. Silence passes through."""
    samples = np.asarray(samples, dtype=np.float64)
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak == 0.0:
        return samples
    return samples * (headroom / peak)


def resample(samples: np.ndarray, orig_rate: int, target_rate: int) -> np.ndarray:
    """Windowed-sinc (Kaiser) polyphase resampling to ``target_rate``."""
    if orig_rate == target_rate:
        return np.asarray(samples, dtype=np.float64)
    ratio = Fraction(target_rate, orig_rate)
    return resample_poly(np.asarray(samples, dtype=np.float64), ratio.numerator, ratio.denominator)


# --- RIFF/WAVE ---------------------------------------------------------------

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Parse a RIFF/WAVE file into (samples, sample_rate).

    Accepts PCM 16-bit and IEEE float 32-bit, mono or stereo. Samples come
    back as float64 in [-1, 1], shape (T,) or (T, channels). Truncated or
    malformed files raise :class:`WavParseError` carrying the byte offset.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavParseError("file too short for a RIFF header", 0)
    if data[0:4] != b"RIFF":
        raise WavParseError("missing RIFF magic", 0)
    if data[8:12] != b"WAVE":
        raise WavParseError("missing WAVE form type", 8)

    fmt = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + chunk_size > len(data):
            raise WavParseError(
                f"chunk {chunk_id!r} declares {chunk_size} bytes beyond end of file", body
            )
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise WavParseError("fmt chunk shorter than 16 bytes", body)
            fmt = struct.unpack_from("<HHIIHH", data, body)
        elif chunk_id == b"data":
            if fmt is None:
                raise WavParseError("data chunk before fmt chunk", pos)
            return _decode_data(fmt, data[body : body + chunk_size], body), fmt[2]
        pos = body + chunk_size + (chunk_size & 1)  # chunks are word-aligned
    raise WavParseError("no data chunk found", pos)


def _decode_data(fmt: tuple, raw: bytes, offset: int) -> np.ndarray:
    audio_format, channels, _rate, _byte_rate, _block_align, bits = fmt
    if channels < 1:
        raise WavParseError("zero channels", offset)
    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 32768.0
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedWavError(
            f"unsupported format (audio_format={audio_format}, bits={bits}); "
            "only PCM 16-bit and IEEE float 32-bit are handled",
            offset,
        )
    frame_bytes = dtype.itemsize * channels
    if len(raw) % frame_bytes != 0:
        raise WavParseError("data chunk truncated mid-frame", offset + len(raw))
    samples = np.frombuffer(raw, dtype=dtype).astype(np.float64) / scale
    if channels > 1:
        samples = samples.reshape(-1, channels)
    return samples


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float samples in [-1, 1] as a 16-bit PCM WAV."""
    samples = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.round(samples * 32767.0), -32768, 32767).astype("<i2")
    body = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, _WAVE_FORMAT_PCM, 1, sample_rate,
                                    sample_rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(body))
    Path(path).write_bytes(header + body)


def ingest_wav(path: str | Path, target_rate: int, trim_multiple: int = 1) -> AudioChunk:
    """Load a WAV and canonicalize it for the pipeline.

    Stereo is downmixed to mono, the signal is resampled to ``target_rate``
    with windowed-sinc resampling, peak-normalized to [-1, 1], and trimmed
    so its length is a multiple of ``trim_multiple``.
    """
    samples, rate = read_wav(path)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    samples = resample(samples, rate, target_rate)
    samples = peak_normalize(samples)
    if trim_multiple > 1:
        usable = (len(samples) // trim_multiple) * trim_multiple
        samples = samples[:usable]
    return AudioChunk(samples, target_rate)
