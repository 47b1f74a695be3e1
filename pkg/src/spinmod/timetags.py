"""Photon time-tag streams: binary file format and the coincidence correlator.

Tags are integer picoseconds.  File layout (little-endian)::

    header : b"TTAG" | version u16 | duration_ps u64 | seed u64
    record : channel u8 (0 = A, 1 = B) | time_ps u64

Records are written in time order, channel A first on ties.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

MAGIC = b"TTAG"
VERSION = 1
HEADER = np.dtype([("magic", "S4"), ("version", "<u2"), ("duration", "<u8"), ("seed", "<u8")])
RECORD = np.dtype([("channel", "u1"), ("time", "<u8")])
PS_PER_NS = 1000


class TimeTagFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TimeTagStream:
    channel_a: np.ndarray  # int64 ps, strictly increasing
    channel_b: np.ndarray
    duration_ps: int
    seed: int = 0

    def __post_init__(self):
        for name in ("channel_a", "channel_b"):
            t = np.asarray(getattr(self, name), dtype=np.int64)
            if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > self.duration_ps):
                raise ValueError(f"{name} must be strictly increasing within [0, duration]")
            object.__setattr__(self, name, t)

    @property
    def duration(self) -> float:
        return self.duration_ps / PS_PER_NS

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (self.duration_ps == other.duration_ps and self.seed == other.seed
                and np.array_equal(self.channel_a, other.channel_a)
                and np.array_equal(self.channel_b, other.channel_b))


def write_stream(stream: TimeTagStream, path) -> None:
    header = np.array([(MAGIC, VERSION, stream.duration_ps, stream.seed)], dtype=HEADER)
    times = np.concatenate([stream.channel_a, stream.channel_b])
    chans = np.concatenate([np.zeros(stream.channel_a.size, np.uint8), np.ones(stream.channel_b.size, np.uint8)])
    order = np.lexsort((chans, times))
    rec = np.empty(times.size, dtype=RECORD)
    rec["channel"] = chans[order]
    rec["time"] = times[order]
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(rec.tobytes())


def read_stream(path) -> TimeTagStream:
    data = Path(path).read_bytes()
    if len(data) < HEADER.itemsize:
        raise TimeTagFormatError("file shorter than header")
    header = np.frombuffer(data[:HEADER.itemsize], dtype=HEADER)[0]
    if header["magic"] != MAGIC:
        raise TimeTagFormatError("bad magic")
    if header["version"] != VERSION:
        raise TimeTagFormatError(f"unsupported version {header['version']}")
    body = data[HEADER.itemsize:]
    if len(body) % RECORD.itemsize:
        raise TimeTagFormatError("truncated record")
    rec = np.frombuffer(body, dtype=RECORD)
    if np.any(rec["channel"] > 1):
        raise TimeTagFormatError("unknown channel id")
    t = rec["time"].astype(np.int64)
    return TimeTagStream(t[rec["channel"] == 0], t[rec["channel"] == 1],
                         int(header["duration"]), int(header["seed"]))


@dataclass(frozen=True)
class CoincidenceHistogram:
    bin_width: float  # ns
    lags: np.ndarray  # bin centres, ns
    counts: np.ndarray
    normalization: float  # expected accidental counts per bin

    @property
    def normalized(self) -> np.ndarray:
        return self.counts / self.normalization

    @property
    def errors(self) -> np.ndarray:
        """Poisson standard error of the normalized histogram."""
        return np.sqrt(np.maximum(self.counts, 1)) / self.normalization


@numba.njit(cache=True)
def _two_pointer(a, b, w, n_half):
    counts = np.zeros(2 * n_half + 1, dtype=np.int64)
    edge = (2 * n_half + 1) * w  # window in units of twice the lag
    start = 0
    nb = b.size
    for i in range(a.size):
        ta = a[i]
        while start < nb and 2 * (b[start] - ta) < -edge:
            start += 1
        j = start
        while j < nb and 2 * (b[j] - ta) < edge:
            k = (2 * (b[j] - ta) + w) // (2 * w)
            counts[k + n_half] += 1
            j += 1
    return counts


def _bins(bin_width: float, tau_max: float) -> tuple[int, int]:
    w = int(round(bin_width * PS_PER_NS))
    if w <= 0:
        raise ValueError("bin width below 1 ps")
    return w, int(round(tau_max / bin_width))


def _histogram(stream: TimeTagStream, bin_width: float, counts: np.ndarray, n_half: int):
    lags = np.arange(-n_half, n_half + 1) * bin_width
    T = stream.duration
    norm = stream.channel_a.size * stream.channel_b.size * bin_width / T
    return CoincidenceHistogram(bin_width, lags, counts, norm)


def correlate(stream: TimeTagStream, bin_width: float, tau_max: float) -> CoincidenceHistogram:
    """Start-stop histogram of t_B - t_A over |lag| ≤ tau_max.

    Bins are centred on multiples of ``bin_width``.  A sliding window over
    channel B visits only pairs inside the lag range.
    """
    if stream.channel_a.size == 0 or stream.channel_b.size == 0:
        raise ValueError("cannot correlate an empty channel")
    if tau_max > stream.duration / 10:
        raise ValueError(f"tau_max must not exceed duration/10 = {stream.duration / 10:.4g} ns")
    w, n_half = _bins(bin_width, tau_max)
    counts = _two_pointer(stream.channel_a, stream.channel_b, np.int64(w), np.int64(n_half))
    return _histogram(stream, bin_width, counts, n_half)


def correlate_all_pairs(stream: TimeTagStream, bin_width: float, tau_max: float) -> CoincidenceHistogram:
    """Quadratic reference implementation of :func:`correlate`."""
    w, n_half = _bins(bin_width, tau_max)
    lag = stream.channel_b[None, :] - stream.channel_a[:, None]
    k = (2 * lag + w) // (2 * w)
    k = k[np.abs(k) <= n_half]
    counts = np.bincount(k + n_half, minlength=2 * n_half + 1).astype(np.int64)
    return _histogram(stream, bin_width, counts, n_half)


def stream_statistics(stream: TimeTagStream, tau_max: float | None = None) -> dict:
    T = stream.duration
    na, nb = stream.channel_a.size, stream.channel_b.size
    stats = {
        "duration_ns": T,
        "counts_a": na,
        "counts_b": nb,
        "rate_a": na / T if T > 0 else 0.0,
        "rate_b": nb / T if T > 0 else 0.0,
    }
    if tau_max is not None and na and nb:
        w = int(round(tau_max * PS_PER_NS))
        lo = np.searchsorted(stream.channel_b, stream.channel_a - w, side="left")
        hi = np.searchsorted(stream.channel_b, stream.channel_a + w, side="right")
        stats["pairs_within_tau_max"] = int(np.sum(hi - lo))
    return stats
