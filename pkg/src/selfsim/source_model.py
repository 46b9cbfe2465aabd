"""A single Pareto ON/OFF packet source.

A source alternates bursts of back-to-back packets at line rate with silent
gaps. Burst lengths (packets) and gap durations (seconds) are Pareto
distributed. Each source draws from its own uniform substreams, keyed by
``(seed, source_id, purpose)``, so adding sources never changes existing ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterDomainError
from .sampling import ParetoParams, UniformSource, pareto_icdf

MIN_PACKET_BYTES = 64
MAX_PACKET_BYTES = 1518

SIZE_FIXED = "fixed-per-source"
SIZE_PER_PACKET = "per-packet"
SIZE_POLICIES = (SIZE_FIXED, SIZE_PER_PACKET)

# Substream purpose tags
STREAM_ON, STREAM_OFF, STREAM_SIZE, STREAM_PHASE = range(4)
_STREAMS_PER_SOURCE = 4

# Cap on a single burst; far beyond any packet budget, keeps counts in int64.
MAX_BURST_PACKETS = 2**40

_CHUNK_PACKETS = 1024


@dataclass(frozen=True)
class FramingConstants:
    """Per-packet Ethernet overhead: 96-bit inter-packet gap plus 64-bit preamble."""

    ipg_bits: int = 96
    preamble_bits: int = 64

    @property
    def tax_bytes(self) -> int:
        return (self.ipg_bits + self.preamble_bits) // 8


FRAMING = FramingConstants()
TAX_BYTES = FRAMING.tax_bytes


def substream_id(source_id: int, purpose: int) -> int:
    return int(source_id) * _STREAMS_PER_SOURCE + int(purpose)


def source_uniform(seed: int, source_id: int, purpose: int) -> UniformSource:
    return UniformSource(seed, substream_id(source_id, purpose))


def draw_packet_size(seed: int, source_id: int) -> int:
    """Per-source fixed packet size, uniform on the integers [64, 1518]."""
    u = source_uniform(seed, source_id, STREAM_SIZE)
    return int(u.integers(MIN_PACKET_BYTES, MAX_PACKET_BYTES, 1)[0])


@dataclass(frozen=True)
class SourceConfig:
    on_params: ParetoParams
    off_params: ParetoParams
    packet_size: int
    link_rate: float
    source_id: int = 0
    size_policy: str = SIZE_FIXED
    phase_offset: bool = False

    def __post_init__(self):
        if self.on_params.beta != 1:
            raise ParameterDomainError("ON bursts must have beta = 1 (one packet minimum)")
        self.on_params.require_finite_mean()
        self.off_params.require_finite_mean()
        if not MIN_PACKET_BYTES <= self.packet_size <= MAX_PACKET_BYTES:
            raise ParameterDomainError(
                f"packet_size {self.packet_size} outside [{MIN_PACKET_BYTES}, {MAX_PACKET_BYTES}]"
            )
        if not self.link_rate > 0:
            raise ParameterDomainError("link_rate must be positive")
        if self.size_policy not in SIZE_POLICIES:
            raise ParameterDomainError(f"unknown size_policy {self.size_policy!r}")

    def transmission_time(self, size=None):
        """Seconds one framed packet occupies the link."""
        if size is None:
            size = self.packet_size
        return (np.asarray(size) + TAX_BYTES) * 8.0 / self.link_rate


@dataclass(frozen=True)
class Packet:
    arrival_time: float
    size: int
    source_id: int


def burst_size_from_sample(x):
    """Round a continuous burst length half-up, with a floor of one packet."""
    n = np.floor(np.asarray(x, dtype=float) + 0.5)
    n = np.clip(n, 1, MAX_BURST_PACKETS).astype(np.int64)
    return int(n) if n.ndim == 0 else n


def next_burst_size(src: SourceConfig, u: UniformSource) -> int:
    return burst_size_from_sample(pareto_icdf(u.next(), src.on_params))


def next_off_duration(src: SourceConfig, u: UniformSource) -> float:
    return pareto_icdf(u.next(), src.off_params)


class _Lookahead:
    """Buffered view over a uniform stream that can peek without consuming."""

    def __init__(self, u: UniformSource):
        self._u = u
        self._buf = np.empty(0)
        self._pos = 0

    def peek(self, n: int) -> np.ndarray:
        have = self._buf.size - self._pos
        if have < n:
            fresh = self._u.uniform(max(n - have, _CHUNK_PACKETS))
            self._buf = np.concatenate([self._buf[self._pos:], fresh])
            self._pos = 0
        return self._buf[self._pos:self._pos + n]

    def take(self, n: int) -> np.ndarray:
        out = self.peek(n).copy()
        self._pos += n
        return out


@dataclass
class SourceStream:
    """Lazily generated packet stream of one source.

    Packets are produced in chunks; the arrival times do not depend on the
    chunk size because they follow a sequential recurrence.
    """

    config: SourceConfig
    seed: int
    _times: list = field(default_factory=list, init=False, repr=False)
    _sizes: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        sid = self.config.source_id
        self._on = _Lookahead(source_uniform(self.seed, sid, STREAM_ON))
        self._off = _Lookahead(source_uniform(self.seed, sid, STREAM_OFF))
        self._size_u = source_uniform(self.seed, sid, STREAM_SIZE)
        if self.config.size_policy == SIZE_PER_PACKET:
            # first draw of the size stream is reserved for the fixed size
            self._size_u.raw(1)
        self._remaining = 0
        self._started = False
        self._last_tx = 0.0
        self.count = 0
        self.last_time = -math.inf

    def _start_time(self) -> float:
        if not self.config.phase_offset:
            return 0.0
        u = source_uniform(self.seed, self.config.source_id, STREAM_PHASE)
        return u.next() * self.config.off_params.beta

    def extend(self, n: int = _CHUNK_PACKETS) -> None:
        """Generate the next ``n`` packets."""
        cfg = self.config
        is_new = np.zeros(n, dtype=bool)
        pos = min(self._remaining, n)
        self._remaining -= pos
        while pos < n:
            need = n - pos
            sizes = burst_size_from_sample(pareto_icdf(self._on.peek(need), cfg.on_params))
            ends = np.cumsum(sizes)
            j = int(np.searchsorted(ends, need))  # first burst reaching the chunk end
            self._on.take(j + 1)
            starts = pos + np.concatenate(([0], ends[:j]))
            is_new[starts] = True
            self._remaining = int(ends[j] - need)
            pos = n

        gaps = np.zeros(n)
        n_new = int(is_new.sum())
        first_burst = not self._started
        if first_burst:
            # the very first burst opens at the start time, no OFF gap before it
            n_new -= 1
        if n_new:
            idx = np.flatnonzero(is_new)
            if first_burst:
                idx = idx[1:]
            gaps[idx] = pareto_icdf(self._off.take(n_new), cfg.off_params)

        if cfg.size_policy == SIZE_PER_PACKET:
            pkt_sizes = self._size_u.integers(MIN_PACKET_BYTES, MAX_PACKET_BYTES, n)
        else:
            pkt_sizes = np.full(n, cfg.packet_size, dtype=np.int64)
        tx = cfg.transmission_time(pkt_sizes)

        # t[k] = t[k-1] + (tx[k-1] + gap[k]), associated the same way across chunks
        inc = np.empty(n + 1)
        if first_burst:
            inc[0], inc[1] = self._start_time(), 0.0
        else:
            inc[0], inc[1] = self.last_time, self._last_tx + gaps[0]
        inc[2:] = tx[:-1] + gaps[1:]
        times = np.cumsum(inc)[1:]
        self._started = True
        self._last_tx = float(tx[-1])
        self.last_time = float(times[-1])
        self.count += n
        self._times.append(times)
        self._sizes.append(pkt_sizes)

    def ensure_count(self, n: int) -> None:
        while self.count < n:
            self.extend()

    def ensure_past(self, t: float) -> None:
        """Generate until some packet starts strictly after ``t``."""
        while self.last_time <= t:
            self.extend()

    def arrays(self):
        if len(self._times) > 1:
            self._times = [np.concatenate(self._times)]
            self._sizes = [np.concatenate(self._sizes)]
        if not self._times:
            return np.empty(0), np.empty(0, dtype=np.int64)
        return self._times[0], self._sizes[0]


def emit_source(src: SourceConfig, seed: int, n_packets: int | None = None,
                duration: float | None = None) -> list[Packet]:
    """Packets of one source, stopped after ``n_packets`` or before ``duration`` s."""
    if (n_packets is None) == (duration is None):
        raise ValueError("give exactly one of n_packets or duration")
    stream = SourceStream(src, seed)
    if n_packets is not None:
        if n_packets < 1:
            raise ValueError("n_packets must be positive")
        stream.ensure_count(n_packets)
        times, sizes = stream.arrays()
        times, sizes = times[:n_packets], sizes[:n_packets]
    else:
        if not duration > 0:
            raise ValueError("duration must be positive")
        stream.ensure_past(duration)
        times, sizes = stream.arrays()
        keep = times < duration
        times, sizes = times[keep], sizes[keep]
    return [Packet(float(t), int(s), src.source_id) for t, s in zip(times, sizes)]
