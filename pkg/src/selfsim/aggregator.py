"""Superposition of ON/OFF sources into one time-ordered trace."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InsufficientDataError, ParameterDomainError
from .sampling import ParetoParams
from .source_model import (
    SIZE_FIXED,
    SIZE_POLICIES,
    TAX_BYTES,
    FramingConstants,
    Packet,
    SourceConfig,
    SourceStream,
    draw_packet_size,
)

BETA_ON = 1.0


@dataclass(frozen=True)
class GeneratorConfig:
    n_sources: int
    target_rate: float
    link_rate: float
    alpha_on: float
    alpha_off: float
    beta_off: float
    tolerance: float = 0.02
    packet_budget: int = 200_000
    master_seed: int = 0
    size_policy: str = SIZE_FIXED
    phase_offset: bool = False
    size_seed: int | None = None

    def __post_init__(self):
        for name in ("alpha_on", "alpha_off"):
            a = getattr(self, name)
            if not 1 < a < 2:
                raise ParameterDomainError(f"{name}={a!r} must lie in (1, 2)")
        if self.n_sources < 1:
            raise ParameterDomainError("n_sources must be at least 1")
        if not self.link_rate > 0:
            raise ParameterDomainError("link_rate must be positive")
        if not 0 < self.target_rate <= self.link_rate:
            raise ParameterDomainError("target_rate must lie in (0, link_rate]")
        if not self.beta_off > 0:
            raise ParameterDomainError("beta_off must be positive")
        if not self.tolerance > 0:
            raise ParameterDomainError("tolerance must be positive")
        if self.packet_budget < 1:
            raise ParameterDomainError("packet_budget must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise ParameterDomainError("master_seed must be an unsigned 64-bit integer")
        if self.size_seed is not None and not 0 <= self.size_seed < 2**64:
            raise ParameterDomainError("size_seed must be an unsigned 64-bit integer")
        if self.size_policy not in SIZE_POLICIES:
            raise ParameterDomainError(f"unknown size_policy {self.size_policy!r}")

    def replace(self, **changes) -> "GeneratorConfig":
        return replace(self, **changes)

    @property
    def population_seed(self) -> int:
        """Seed of the per-source fixed packet sizes."""
        return self.master_seed if self.size_seed is None else self.size_seed

    def source_config(self, source_id: int) -> SourceConfig:
        return SourceConfig(
            on_params=ParetoParams(self.alpha_on, BETA_ON),
            off_params=ParetoParams(self.alpha_off, self.beta_off),
            packet_size=draw_packet_size(self.population_seed, source_id),
            link_rate=self.link_rate,
            source_id=source_id,
            size_policy=self.size_policy,
            phase_offset=self.phase_offset,
        )


@dataclass
class Trace:
    """Packets sorted by arrival time, ties broken by ascending source id."""

    arrival_times: np.ndarray
    sizes: np.ndarray
    source_ids: np.ndarray
    link_rate: float
    framing: FramingConstants = field(default_factory=FramingConstants)

    def __post_init__(self):
        self.arrival_times = np.asarray(self.arrival_times, dtype=np.float64)
        self.sizes = np.asarray(self.sizes, dtype=np.int64)
        self.source_ids = np.asarray(self.source_ids, dtype=np.int64)
        if not (self.arrival_times.shape == self.sizes.shape == self.source_ids.shape):
            raise ValueError("trace columns differ in length")

    @classmethod
    def from_packets(cls, packets, link_rate) -> "Trace":
        packets = list(packets)
        return cls(
            np.array([p.arrival_time for p in packets], dtype=np.float64),
            np.array([p.size for p in packets], dtype=np.int64),
            np.array([p.source_id for p in packets], dtype=np.int64),
            link_rate,
        )

    def __len__(self):
        return self.arrival_times.size

    def __iter__(self):
        for t, s, i in zip(self.arrival_times, self.sizes, self.source_ids):
            yield Packet(float(t), int(s), int(i))

    def __getitem__(self, k) -> Packet:
        return Packet(float(self.arrival_times[k]), int(self.sizes[k]), int(self.source_ids[k]))

    def is_sorted(self) -> bool:
        t, s = self.arrival_times, self.source_ids
        if t.size < 2:
            return True
        dt = np.diff(t)
        return bool(np.all((dt > 0) | ((dt == 0) & (np.diff(s) > 0))))

    def framed_bits(self) -> np.ndarray:
        return (self.sizes + self.framing.tax_bytes) * 8.0


def merge_streams(parts, link_rate: float, limit: int | None = None) -> Trace:
    """Merge per-source ``(times, sizes, source_id)`` arrays by ``(time, source_id)``."""
    times = np.concatenate([p[0] for p in parts]) if parts else np.empty(0)
    sizes = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, np.int64)
    ids = (np.concatenate([np.full(len(p[0]), p[2], dtype=np.int64) for p in parts])
           if parts else np.empty(0, np.int64))
    order = np.lexsort((ids, times))
    if limit is not None:
        order = order[:limit]
    return Trace(times[order], sizes[order], ids[order], link_rate)


def generate_trace(cfg: GeneratorConfig) -> Trace:
    """Merged trace of ``cfg.n_sources`` sources holding exactly ``packet_budget`` packets.

    Every source is generated past a common horizon, so all packets before
    the horizon are known; the horizon grows until it holds the budget.
    """
    budget = cfg.packet_budget
    streams = [SourceStream(cfg.source_config(i), cfg.master_seed) for i in range(cfg.n_sources)]
    for st in streams:
        st.extend()
    horizon = min(st.last_time for st in streams)
    while True:
        for st in streams:
            st.ensure_past(horizon)
        counts = [int(np.searchsorted(st.arrays()[0], horizon, side="right")) for st in streams]
        total = sum(counts)
        if total >= budget:
            break
        growth = max(1.25, 1.1 * budget / max(total, 1))
        horizon = horizon * growth if horizon > 0 else streams[0].arrays()[0][-1] + 1.0
    parts = []
    for st, c in zip(streams, counts):
        times, sizes = st.arrays()
        parts.append((times[:c], sizes[:c], st.config.source_id))
    return merge_streams(parts, cfg.link_rate, limit=budget)


def achieved_bit_rate(t: Trace) -> float:
    """Framed bits over the span from first arrival to the end of the last transmission."""
    if len(t) < 2:
        raise InsufficientDataError("achieved rate needs at least 2 packets")
    bits = t.framed_bits()
    last_tx = bits[-1] / t.link_rate
    span = t.arrival_times[-1] + last_tx - t.arrival_times[0]
    return float(bits.sum() / span)


def relative_error(achieved: float, target: float) -> float:
    return (achieved - target) / target


__all__ = [
    "BETA_ON",
    "GeneratorConfig",
    "Trace",
    "TAX_BYTES",
    "achieved_bit_rate",
    "generate_trace",
    "merge_streams",
    "relative_error",
]
