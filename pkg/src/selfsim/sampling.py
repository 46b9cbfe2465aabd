"""Pareto arithmetic and seeded inverse-CDF sampling.

Uniform variates come from numpy's PCG64 bit generator. A stream is keyed by
``(seed, stream_id)`` through ``SeedSequence(seed, spawn_key=(stream_id,))``
and every raw 64-bit output ``k`` maps to ``s = (k + 1) / 2**64``, so
``s`` lies in ``(0, 1]`` and its least value is ``2**-64``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterDomainError

PRNG_NAME = "numpy.PCG64/SeedSequence(seed,spawn_key=(stream_id,))"
_TWO_POW_MINUS_64 = 2.0**-64
_SEED_LIMIT = 2**64


class Variance(enum.Enum):
    """Marker returned by :func:`pareto_variance` when the variance diverges."""

    INFINITE = "infinite"


INFINITE_VARIANCE = Variance.INFINITE


@dataclass(frozen=True)
class ParetoParams:
    """Shape ``alpha`` and minimum ``beta`` of a Pareto law.

    Construction only requires ``alpha > 0`` and ``beta > 0``; the moment
    functions enforce ``alpha > 1`` themselves.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterDomainError(f"alpha must be positive, got {self.alpha!r}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ParameterDomainError(f"beta must be positive, got {self.beta!r}")

    def require_finite_mean(self):
        if self.alpha <= 1:
            raise ParameterDomainError(
                f"alpha must exceed 1 for a finite mean, got {self.alpha!r}"
            )
        return self


class UniformSource:
    """Reproducible stream of uniform variates on ``(0, 1]``.

    Not thread-safe; give each thread its own instance.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed < _SEED_LIMIT:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        if stream_id < 0:
            raise ValueError(f"stream_id must be non-negative, got {stream_id}")
        self.seed = seed
        self.stream_id = stream_id
        self._bitgen = np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream_id,)))

    def __repr__(self):
        return f"UniformSource(seed={self.seed}, stream_id={self.stream_id})"

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as ``uint64``."""
        return np.asarray(self._bitgen.random_raw(n), dtype=np.uint64)

    def uniform(self, n: int) -> np.ndarray:
        return (self.raw(n).astype(np.float64) + 1.0) * _TWO_POW_MINUS_64

    def next(self) -> float:
        return float(self.uniform(1)[0])

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        """``n`` integers uniform on the closed range ``[low, high]``."""
        span = np.uint64(high - low + 1)
        return (self.raw(n) % span).astype(np.int64) + low


def derive_seed(master_seed: int, *tags: int) -> int:
    """Deterministic 64-bit child seed for ``master_seed`` and integer tags."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(t) for t in tags))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def pareto_pdf(x, p: ParetoParams):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        dens = np.where(x >= p.beta, p.alpha * p.beta**p.alpha / x ** (p.alpha + 1), 0.0)
    return float(dens) if dens.ndim == 0 else dens


def pareto_mean(p: ParetoParams) -> float:
    p.require_finite_mean()
    return p.alpha * p.beta / (p.alpha - 1)


def pareto_variance(p: ParetoParams):
    """Variance for ``alpha > 2``; :data:`INFINITE_VARIANCE` for ``1 < alpha <= 2``."""
    p.require_finite_mean()
    if p.alpha <= 2:
        return INFINITE_VARIANCE
    return p.alpha * p.beta**2 / ((p.alpha - 1) ** 2 * (p.alpha - 2))


def pareto_icdf(s, p: ParetoParams):
    """Map uniform ``s`` in ``(0, 1]`` to ``beta / s**(1/alpha)``."""
    s = np.asarray(s, dtype=float)
    x = p.beta / s ** (1.0 / p.alpha)
    # s ** (1/alpha) can round just above s for s == 1; keep the support exact
    x = np.maximum(x, p.beta)
    return float(x) if x.ndim == 0 else x


def sample_pareto(p: ParetoParams, u: UniformSource, size: int | None = None):
    if size is None:
        return pareto_icdf(u.next(), p)
    return pareto_icdf(u.uniform(size), p)


def truncated_mean(p: ParetoParams, omega: float) -> float:
    """Mean of the Pareto law restricted to ``[beta, omega]`` (unnormalised)."""
    p.require_finite_mean()
    if not omega >= p.beta:
        raise ParameterDomainError(f"omega={omega!r} is below beta={p.beta!r}")
    return pareto_mean(p) * -math.expm1((p.alpha - 1) * math.log(p.beta / omega))
