"""Parameter algebra for the ON/OFF rate equation and the load feedback loop.

The rate of ``N`` sources, each sending Pareto(``alpha_on``, 1) packet bursts
of framed size ``S = (S_p + S_o) * 8`` bits at link rate ``R`` separated by
Pareto(``alpha_off``, ``beta_off``) gaps, is

    r = N * E[b_on] / (E[t_on] + E[t_off])

with untruncated Pareto means. Solving for the shapes gives

    phi = (beta_on / beta_off) * (N * S / r - S / R)
        = alpha_off * (alpha_on - 1) / (alpha_on * (alpha_off - 1))
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .aggregator import BETA_ON, GeneratorConfig, achieved_bit_rate, generate_trace, relative_error
from .exceptions import InfeasibleTargetError, NonConvergenceError, OutOfRangeError, ParameterDomainError
from .sampling import derive_seed
from .source_model import (
    MAX_PACKET_BYTES,
    MIN_PACKET_BYTES,
    SIZE_FIXED,
    TAX_BYTES,
    draw_packet_size,
)

logger = logging.getLogger(__name__)

BETA_OFF_BOUNDS = (1e-6, 10.0)
_CALIBRATION_TAG = 0xCA11


def mean_payload_bytes() -> int:
    return (MIN_PACKET_BYTES + MAX_PACKET_BYTES) // 2


def framed_bits_per_packet(payload_bytes=None) -> float:
    if payload_bytes is None:
        payload_bytes = mean_payload_bytes()
    return (payload_bytes + TAX_BYTES) * 8


def population_payload_bytes(size_seed: int, n_sources: int) -> float:
    """Mean fixed packet size of sources ``0..n_sources-1``."""
    return float(np.mean([draw_packet_size(size_seed, i) for i in range(n_sources)]))


@dataclass(frozen=True)
class PhiValue:
    phi: float

    def __post_init__(self):
        if not self.phi > 0:
            raise InfeasibleTargetError(f"phi must be positive, got {self.phi!r}")

    def __float__(self):
        return float(self.phi)


def compute_phi(n_sources, beta_on, beta_off, r, R, payload_bytes=None) -> PhiValue:
    """Left side of the rate equation; ``payload_bytes`` defaults to the 791 B mean."""
    if min(n_sources, beta_on, beta_off, r, R) <= 0:
        raise ParameterDomainError("all arguments of compute_phi must be positive")
    s = framed_bits_per_packet(payload_bytes)
    phi = (beta_on / beta_off) * (n_sources * s / r - s / R)
    if not phi > 0:
        raise InfeasibleTargetError(
            f"target {r:g} b/s is unreachable with N={n_sources} at link rate {R:g} b/s"
        )
    return PhiValue(phi)


def _phi(phi) -> float:
    return float(phi.phi if isinstance(phi, PhiValue) else phi)


def feasible_alpha_on_range(phi) -> tuple[float, float]:
    """Open interval of ``alpha_on`` keeping the solved ``alpha_off`` inside (1, 2)."""
    phi = _phi(phi)
    if not phi > 0:
        raise ParameterDomainError("phi must be positive")
    if phi >= 2:
        return 1.0, 2.0
    return 1.0, min(2.0, 1.0 / (1.0 - phi / 2.0))


def phi_from_shapes(alpha_on: float, alpha_off: float) -> float:
    return alpha_off * (alpha_on - 1) / (alpha_on * (alpha_off - 1))


def alpha_off_from_phi(alpha_on: float, phi) -> float:
    """Unchecked ``phi / (1/alpha_on + phi - 1)``."""
    phi = _phi(phi)
    return phi / (1.0 / alpha_on + phi - 1.0)


def solve_alpha_off(alpha_on: float, phi) -> float:
    """OFF shape matching ``alpha_on`` for this ``phi``.

    ``alpha_on`` may sit on the closed cap 2; the bound ``1 / (1 - phi/2)``
    is strict because ``alpha_off`` reaches 2 there.
    """
    phi = _phi(phi)
    lo, hi = feasible_alpha_on_range(phi)
    if not alpha_on > lo:
        raise OutOfRangeError(f"alpha_on={alpha_on!r} must exceed {lo}", bound="lower")
    if alpha_on > 2.0 or (hi < 2.0 and not alpha_on < hi):
        raise OutOfRangeError(f"alpha_on={alpha_on!r} must be below {hi!r} for phi={phi!r}",
                              bound="upper")
    return alpha_off_from_phi(alpha_on, phi)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_sources: int
    beta_off: float
    alpha_on: float
    alpha_off: float
    phi: float
    payload_bytes: float
    seed: int
    achieved_rate: float
    relative_error: float


@dataclass
class CalibrationResult:
    config: GeneratorConfig
    achieved_rate: float
    relative_error: float
    iterations: int
    history: list = field(default_factory=list)


def _effective_alpha_on(alpha_on: float, phi: float) -> float:
    lo, hi = feasible_alpha_on_range(phi)
    if lo < alpha_on < hi:
        return alpha_on
    mid = 0.5 * (lo + hi)
    logger.info("alpha_on=%g infeasible for phi=%g; using midpoint %g", alpha_on, phi, mid)
    return mid


def calibrate(target_rate, link_rate, alpha_on, tolerance=0.02, packet_budget=200_000,
              master_seed=0, n_sources=32, beta_off=1e-3, max_iterations=50,
              beta_off_bounds=BETA_OFF_BOUNDS, size_policy=SIZE_FIXED,
              phase_offset=False) -> CalibrationResult:
    """Repeat generation, correcting ``beta_off`` (then ``N``) until the rate error is within tolerance.

    After a trial measuring ``r_hat``, ``beta_off`` is scaled by ``r_hat / r``.
    When that leaves ``beta_off_bounds``, ``beta_off`` is clamped and ``N`` is
    rescaled by ``r / r_hat`` instead. ``alpha_on`` is left as given unless
    it becomes infeasible for the current ``phi``.

    Trials draw ON/OFF randomness from iteration-tagged seeds while the
    per-source packet sizes stay pinned to ``master_seed``, so the final
    config describes one source population. In fixed-size mode ``phi`` uses
    that population's mean payload rather than 791 B.

    Raises ``NonConvergenceError`` (with ``history``) after ``max_iterations``
    trials, and ``InfeasibleTargetError`` when ``phi`` turns non-positive.
    """
    if not tolerance > 0:
        raise ParameterDomainError("tolerance must be positive")
    if max_iterations < 1:
        raise ParameterDomainError("max_iterations must be at least 1")
    if not 1 < alpha_on < 2:
        raise ParameterDomainError("alpha_on must lie in (1, 2)")
    if not 0 < target_rate <= link_rate:
        raise ParameterDomainError("target_rate must lie in (0, link_rate]")
    b_min, b_max = beta_off_bounds
    n = int(n_sources)
    beta = min(max(float(beta_off), b_min), b_max)
    history = []
    for it in range(max_iterations):
        if size_policy == SIZE_FIXED:
            payload = population_payload_bytes(master_seed, n)
        else:
            payload = float(mean_payload_bytes())
        phi = compute_phi(n, BETA_ON, beta, target_rate, link_rate, payload).phi
        a_on = _effective_alpha_on(alpha_on, phi)
        a_off = solve_alpha_off(a_on, phi)
        seed = derive_seed(master_seed, _CALIBRATION_TAG, it)
        cfg = GeneratorConfig(
            n_sources=n, target_rate=target_rate, link_rate=link_rate,
            alpha_on=a_on, alpha_off=a_off, beta_off=beta, tolerance=tolerance,
            packet_budget=packet_budget, master_seed=seed, size_policy=size_policy,
            phase_offset=phase_offset, size_seed=int(master_seed),
        )
        r_hat = achieved_bit_rate(generate_trace(cfg))
        err = relative_error(r_hat, target_rate)
        history.append(IterationRecord(it + 1, n, beta, a_on, a_off, phi, payload, seed, r_hat, err))
        logger.debug("iteration %d: N=%d beta_off=%.6g r_hat=%.6g err=%+.4f",
                     it + 1, n, beta, r_hat, err)
        if abs(err) <= tolerance:
            return CalibrationResult(cfg, r_hat, err, it + 1, history)
        proposal = beta * r_hat / target_rate
        if b_min <= proposal <= b_max:
            beta = proposal
        else:
            beta = min(max(proposal, b_min), b_max)
            n = max(1, round(n * target_rate / r_hat))
    raise NonConvergenceError(
        f"no trial within {tolerance:.3%} after {max_iterations} iterations", history
    )


class LoadCalibrator(BaseEstimator):
    """Estimator wrapper around :func:`calibrate`.

    ``fit`` takes no data; the fitted attributes are ``result_``, ``config_``,
    ``achieved_rate_``, ``relative_error_``, ``n_iter_`` and ``history_``.
    """

    def __init__(self, target_rate=1e7, link_rate=1e8, alpha_on=1.6, tolerance=0.02,
                 packet_budget=200_000, master_seed=0, n_sources=32, beta_off=1e-3,
                 max_iter=50, beta_off_bounds=BETA_OFF_BOUNDS, size_policy=SIZE_FIXED,
                 phase_offset=False):
        self.target_rate = target_rate
        self.link_rate = link_rate
        self.alpha_on = alpha_on
        self.tolerance = tolerance
        self.packet_budget = packet_budget
        self.master_seed = master_seed
        self.n_sources = n_sources
        self.beta_off = beta_off
        self.max_iter = max_iter
        self.beta_off_bounds = beta_off_bounds
        self.size_policy = size_policy
        self.phase_offset = phase_offset

    def fit(self, X=None, y=None):
        res = calibrate(
            self.target_rate, self.link_rate, self.alpha_on, tolerance=self.tolerance,
            packet_budget=self.packet_budget, master_seed=self.master_seed,
            n_sources=self.n_sources, beta_off=self.beta_off, max_iterations=self.max_iter,
            beta_off_bounds=self.beta_off_bounds, size_policy=self.size_policy,
            phase_offset=self.phase_offset,
        )
        self.result_ = res
        self.config_ = res.config
        self.achieved_rate_ = res.achieved_rate
        self.relative_error_ = res.relative_error
        self.n_iter_ = res.iterations
        self.history_ = res.history
        return self

    def generate(self, packet_budget=None, master_seed=None):
        """Trace from the calibrated configuration, optionally re-seeded."""
        check_is_fitted(self, "config_")
        cfg = self.config_
        changes = {}
        if packet_budget is not None:
            changes["packet_budget"] = int(packet_budget)
        if master_seed is not None:
            changes["master_seed"] = int(master_seed)
        return generate_trace(cfg.replace(**changes) if changes else cfg)

    def score(self, X=None, y=None):
        """Negative absolute relative rate error of the calibrated trial."""
        check_is_fitted(self, "result_")
        return -abs(self.relative_error_)


__all__ = [
    "BETA_OFF_BOUNDS",
    "CalibrationResult",
    "IterationRecord",
    "LoadCalibrator",
    "PhiValue",
    "alpha_off_from_phi",
    "calibrate",
    "compute_phi",
    "feasible_alpha_on_range",
    "framed_bits_per_packet",
    "mean_payload_bytes",
    "phi_from_shapes",
    "population_payload_bytes",
    "solve_alpha_off",
]

