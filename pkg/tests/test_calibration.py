import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from selfsim import calibration
from selfsim.calibration import (
    BETA_OFF_BOUNDS,
    LoadCalibrator,
    PhiValue,
    alpha_off_from_phi,
    calibrate,
    compute_phi,
    feasible_alpha_on_range,
    framed_bits_per_packet,
    mean_payload_bytes,
    phi_from_shapes,
    population_payload_bytes,
    solve_alpha_off,
)
from selfsim.exceptions import (
    InfeasibleTargetError,
    NonConvergenceError,
    OutOfRangeError,
    ParameterDomainError,
)
from selfsim.source_model import SIZE_PER_PACKET, draw_packet_size


def test_mean_payload():
    assert mean_payload_bytes() == 791 == (64 + 1518) // 2
    assert framed_bits_per_packet() == 811 * 8


def test_population_payload():
    sizes = [draw_packet_size(3, i) for i in range(10)]
    assert population_payload_bytes(3, 10) == pytest.approx(sum(sizes) / 10)


class TestPhi:
    def test_hand_example(self):
        phi = compute_phi(10, 1, 1.0, 1e6, 1e9)
        assert phi.phi == pytest.approx(10 * 6488 / 1e6 - 6488 / 1e9, rel=1e-14)
        assert phi.phi == pytest.approx(0.0648735, abs=1e-7)

    def test_doubling_beta_off_halves(self):
        a = compute_phi(32, 1, 1e-3, 1e7, 1e8).phi
        b = compute_phi(32, 1, 2e-3, 1e7, 1e8).phi
        assert b == pytest.approx(a / 2, rel=1e-14)

    def test_infeasible(self):
        # N*S/r == S/R when r = N*R
        with pytest.raises(InfeasibleTargetError):
            compute_phi(2, 1, 1e-3, 2e8, 1e8)
        with pytest.raises(InfeasibleTargetError):
            compute_phi(1, 1, 1e-3, 2e8, 1e8)

    def test_nonpositive_args(self):
        with pytest.raises(ParameterDomainError):
            compute_phi(0, 1, 1e-3, 1e6, 1e8)

    def test_phi_value_guard(self):
        with pytest.raises(InfeasibleTargetError):
            PhiValue(0.0)
        assert float(PhiValue(1.5)) == 1.5

    def test_payload_override(self):
        s = (500 + 20) * 8
        assert compute_phi(4, 1, 1.0, 1e6, 1e8, payload_bytes=500).phi == pytest.approx(
            4 * s / 1e6 - s / 1e8, rel=1e-14)


class TestSolve:
    def test_boundary_example(self):
        assert solve_alpha_off(2.0, 2.0) == pytest.approx(4 / 3, rel=1e-15)
        assert phi_from_shapes(2.0, 4 / 3) == pytest.approx(2.0, rel=1e-15)

    def test_limit_near_one(self):
        assert solve_alpha_off(1 + 1e-9, 0.7) == pytest.approx(1.0, abs=1e-8)

    def test_lower_bound(self):
        with pytest.raises(OutOfRangeError) as info:
            solve_alpha_off(1.0, 2.0)
        assert info.value.bound == "lower"

    def test_upper_bound(self):
        with pytest.raises(OutOfRangeError) as info:
            solve_alpha_off(1.5, 0.5)  # hi = 4/3
        assert info.value.bound == "upper"
        with pytest.raises(OutOfRangeError):
            solve_alpha_off(2.1, 5.0)


class TestFeasibleRange:
    @pytest.mark.parametrize("phi,hi", [(2.0, 2.0), (0.5, 4 / 3), (1.9, 2.0), (10.0, 2.0), (1.0, 2.0)])
    def test_examples(self, phi, hi):
        lo, got = feasible_alpha_on_range(phi)
        assert lo == 1.0 and got == pytest.approx(hi, rel=1e-15)

    def test_positive_phi_required(self):
        with pytest.raises(ParameterDomainError):
            feasible_alpha_on_range(0.0)


@given(phi=st.floats(0.1, 10.0), frac=st.floats(0.01, 0.99))
@settings(max_examples=300, deadline=None)
def test_round_trip_property(phi, frac):
    lo, hi = feasible_alpha_on_range(phi)
    a_on = lo + frac * (hi - lo)
    a_off = solve_alpha_off(a_on, phi)
    assert 1 < a_off < 2
    assert phi_from_shapes(a_on, a_off) == pytest.approx(phi, rel=1e-12)


@given(phi=st.floats(0.1, 10.0), frac=st.floats(1e-9, 1 - 1e-9))
@settings(max_examples=300, deadline=None)
def test_round_trip_near_edges(phi, frac):
    # alpha_off - 1 loses digits as alpha_on -> 1; the error is bounded by that cancellation
    lo, hi = feasible_alpha_on_range(phi)
    a_on = lo + frac * (hi - lo)
    a_off = solve_alpha_off(a_on, phi)
    assert 1 < a_off <= 2
    eps = 2.0**-52
    bound = 1e-12 + 8 * eps * (1 / (a_on - 1) + 1 / (a_off - 1))
    assert abs(phi_from_shapes(a_on, a_off) - phi) <= bound * phi


@given(phi=st.floats(0.1, 1.99))
@settings(max_examples=200, deadline=None)
def test_interval_is_tight(phi):
    lo, hi = feasible_alpha_on_range(phi)
    if hi < 2:
        assert not 1 < alpha_off_from_phi(hi + 1e-6, phi) < 2
        assert 1 < alpha_off_from_phi(hi - 1e-6, phi) < 2


def _fake_rate(monkeypatch, fn):
    monkeypatch.setattr(calibration, "achieved_bit_rate", fn)


FAST = dict(target_rate=1e6, link_rate=1e8, alpha_on=1.6, packet_budget=200,
            n_sources=4, beta_off=1e-2)


class TestLoop:
    def test_on_target_first_trial(self, monkeypatch):
        _fake_rate(monkeypatch, lambda t: 1e6)
        res = calibrate(**FAST)
        assert res.iterations == 1 and len(res.history) == 1
        assert res.config.n_sources == 4 and res.config.beta_off == 1e-2
        assert res.config.alpha_on == 1.6 and res.relative_error == 0.0

    def test_low_rate_shrinks_beta_then_raises_n(self, monkeypatch):
        _fake_rate(monkeypatch, lambda t: 0.5e6)
        with pytest.raises(NonConvergenceError) as info:
            calibrate(**FAST, max_iterations=20)
        hist = info.value.history
        assert len(hist) == 20
        betas = [h.beta_off for h in hist]
        clamp = next(i for i, b in enumerate(betas) if b == BETA_OFF_BOUNDS[0])
        assert all(b1 < b0 for b0, b1 in zip(betas[:clamp], betas[1:clamp + 1]))
        assert all(h.n_sources == 4 for h in hist[:clamp])
        assert hist[clamp].n_sources == 8
        assert all(h.alpha_on == 1.6 for h in hist)

    def test_high_rate_clamps_top_and_lowers_n(self, monkeypatch):
        _fake_rate(monkeypatch, lambda t: 4e6)
        with pytest.raises(NonConvergenceError) as info:
            calibrate(**dict(FAST, beta_off=5.0, n_sources=64), max_iterations=3)
        hist = info.value.history
        assert [h.beta_off for h in hist] == [5.0, 10.0, 10.0]
        assert [h.n_sources for h in hist] == [64, 16, 4]

    def test_single_iteration_failure(self, monkeypatch):
        _fake_rate(monkeypatch, lambda t: 3e6)
        with pytest.raises(NonConvergenceError) as info:
            calibrate(**FAST, max_iterations=1)
        assert len(info.value.history) == 1

    def test_infeasible_target(self):
        with pytest.raises(InfeasibleTargetError):
            calibrate(**dict(FAST, target_rate=1e8, n_sources=1))

    @pytest.mark.parametrize("kw", [dict(tolerance=0), dict(max_iterations=0), dict(alpha_on=2.0)])
    def test_bad_arguments(self, kw):
        with pytest.raises(ParameterDomainError):
            calibrate(**{**FAST, **kw})

    def test_infeasible_alpha_on_uses_midpoint(self, monkeypatch):
        _fake_rate(monkeypatch, lambda t: 1e6)
        # N=1 with a large beta_off gives a small phi and a narrow interval
        res = calibrate(**dict(FAST, n_sources=1, beta_off=0.02))
        lo, hi = feasible_alpha_on_range(res.history[0].phi)
        assert hi < 1.6
        assert res.config.alpha_on == pytest.approx((lo + hi) / 2)

    def test_real_run(self):
        res = calibrate(1e6, 1e8, 1.6, tolerance=0.05, packet_budget=20_000, n_sources=4,
                        beta_off=1e-2, master_seed=3)
        assert abs(res.relative_error) <= 0.05
        for h in res.history:
            assert phi_from_shapes(h.alpha_on, h.alpha_off) == pytest.approx(h.phi, rel=1e-12)
            direct = compute_phi(h.n_sources, 1, h.beta_off, 1e6, 1e8, h.payload_bytes).phi
            assert h.phi == direct
        assert len({h.seed for h in res.history}) == len(res.history)
        assert res.config.size_seed == 3
        assert res.config.master_seed == res.history[-1].seed

    def test_reproducible(self):
        a = calibrate(**dict(FAST, packet_budget=2000), master_seed=5, tolerance=0.1)
        b = calibrate(**dict(FAST, packet_budget=2000), master_seed=5, tolerance=0.1)
        assert a.history == b.history

    def test_per_packet_uses_791(self, monkeypatch):
        _fake_rate(monkeypatch, lambda t: 1e6)
        res = calibrate(**FAST, size_policy=SIZE_PER_PACKET)
        assert res.history[0].payload_bytes == 791


class TestEstimator:
    def test_params_and_clone(self):
        est = LoadCalibrator(target_rate=2e6, n_sources=8)
        params = est.get_params()
        assert params["target_rate"] == 2e6 and params["n_sources"] == 8
        assert clone(est).get_params() == params

    def test_fit_and_generate(self):
        est = LoadCalibrator(target_rate=1e6, link_rate=1e8, n_sources=4, beta_off=1e-2,
                             packet_budget=5000, tolerance=0.2, master_seed=1).fit()
        assert est.n_iter_ == len(est.history_)
        assert est.score() == -abs(est.relative_error_)
        assert len(est.generate(packet_budget=123)) == 123
        a = est.generate(packet_budget=100, master_seed=9)
        b = est.generate(packet_budget=100, master_seed=9)
        assert list(a) == list(b)
