import numpy as np
import pytest

from nfsec import bcd, metrics
from nfsec.errors import NumericalError

from conftest import random_whitened_pair


def random_design(rng, n, k, power):
    w = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    scale = np.sqrt(power / (np.sum(np.abs(w) ** 2) + np.sum(np.abs(v) ** 2)))
    return w * scale, v * scale


def random_curvature(rng, n, k, scale=1.0):
    """Standalone PSD curvature system, independent of any channel."""
    ga = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    fe = rng.standard_normal((n, 1)) + 1j * rng.standard_normal((n, 1))
    a = scale * (ga @ ga.conj().T) / n
    f_eve = scale * (fe @ fe.conj().T) / n
    b = a + f_eve
    r_w = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    r_v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return bcd.CurvatureSystem(a, b, r_w, r_v, 0.0, a, f_eve,
                               np.zeros_like(a))


def test_eve_auxiliary_weight_identity():
    # the scalar weight equals one plus the received AN power
    rng = np.random.default_rng(11)
    for _ in range(25):
        _, h_eve = random_whitened_pair(rng, 3, 3, 5)
        v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        _, q_eve = bcd.update_eve_aux(h_eve, v)
        want = 1.0 + np.sum(np.abs(h_eve @ v) ** 2)
        assert q_eve == pytest.approx(want, rel=1e-10)


def test_bob_receiver_solves_normal_equations():
    rng = np.random.default_rng(12)
    h_bob, _ = random_whitened_pair(rng, 4, 4, 6)
    w, v = random_design(rng, 6, 2, 5.0)
    u, q = bcd.update_bob_aux(h_bob, w, v)
    hv = h_bob @ v
    hw = h_bob @ w
    j = np.eye(4) + np.outer(hv, hv.conj())
    assert np.allclose((j + hw @ hw.conj().T) @ u, hw, atol=1e-12)
    want_q = np.eye(2) + hw.conj().T @ np.linalg.solve(j, hw)
    assert np.allclose(q, want_q, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(q) > 0)


def test_z_auxiliary_is_exact_inverse():
    rng = np.random.default_rng(13)
    _, h_eve = random_whitened_pair(rng, 3, 3, 5)
    w, v = random_design(rng, 5, 2, 3.0)
    q_z = bcd.update_z_aux(h_eve, w, v)
    t = np.column_stack([w, v])
    gz = np.eye(3) + h_eve @ t @ t.conj().T @ h_eve.conj().T
    assert np.allclose(q_z @ gz, np.eye(3), atol=1e-10)


def test_surrogate_tight_at_fresh_auxiliaries():
    rng = np.random.default_rng(14)
    worst = 0.0
    for _ in range(60):
        n = rng.integers(3, 8)
        h_bob, h_eve = random_whitened_pair(rng, 3, 2, n)
        w, v = random_design(rng, n, 2, 4.0)
        aux = bcd.auxiliary_state(h_bob, h_eve, w, v)
        curv = bcd.build_curvature(h_bob, h_eve, aux)
        got = bcd.surrogate_value(curv, w, v)
        want = metrics.rate_bob(h_bob, w, v) - metrics.rate_eve(h_eve, w, v)
        worst = max(worst, abs(got - want))
    assert worst < 1e-9


def test_surrogate_lower_bounds_objective_elsewhere():
    # auxiliaries frozen at one design must minorize every other design
    rng = np.random.default_rng(15)
    for _ in range(40):
        h_bob, h_eve = random_whitened_pair(rng, 3, 3, 6)
        w0, v0 = random_design(rng, 6, 2, 4.0)
        w1, v1 = random_design(rng, 6, 2, 4.0)
        curv = bcd.build_curvature(
            h_bob, h_eve, bcd.auxiliary_state(h_bob, h_eve, w0, v0))
        bound = bcd.surrogate_value(curv, w1, v1)
        actual = (metrics.rate_bob(h_bob, w1, v1)
                  - metrics.rate_eve(h_eve, w1, v1))
        assert bound <= actual + 1e-9


def test_curvature_matrices_are_psd():
    rng = np.random.default_rng(16)
    h_bob, h_eve = random_whitened_pair(rng, 4, 4, 7)
    w, v = random_design(rng, 7, 3, 2.0)
    curv = bcd.build_curvature(
        h_bob, h_eve, bcd.auxiliary_state(h_bob, h_eve, w, v))
    for m in (curv.a, curv.b, curv.f_bob, curv.f_eve, curv.c_leak):
        assert np.linalg.eigvalsh(m).min() > -1e-10 * np.linalg.norm(m, 2)
    # the AN curvature exceeds the precoder curvature by a rank-one term
    assert np.linalg.matrix_rank(curv.b - curv.a, tol=1e-12) == 1


def test_waterfill_hits_budget_from_below():
    rng = np.random.default_rng(17)
    for trial in range(30):
        curv = random_curvature(rng, 6, 2)
        budget = 10.0 ** rng.uniform(-3, 2)
        res = bcd.waterfill(curv, budget)
        assert res.delivered_power_w <= budget * (1 + 1e-12)
        if res.lam > 0:
            assert res.delivered_power_w >= budget * (1 - 1e-8)


def test_waterfill_slack_budget_keeps_multiplier_zero():
    rng = np.random.default_rng(18)
    curv = random_curvature(rng, 5, 2, scale=50.0)
    res = bcd.waterfill(curv, 1e9)
    assert res.lam == 0.0
    assert res.delivered_power_w < 1e9


def test_waterfill_kkt_stationarity():
    # at the solution, the curvature gradient is a pure power price
    rng = np.random.default_rng(19)
    for _ in range(20):
        curv = random_curvature(rng, 6, 3)
        res = bcd.waterfill(curv, 2.5)
        grad_w = curv.a @ res.w - curv.r_w
        grad_v = curv.b @ res.v - curv.r_v
        assert np.allclose(grad_w, -res.lam * res.w,
                           atol=1e-9 * max(1.0, res.lam))
        assert np.allclose(grad_v, -res.lam * res.v,
                           atol=1e-9 * max(1.0, res.lam))


def test_waterfill_row_energy_tracks_gradient_norm():
    # per-row gradient norms are the row energies scaled by the price
    rng = np.random.default_rng(20)
    curv = random_curvature(rng, 7, 2)
    res = bcd.waterfill(curv, 1.0)
    assert res.lam > 0
    t = np.column_stack([res.w, res.v])
    grads = np.column_stack([curv.a @ res.w - curv.r_w,
                             curv.b @ res.v - curv.r_v])
    row_grad = np.linalg.norm(grads, axis=1)
    row_energy = np.linalg.norm(t, axis=1)
    assert np.allclose(row_grad, res.lam * row_energy, rtol=1e-6)


def test_waterfill_agrees_with_grid_oracle():
    # independent eigenbasis power curve, swept on a dense multiplier grid
    rng = np.random.default_rng(21)
    for _ in range(20):
        curv = random_curvature(rng, 5, 2)
        budget = 1.0
        res = bcd.waterfill(curv, budget)
        if res.lam == 0.0:
            continue
        xi_a, za = np.linalg.eigh(curv.a)
        xi_b, zb = np.linalg.eigh(curv.b)
        wa = np.sum(np.abs(za.conj().T @ curv.r_w) ** 2, axis=1)
        wb = np.abs(zb.conj().T @ curv.r_v) ** 2

        def power(lam):
            return (np.sum(wa / (np.clip(xi_a, 0, None) + lam) ** 2)
                    + np.sum(wb / (np.clip(xi_b, 0, None) + lam) ** 2))

        hi = 1.0
        while power(hi) > budget:
            hi *= 2.0
        grid = np.linspace(0.0, hi, 100_000)[1:]
        denom_a = np.clip(xi_a, 0, None)[:, None] + grid[None, :]
        denom_b = np.clip(xi_b, 0, None)[:, None] + grid[None, :]
        curve = (wa @ (1.0 / denom_a ** 2) + wb @ (1.0 / denom_b ** 2))
        assert np.all(np.diff(curve) < 0)  # strictly decreasing
        lam_grid = grid[np.argmin(np.abs(curve - budget))]
        step = grid[1] - grid[0]
        assert abs(res.lam - lam_grid) <= max(1e-4 * lam_grid, 1.01 * step)


def test_solve_primal_residual():
    rng = np.random.default_rng(22)
    curv = random_curvature(rng, 5, 2)
    lam = 0.7
    w, v = bcd.solve_primal(curv, lam)
    assert np.allclose((curv.a + lam * np.eye(5)) @ w, curv.r_w, atol=1e-10)
    assert np.allclose((curv.b + lam * np.eye(5)) @ v, curv.r_v, atol=1e-10)
    assert np.isfinite(bcd.dual_value(curv, lam, 1.0))


def test_waterfill_rejects_bad_budget():
    rng = np.random.default_rng(23)
    curv = random_curvature(rng, 4, 1)
    with pytest.raises(NumericalError):
        bcd.waterfill(curv, 0.0)


def test_rotation_dictionary_is_unitary_and_stable():
    mats = bcd.rotation_dictionary(4)
    assert len(mats) == 10
    for m in mats:
        assert np.allclose(m.conj().T @ m, np.eye(4), atol=1e-12)
    again = bcd.rotation_dictionary(4)
    for m1, m2 in zip(mats, again):
        assert np.array_equal(m1, m2)


def test_balance_streams_preserves_covariance_and_rate():
    rng = np.random.default_rng(24)
    h_bob, h_eve = random_whitened_pair(rng, 4, 4, 6)
    w, v = random_design(rng, 6, 4, 8.0)
    balanced, omega, ratio = bcd.balance_streams(w)
    cov_before = w @ w.conj().T
    cov_after = balanced @ balanced.conj().T
    assert np.linalg.norm(cov_after - cov_before) < 1e-10
    r_before = metrics.rate_bob(h_bob, w, v) - metrics.rate_eve(h_eve, w, v)
    r_after = (metrics.rate_bob(h_bob, balanced, v)
               - metrics.rate_eve(h_eve, balanced, v))
    assert abs(r_after - r_before) < 1e-9
    assert ratio <= bcd.stream_power_ratio(w) + 1e-12
    assert np.allclose(omega.conj().T @ omega, np.eye(4), atol=1e-12)


def test_balance_streams_spreads_single_active_column():
    # all power in one stream: the orthonormal DFT spreads it exactly
    rng = np.random.default_rng(25)
    w = np.zeros((6, 4), dtype=complex)
    w[:, 0] = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    balanced, _, ratio = bcd.balance_streams(w)
    powers = np.sum(np.abs(balanced) ** 2, axis=0)
    assert ratio == pytest.approx(1.0, rel=1e-9)
    assert np.allclose(powers, powers[0])


def test_balance_streams_keeps_identity_when_already_flat():
    w = np.diag([1.0, 1.0, 1.0]).astype(complex)
    balanced, omega, ratio = bcd.balance_streams(w)
    assert np.array_equal(omega, np.eye(3))
    assert np.array_equal(balanced, w)
    assert ratio == pytest.approx(1.0)


def test_random_init_spends_budget_exactly():
    rng = np.random.default_rng(26)
    w, v = bcd.random_init(rng, 8, 3, 0.25)
    total = np.sum(np.abs(w) ** 2) + np.sum(np.abs(v) ** 2)
    assert total == pytest.approx(0.25, rel=1e-12)
    w2, v2 = bcd.random_init(rng, 8, 3, 0.25, with_an=False)
    assert np.all(v2 == 0)
    assert np.sum(np.abs(w2) ** 2) == pytest.approx(0.25, rel=1e-12)


def test_bcd_objective_trace_is_monotone():
    rng = np.random.default_rng(27)
    h_bob, h_eve = random_whitened_pair(rng, 3, 3, 6, scale=2.0)
    res = bcd.bcd_optimize(h_bob, h_eve, 4.0, num_streams=2, rng=rng,
                           options=bcd.BcdOptions(max_iters=80, tol_rel=0.0))
    obj = np.array(res.trace.objective_bits)
    drops = np.diff(obj)
    assert drops.min(initial=0.0) > -1e-8 * max(1.0, np.abs(obj).max())
    assert not res.trace.diverged
    # each surrogate evaluation minorizes the objective it produced
    sur = np.array(res.trace.surrogate_bits)
    assert np.all(sur <= obj + 1e-9)


def test_bcd_respects_power_budget():
    rng = np.random.default_rng(28)
    h_bob, h_eve = random_whitened_pair(rng, 3, 3, 5)
    res = bcd.bcd_optimize(h_bob, h_eve, 0.5, num_streams=2, rng=rng)
    total = np.sum(np.abs(res.w) ** 2) + np.sum(np.abs(res.v) ** 2)
    assert total <= 0.5 * (1 + 1e-9)
    metrics.BeamformerState(res.w, res.v, 0.5)  # must not raise


def test_bcd_an_disabled_keeps_an_zero():
    rng = np.random.default_rng(29)
    h_bob, h_eve = random_whitened_pair(rng, 3, 3, 5)
    res = bcd.bcd_optimize(h_bob, h_eve, 1.0, num_streams=2, rng=rng,
                           options=bcd.BcdOptions(enable_an=False))
    assert np.all(res.v == 0)


def test_bcd_accepts_warm_start_and_reports_rotation():
    rng = np.random.default_rng(30)
    h_bob, h_eve = random_whitened_pair(rng, 3, 3, 5)
    init = bcd.random_init(rng, 5, 2, 1.0)
    res = bcd.bcd_optimize(h_bob, h_eve, 1.0, init=init)
    assert res.iterations >= 1
    assert res.rotation is not None
    res2 = bcd.bcd_optimize(h_bob, h_eve, 1.0, init=init)
    assert res2.secrecy_bits == res.secrecy_bits  # fully deterministic


def test_bcd_requires_rng_or_init():
    rng = np.random.default_rng(31)
    h_bob, h_eve = random_whitened_pair(rng, 2, 2, 4)
    with pytest.raises(ValueError):
        bcd.bcd_optimize(h_bob, h_eve, 1.0)
