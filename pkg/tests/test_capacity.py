import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from malab.capacity import (
    bc_sum_capacity,
    dpc_rates,
    iwf_mac,
    mac_sic_corner,
    mac_sum_rate,
    oma_region,
    scalar_bc_rates,
    scalar_bc_region,
    scalar_mac_region_contains,
    simplex_grid,
    water_filling,
)
from malab.foundation import ConvergenceError, log2det, shannon_rate


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_psd(rng, n, trace):
    m = crandn(rng, n, n)
    s = m @ m.conj().T
    return s * trace / np.trace(s).real


# scalar broadcast -------------------------------------------------------------

def test_bc_single_user():
    region = scalar_bc_region(3.0, [1.0])
    np.testing.assert_allclose(region.points, [[2.0]])


def test_bc_corner():
    rates = scalar_bc_rates([1.0, 0.0], 10.0, [1.0, 5.0])
    np.testing.assert_allclose(rates, [shannon_rate(10.0), 0.0])


def test_bc_rejects_unsorted_noise():
    with pytest.raises(ValueError, match="sorted"):
        scalar_bc_region(10.0, [5.0, 1.0])


def test_bc_region_dominates_tdma():
    region = scalar_bc_region(10.0, [1.0, 5.0], resolution=201)
    for t in np.linspace(0, 1, 101):
        tdma = (t * shannon_rate(10.0), (1 - t) * shannon_rate(2.0))
        assert region.dominates(tdma)


def test_bc_three_user_lattice():
    alphas = simplex_grid(3, 11)
    assert len(alphas) == 66
    np.testing.assert_allclose(alphas.sum(axis=1), 1.0)
    region = scalar_bc_region(10.0, [1.0, 2.0, 4.0], resolution=101)
    oma = oma_region(10.0, [1.0, 2.0, 4.0], resolution=11)
    for point in oma.points:
        assert region.dominates(point)


@given(st.integers(2, 4), st.integers(0, 3), st.integers(0, 3), st.integers(0, 10_000))
def test_bc_rates_monotone_in_power_share(k, i, j, seed):
    i, j = i % k, j % k
    if i == j:
        return
    rng = np.random.default_rng(seed)
    noise = np.sort(rng.uniform(0.1, 5.0, k))
    alpha = rng.dirichlet(np.ones(k))
    delta = 0.5 * alpha[j]
    if delta < 1e-6:
        return
    moved = alpha.copy()
    moved[i] += delta
    moved[j] -= delta
    before, after = scalar_bc_rates(alpha, 10.0, noise), scalar_bc_rates(moved, 10.0, noise)
    assert after[i] > before[i]
    for later in range(i + 1, k):
        if later != j:
            assert after[later] <= before[later] + 1e-12


# scalar multiple access -------------------------------------------------------

def test_mac_membership_basics():
    assert scalar_mac_region_contains([1.0, 2.0], 1.0, [0.0, 0.0])
    assert not scalar_mac_region_contains([1.0, 2.0], 1.0, [shannon_rate(1.0) + 1e-9, 0.0])


def test_mac_sic_corner_membership():
    p1, p2, n = 2.0, 3.0, 0.5
    corner = np.array([shannon_rate(p1 / (n + p2)), shannon_rate(p2 / n)])
    assert scalar_mac_region_contains([p1, p2], n, corner, tol=1e-12)
    for axis in range(2):
        bumped = corner.copy()
        bumped[axis] += 1e-9
        assert not scalar_mac_region_contains([p1, p2], n, bumped)


def test_mac_membership_zero_power_user():
    assert scalar_mac_region_contains([1.0, 0.0], 1.0, [0.5, 0.0])
    assert not scalar_mac_region_contains([1.0, 0.0], 1.0, [0.5, 0.1])


def test_mac_membership_user_limit():
    with pytest.raises(ValueError):
        scalar_mac_region_contains(np.ones(21), 1.0, np.zeros(21))


def test_uplink_oma_inside_mac_region():
    powers, noise = np.array([1.0, 4.0, 2.0]), 0.7
    oma = oma_region(powers, noise, resolution=21, link="uplink")
    for point in oma.points:
        assert scalar_mac_region_contains(powers, noise, point, tol=1e-9)


def test_oma_corner_and_symmetry():
    region = oma_region(10.0, [1.0, 1.0], resolution=3)
    np.testing.assert_allclose(region.points[2], [shannon_rate(10.0), 0.0])
    assert region.points[1][0] == pytest.approx(region.points[1][1])


# vector multiple access ------------------------------------------------------

def test_sic_corner_single_user():
    rng = np.random.default_rng(3)
    h = crandn(rng, 4, 2)
    s = random_psd(rng, 2, 3.0)
    rates = mac_sic_corner([h], [s], 0.5)
    assert rates[0] == pytest.approx(log2det(np.eye(4) + h @ s @ h.conj().T / 0.5), rel=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_sic_corner_sum_invariant(seed):
    rng = np.random.default_rng(seed)
    hs = [crandn(rng, 4, 2) for _ in range(4)]
    ss = [random_psd(rng, 2, rng.uniform(0.5, 3)) for _ in range(4)]
    total = mac_sum_rate(hs, ss, 0.8)
    for order in itertools.permutations(range(4)):
        assert mac_sic_corner(hs, ss, 0.8, order).sum() == pytest.approx(total, abs=1e-12)


def test_sic_corner_zero_covariance_user():
    rng = np.random.default_rng(8)
    hs = [crandn(rng, 3, 2) for _ in range(3)]
    ss = [random_psd(rng, 2, 1.0) for _ in range(3)]
    ss[1] = np.zeros((2, 2))
    full = mac_sic_corner(hs, ss, 1.0, [0, 1, 2])
    reduced = mac_sic_corner([hs[0], hs[2]], [ss[0], ss[2]], 1.0, [0, 1])
    assert full[1] == 0.0
    np.testing.assert_allclose(full[[0, 2]], reduced, atol=1e-13)


def test_sic_corner_rejects_indefinite_covariance():
    with pytest.raises(ValueError):
        mac_sic_corner([np.ones((2, 2))], [np.diag([1.0, -1.0])], 1.0)


def test_water_filling_closed_form():
    p, level = water_filling([2.0, 1.0, 0.1], 1.0)
    # level 1.25 fills the first two channels only
    np.testing.assert_allclose(p, [0.75, 0.25, 0.0])
    assert level == pytest.approx(1.25)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8), st.floats(1e-3, 100))
def test_water_filling_kkt(gains, budget):
    gains = np.asarray(gains)
    p, level = water_filling(gains, budget)
    assert p.sum() == pytest.approx(budget, rel=1e-12)
    on = p > 0
    np.testing.assert_allclose(p[on] + 1 / gains[on], level, rtol=1e-9)
    assert np.all(1 / gains[~on] >= level * (1 - 1e-9))


def test_iwf_single_user_is_water_filling():
    rng = np.random.default_rng(2)
    h = crandn(rng, 3, 3)
    res = iwf_mac([h], [2.0], 0.5)
    g = np.linalg.eigvalsh(h.conj().T @ h) / 0.5
    p, _ = water_filling(g, 2.0)
    assert res.sum_capacity == pytest.approx(np.sum(np.log2(1 + g * p)), abs=1e-9)


def test_iwf_orthogonal_users_full_power():
    h1, h2 = np.array([[1.5], [0]]), np.array([[0], [0.7j]])
    res = iwf_mac([h1, h2], [2.0, 3.0], 0.5)
    expected = shannon_rate(2.0 * 2.25 / 0.5) + shannon_rate(3.0 * 0.49 / 0.5)
    assert res.sum_capacity == pytest.approx(expected, abs=1e-12)
    assert np.trace(res.covariances[0]).real == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_iwf_two_user_miso_grid_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    hs = [crandn(rng, 2, 1) for _ in range(2)]
    budgets = rng.uniform(0.5, 5, 2)
    res = iwf_mac(hs, budgets, 1.0)
    best = max(
        log2det(np.eye(2) + a * budgets[0] * hs[0] @ hs[0].conj().T
                + b * budgets[1] * hs[1] @ hs[1].conj().T)
        for a in np.linspace(0, 1, 101) for b in np.linspace(0, 1, 101)
    )
    assert abs(res.sum_capacity - best) < 1e-3
    assert res.sum_capacity >= best - 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4), st.integers(1, 3))
def test_iwf_monotone_budgets_and_kkt(seed, k, nk):
    rng = np.random.default_rng(seed)
    hs = [crandn(rng, 3, nk) for _ in range(k)]
    budgets = rng.uniform(0.1, 10, k)
    res = iwf_mac(hs, budgets, 0.3)
    assert np.all(np.diff(res.history) >= -1e-12)
    for s, p in zip(res.covariances, budgets):
        assert np.trace(s).real == pytest.approx(p, abs=1e-9)
        assert np.linalg.eigvalsh(s).min() > -1e-12
    assert res.kkt_residual < 1e-6


def test_iwf_zero_budget_user_reinserted():
    rng = np.random.default_rng(4)
    hs = [crandn(rng, 2, 2) for _ in range(3)]
    res = iwf_mac(hs, [1.0, 0.0, 2.0], 1.0)
    ref = iwf_mac([hs[0], hs[2]], [1.0, 2.0], 1.0)
    assert np.all(res.covariances[1] == 0)
    assert res.sum_capacity == pytest.approx(ref.sum_capacity, abs=1e-10)


def test_iwf_reports_non_convergence():
    rng = np.random.default_rng(5)
    hs = [crandn(rng, 3, 2) for _ in range(3)]
    with pytest.raises(ConvergenceError):
        iwf_mac(hs, [1.0, 1.0, 1.0], 1.0, max_iter=1)


# broadcast with dirty-paper coding -----------------------------------------------

def test_dpc_single_user():
    rng = np.random.default_rng(6)
    h = crandn(rng, 4, 2)
    x = random_psd(rng, 4, 2.0)
    rate = dpc_rates([h], [x], 0.5)[0]
    assert rate == pytest.approx(log2det(np.eye(2) + h.conj().T @ x @ h / 0.5), rel=1e-13)


def test_dpc_last_encoded_user_sees_only_noise():
    rng = np.random.default_rng(7)
    hs = [crandn(rng, 3, 1) for _ in range(3)]
    xs = [random_psd(rng, 3, 1.0) for _ in range(3)]
    rates = dpc_rates(hs, xs, [0.5, 1.0, 2.0], order=[2, 0, 1])
    h = hs[1]
    assert rates[1] == pytest.approx(np.log2(1 + (h.conj().T @ xs[1] @ h).real.item() / 1.0), rel=1e-13)


def test_dpc_budget_violation():
    with pytest.raises(ValueError):
        dpc_rates([np.ones((2, 1))], [np.eye(2)], 1.0, power=1.0)


@pytest.mark.parametrize("seed", range(5))
def test_bc_sum_capacity_two_user_miso_grid(seed):
    rng = np.random.default_rng(200 + seed)
    hs = [crandn(rng, 3, 1) for _ in range(2)]
    noise = rng.uniform(0.5, 2, 2)
    power = rng.uniform(1, 10)
    cap = bc_sum_capacity(hs, noise, power).value
    gs = [h / np.sqrt(s) for h, s in zip(hs, noise)]
    best = max(
        log2det(np.eye(3) + a * power * gs[0] @ gs[0].conj().T + (1 - a) * power * gs[1] @ gs[1].conj().T)
        for a in np.linspace(0, 1, 101)
    )
    assert cap >= best - 1e-9
    assert cap - best < 1e-3
    mrt = max(shannon_rate(power * np.vdot(h, h).real / s) for h, s in zip(hs, noise))
    assert cap >= mrt - 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_dpc_never_exceeds_sum_capacity(seed):
    rng = np.random.default_rng(300 + seed)
    hs = [crandn(rng, 3, 2) for _ in range(3)]
    noise = rng.uniform(0.5, 2, 3)
    cap = bc_sum_capacity(hs, noise, 4.0).value
    for _ in range(20):
        xs = [random_psd(rng, 3, 1.0) for _ in range(3)]
        shares = rng.dirichlet(np.ones(3)) * 4.0
        xs = [x * s for x, s in zip(xs, shares)]
        for order in itertools.permutations(range(3)):
            assert dpc_rates(hs, xs, noise, order, power=4.0).sum() <= cap + 1e-9


def test_bc_sum_capacity_monotone_history():
    rng = np.random.default_rng(9)
    hs = [crandn(rng, 4, 2) for _ in range(3)]
    res = bc_sum_capacity(hs, [1.0, 0.5, 2.0], 5.0)
    assert np.all(np.diff(res.history) >= -1e-12)
    assert sum(np.trace(q).real for q in res.mac_covariances) == pytest.approx(5.0, rel=1e-9)
