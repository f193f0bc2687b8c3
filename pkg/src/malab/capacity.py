"""Capacity regions and sum capacities of Gaussian multiple-access and
broadcast channels.

Scalar channels are described by powers and noise powers; vector channels by
a list of ``N_BS x N_k`` channel matrices, one per user.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .foundation import ConvergenceError, log2det, shannon_rate

__all__ = [
    "RateRegion",
    "IwfResult",
    "simplex_grid",
    "scalar_bc_rates",
    "scalar_bc_region",
    "scalar_mac_region_contains",
    "oma_region",
    "mac_sic_corner",
    "mac_sum_rate",
    "water_filling",
    "iwf_mac",
    "dpc_rates",
    "bc_sum_capacity",
]


@dataclass(frozen=True)
class RateRegion:
    """Sampled rate tuples (one row per point) with optional labels."""

    points: np.ndarray
    labels: tuple = ()

    @property
    def n_users(self) -> int:
        return self.points.shape[1]

    def dominates(self, candidate, tol=0.0) -> bool:
        """True if some sampled point is coordinate-wise at least ``candidate``."""
        candidate = np.asarray(candidate, dtype=float)
        return bool(np.any(np.all(self.points >= candidate - tol, axis=1)))


def simplex_grid(n_users: int, resolution: int) -> np.ndarray:
    """Points of the probability simplex with ``resolution`` values per axis.

    Two users give ``alpha_1 = linspace(0, 1, resolution)``; larger systems
    use the lattice of compositions of ``resolution - 1`` steps.
    """
    if resolution < 2:
        raise ValueError("need at least two grid points per axis")
    if n_users == 1:
        return np.ones((1, 1))
    if n_users == 2:
        a = np.linspace(0.0, 1.0, resolution)
        return np.column_stack([a, 1.0 - a])
    steps = resolution - 1
    rows = []
    for bars in itertools.combinations(range(steps + n_users - 1), n_users - 1):
        edges = (-1,) + bars + (steps + n_users - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(n_users)])
    return np.asarray(rows, dtype=float) / steps


def _check_sorted_noise(noise):
    noise = np.asarray(noise, dtype=float)
    if np.any(noise <= 0):
        raise ValueError("noise powers must be positive")
    if np.any(np.diff(noise) < 0):
        raise ValueError("noise powers must be sorted in ascending order (strongest user first)")
    return noise


def scalar_bc_rates(alpha, power, noise) -> np.ndarray:
    """Superposition-coding rates of a degraded scalar broadcast channel.

    User ``k`` cancels the messages of all weaker users and treats the
    power of the stronger users ``k' < k`` as noise.
    """
    noise = _check_sorted_noise(noise)
    alpha = np.asarray(alpha, dtype=float)
    share = alpha * power
    interference = np.cumsum(share, axis=-1) - share
    return shannon_rate(share / (noise + interference))


def scalar_bc_region(power, noise, resolution=201) -> RateRegion:
    noise = _check_sorted_noise(noise)
    alphas = simplex_grid(len(noise), resolution)
    return RateRegion(np.atleast_2d(scalar_bc_rates(alphas, power, noise)))


def scalar_mac_region_contains(powers, noise, candidate, tol=0.0) -> bool:
    """Exact polymatroid membership test for the scalar Gaussian MAC."""
    powers = np.asarray(powers, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    k = len(powers)
    if k > 20:
        raise ValueError("subset enumeration is limited to 20 users")
    if candidate.shape != powers.shape:
        raise ValueError("candidate must have one rate per user")
    if np.any(candidate < -tol):
        return False
    active = powers > 0
    if np.any(candidate[~active] > tol):
        return False
    p, r = powers[active], candidate[active]
    for size in range(1, len(p) + 1):
        for subset in itertools.combinations(range(len(p)), size):
            idx = list(subset)
            if r[idx].sum() > shannon_rate(p[idx].sum() / noise) + tol:
                return False
    return True


def oma_region(power, noise, resolution=201, link="downlink") -> RateRegion:
    """TDMA baseline: each user transmits at full power in its own slot.

    ``link="downlink"`` takes a common power and per-user noise powers;
    ``link="uplink"`` takes per-user powers and a common noise power.
    """
    if link == "downlink":
        single = shannon_rate(power / np.asarray(noise, dtype=float))
    elif link == "uplink":
        single = shannon_rate(np.asarray(power, dtype=float) / noise)
    else:
        raise ValueError(f"unknown link {link!r}")
    single = np.atleast_1d(single)
    shares = simplex_grid(len(single), resolution)
    return RateRegion(shares * single)


def _gram_sum(channels, covariances, n_rx):
    total = np.zeros((n_rx, n_rx), dtype=complex)
    for h, s in zip(channels, covariances):
        total += h @ s @ h.conj().T
    return total


def _as_matrices(channels, covariances=None):
    hs = [np.asarray(h, dtype=complex) for h in channels]
    hs = [h.reshape(-1, 1) if h.ndim == 1 else h for h in hs]
    if covariances is None:
        return hs
    ss = [np.atleast_2d(np.asarray(s, dtype=complex)) for s in covariances]
    for h, s in zip(hs, ss):
        if s.shape != (h.shape[1], h.shape[1]):
            raise ValueError("covariance size must match the number of transmit antennas")
        if np.linalg.eigvalsh((s + s.conj().T) / 2).min() < -1e-10 * max(1.0, np.abs(s).max()):
            raise ValueError("covariances must be positive semidefinite")
    return hs, ss


def mac_sic_corner(channels, covariances, noise, order=None) -> np.ndarray:
    """Corner point of the vector-MAC polyhedron for a successive decoding order.

    ``order`` lists users in decoding order; the first decoded user sees
    every other user as interference, the last one sees only noise.
    """
    hs, ss = _as_matrices(channels, covariances)
    k = len(hs)
    n_rx = hs[0].shape[0]
    order = list(range(k)) if order is None else list(order)
    if sorted(order) != list(range(k)):
        raise ValueError("order must be a permutation of the users")
    rates = np.zeros(k)
    remaining = noise * np.eye(n_rx) + _gram_sum(hs, ss, n_rx)
    for user in order:
        h, s = hs[user], ss[user]
        after = remaining - h @ s @ h.conj().T
        rates[user] = log2det(remaining) - log2det(after)
        remaining = after
    return rates


def mac_sum_rate(channels, covariances, noise) -> float:
    hs, ss = _as_matrices(channels, covariances)
    n_rx = hs[0].shape[0]
    return log2det(np.eye(n_rx) + _gram_sum(hs, ss, n_rx) / noise)


def water_filling(gains, budget):
    """Classical water-filling of ``budget`` over parallel channels.

    Returns ``(powers, level)`` maximizing ``sum(log2(1 + g_i p_i))`` with
    ``p_i = max(level - 1/g_i, 0)``. Nonpositive gains receive no power.
    """
    gains = np.asarray(gains, dtype=float)
    powers = np.zeros_like(gains)
    if budget <= 0 or not np.any(gains > 0):
        return powers, 0.0
    pos = np.flatnonzero(gains > 0)
    inv = 1.0 / gains[pos]
    srt = np.sort(inv)
    level = srt[0] + budget
    for m in range(len(srt), 0, -1):
        level = (budget + srt[:m].sum()) / m
        if level > srt[m - 1]:
            break
    powers[pos] = np.maximum(level - inv, 0.0)
    powers *= budget / powers.sum()
    return powers, float(level)


def _single_user_wf(eff, budget):
    """Water-filled covariance for effective Gram matrix ``eff``."""
    eff = (eff + eff.conj().T) / 2
    gains, vecs = np.linalg.eigh(eff)
    gains = np.clip(gains, 0.0, None)
    p, _ = water_filling(gains, budget)
    return (vecs * p) @ vecs.conj().T


@dataclass
class IwfResult:
    covariances: list
    sum_capacity: float
    history: list = field(default_factory=list)
    iterations: int = 0
    kkt_residual: float = 0.0


def _wf_residual(hs, ss, budgets, noise, n_rx):
    worst = 0.0
    total = noise * np.eye(n_rx) + _gram_sum(hs, ss, n_rx)
    for h, s, p in zip(hs, ss, budgets):
        z = total - h @ s @ h.conj().T
        target = _single_user_wf(h.conj().T @ np.linalg.solve(z, h), p)
        worst = max(worst, np.abs(target - s).max() / p)
    return worst


def iwf_mac(channels, budgets, noise, tol=1e-8, max_iter=500, kkt_tol=1e-7) -> IwfResult:
    """Sum capacity of the vector MAC under per-user power budgets.

    Users update their covariance one at a time by water-filling against
    the noise plus the other users' signals. The sum rate never decreases
    along the way; iteration stops when a full cycle improves it by less
    than ``tol`` and the covariances are a water-filling fixed point to
    ``kkt_tol``.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` cycles pass without meeting both tolerances.
    """
    hs = _as_matrices(channels)
    budgets = np.asarray(budgets, dtype=float)
    if np.any(budgets < 0):
        raise ValueError("power budgets must be nonnegative")
    n_rx = hs[0].shape[0]
    active = [k for k in range(len(hs)) if budgets[k] > 0]
    h_act = [hs[k] for k in active]
    p_act = budgets[active]
    s_act = [np.zeros((h.shape[1], h.shape[1]), dtype=complex) for h in h_act]

    history = []
    objective = 0.0
    for it in range(1, max_iter + 1):
        for k, (h, p) in enumerate(zip(h_act, p_act)):
            z = noise * np.eye(n_rx) + _gram_sum(h_act, s_act, n_rx) - h @ s_act[k] @ h.conj().T
            s_act[k] = _single_user_wf(h.conj().T @ np.linalg.solve(z, h), p)
        new = mac_sum_rate(h_act, s_act, noise) if h_act else 0.0
        history.append(new)
        improvement = new - objective
        objective = new
        if it > 1 and improvement < tol:
            residual = _wf_residual(h_act, s_act, p_act, noise, n_rx) if h_act else 0.0
            if residual < kkt_tol:
                break
    else:
        raise ConvergenceError(f"iterative water-filling did not converge in {max_iter} cycles")

    covs = [np.zeros((h.shape[1], h.shape[1]), dtype=complex) for h in hs]
    for k, s in zip(active, s_act):
        covs[k] = s
    return IwfResult(covs, objective, history, it, residual)


def dpc_rates(channels, covariances, noise, order=None, power=None) -> np.ndarray:
    """Dirty-paper coding rates for a fixed encoding order.

    Downlink user ``k`` receives ``H_k^H x + n_k``. ``covariances`` are the
    ``N_BS x N_BS`` transmit covariances. A user encoded later never sees
    interference from users encoded before it.
    """
    hs = _as_matrices(channels)
    xs = [np.asarray(x, dtype=complex) for x in covariances]
    k = len(hs)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (k,))
    if power is not None and sum(np.trace(x).real for x in xs) > power * (1 + 1e-9):
        raise ValueError("transmit covariances exceed the power budget")
    order = list(range(k)) if order is None else list(order)
    if sorted(order) != list(range(k)):
        raise ValueError("order must be a permutation of the users")
    rates = np.zeros(k)
    for pos, user in enumerate(order):
        h = hs[user]
        later = sum((xs[u] for u in order[pos + 1:]), np.zeros_like(xs[user]))
        n = h.shape[1]
        base = noise[user] * np.eye(n) + h.conj().T @ later @ h
        rates[user] = log2det(base + h.conj().T @ xs[user] @ h) - log2det(base)
    return rates


@dataclass
class BcSumCapacity:
    value: float
    mac_covariances: list
    history: list
    iterations: int


def bc_sum_capacity(channels, noise, power, tol=1e-10, max_iter=5000) -> BcSumCapacity:
    """Sum capacity of the vector Gaussian broadcast channel.

    Solved on the dual MAC (channels scaled by ``1/sigma_k``, unit noise,
    shared power budget) with sum-power iterative water-filling: all users'
    effective eigenmodes are water-filled jointly and the new covariances
    are averaged with the previous ones, which keeps the iteration
    monotone.
    """
    hs = _as_matrices(channels)
    k = len(hs)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (k,))
    gs = [h / np.sqrt(s) for h, s in zip(hs, noise)]
    n_rx = gs[0].shape[0]
    n_tx = sum(g.shape[1] for g in gs)
    qs = [np.eye(g.shape[1], dtype=complex) * power / n_tx for g in gs]
    objective = mac_sum_rate(gs, qs, 1.0)
    history = [objective]
    for it in range(1, max_iter + 1):
        total = np.eye(n_rx) + _gram_sum(gs, qs, n_rx)
        gains, bases = [], []
        for g, q in zip(gs, qs):
            z = total - g @ q @ g.conj().T
            eff = g.conj().T @ np.linalg.solve(z, g)
            lam, vec = np.linalg.eigh((eff + eff.conj().T) / 2)
            gains.append(np.clip(lam, 0.0, None))
            bases.append(vec)
        p, _ = water_filling(np.concatenate(gains), power)
        start = 0
        new_qs = []
        for lam, vec in zip(gains, bases):
            pk = p[start:start + len(lam)]
            start += len(lam)
            new_qs.append((vec * pk) @ vec.conj().T)
        qs = [(nq + (k - 1) * q) / k for nq, q in zip(new_qs, qs)]
        new = mac_sum_rate(gs, qs, 1.0)
        history.append(new)
        if abs(new - objective) < tol:
            objective = new
            break
        objective = new
    else:
        raise ConvergenceError(f"sum-power water-filling did not converge in {max_iter} iterations")
    return BcSumCapacity(objective, qs, history, it)
