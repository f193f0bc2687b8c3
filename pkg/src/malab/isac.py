"""Integrated sensing and communications through mutual information.

Sensing quality is the mutual information between the target response and
the echo, normalized per symbol to a sensing rate (SR); communication
quality is the usual achievable rate (CR). Receive noise in the sensing
model has unit variance per entry.

Stacking convention: ``vec(G^H)`` concatenates the conjugated rows of the
``N_r x N_t`` target response ``G``, so its covariance ``R_G`` is made of
``N_t x N_t`` blocks ``R_G[r, r'] = E[G[r, :]^H G[r', :]]``. Its transmit
correlation is ``R = E[G[r, :]^H G[r, :]]`` for unit-modulus receive
steering entries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import brentq, minimize

from .capacity import water_filling
from .foundation import ArrayGeometry, InfeasibleError, keyed_rng, log2det, shannon_rate, steering_vector
from .noma import ClusterAssignment, intercluster_zf_user

LN2 = np.log(2.0)


@dataclass(frozen=True)
class SrCrPoint:
    sr: float
    cr: float
    label: str = ""

    def __post_init__(self):
        if self.sr < 0 or self.cr < 0:
            raise ValueError("rates must be nonnegative")


def _half_wave(n):
    return ArrayGeometry(n, 0.5, 1.0, allow_even=True)


@dataclass(frozen=True)
class TargetModel:
    """Point targets seen by an ``n_t``-transmit, ``n_r``-receive
    half-wavelength array pair."""

    angles: tuple
    variances: tuple
    n_t: int
    n_r: int

    def __post_init__(self):
        if len(self.angles) != len(self.variances):
            raise ValueError("need one variance per target")
        if any(v < 0 for v in self.variances):
            raise ValueError("target variances must be nonnegative")

    def tx_steering(self, theta):
        return steering_vector(_half_wave(self.n_t), theta)

    def rx_steering(self, theta):
        return steering_vector(_half_wave(self.n_r), theta)

    def response_covariance(self) -> np.ndarray:
        """Covariance ``R_G`` of ``vec(G^H)``."""
        dim = self.n_t * self.n_r
        cov = np.zeros((dim, dim), dtype=complex)
        for theta, var in zip(self.angles, self.variances):
            v = np.kron(self.rx_steering(theta).conj(), self.tx_steering(theta).conj())
            cov += var * np.outer(v, v.conj())
        return cov

    def transmit_correlation(self) -> np.ndarray:
        cov = np.zeros((self.n_t, self.n_t), dtype=complex)
        for theta, var in zip(self.angles, self.variances):
            b = self.tx_steering(theta)
            cov += var * np.outer(b.conj(), b)
        return cov


def target_response(model: TargetModel, seed=0, draw=0):
    """One Swerling-I draw of ``G = sum_q alpha_q a_r(theta_q) b_t(theta_q)^T``
    together with ``R_G``."""
    rng = keyed_rng(seed, draw)
    g = np.zeros((model.n_r, model.n_t), dtype=complex)
    for theta, var in zip(model.angles, model.variances):
        alpha = np.sqrt(var / 2) * (rng.standard_normal() + 1j * rng.standard_normal())
        g += alpha * np.outer(model.rx_steering(theta), model.tx_steering(theta))
    return g, model.response_covariance()


def separated_covariance(r, n_r) -> np.ndarray:
    """``R_G = I_{n_r} kron R`` for widely separated receive antennas."""
    return np.kron(np.eye(n_r), np.asarray(r, dtype=complex))


def sensing_mi(x, r_g=None, r=None, n_r=None) -> float:
    """Sensing mutual information in bits for the probing signal ``x``
    (``N_t x L``).

    Pass ``r_g`` for the general form or ``r`` and ``n_r`` for widely
    separated receive antennas.
    """
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    n_t, length = x.shape
    if r_g is not None:
        r_g = np.asarray(r_g, dtype=complex)
        if r_g.shape[0] % n_t or r_g.shape != (r_g.shape[0], r_g.shape[0]):
            raise ValueError("R_G dimension does not match the probing signal")
        rx = r_g.shape[0] // n_t
        a = np.kron(np.eye(rx), x.conj().T)
        return max(log2det(np.eye(rx * length) + a @ r_g @ a.conj().T), 0.0)
    if r is None or n_r is None:
        raise ValueError("need either r_g or (r, n_r)")
    r = np.asarray(r, dtype=complex)
    if r.shape != (n_t, n_t):
        raise ValueError("transmit correlation does not match the probing signal")
    return max(n_r * log2det(np.eye(length) + x.conj().T @ r @ x), 0.0)


def sensing_mi_from_gram(gram, r, n_r) -> float:
    """Separated-antenna MI written through ``X X^H``."""
    r = np.asarray(r, dtype=complex)
    root = sqrtm(r)
    inner = root @ np.asarray(gram, dtype=complex) @ root.conj().T
    return max(n_r * log2det(np.eye(r.shape[0]) + inner), 0.0)


def gaussian_distortion_rate(variances, rate) -> float:
    """Smallest mean squared error of a complex Gaussian vector described
    with ``rate`` bits (reverse water-filling)."""
    var = np.atleast_1d(np.asarray(variances, dtype=float))
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if np.any(var < 0):
        raise ValueError("variances must be nonnegative")
    if rate == 0 or var.max() == 0:
        return float(var.sum())
    if var.size == 1:
        return float(var[0] * 2.0**-rate)

    def spent(level):
        return np.sum(np.log2(np.maximum(var / level, 1.0))) - rate

    level = brentq(spent, var.max() * 2.0**-rate / var.size * 1e-3, var.max(), xtol=1e-300, rtol=1e-15)
    return float(np.sum(np.minimum(var, level)))


# regions ---------------------------------------------------------------------

def osac_region(sr_max, cr_max, grid=11):
    """Orthogonal sharing: a fraction ``t`` of the resources senses."""
    if grid < 2:
        raise ValueError("grid needs at least two points")
    return [SrCrPoint(t * sr_max, (1 - t) * cr_max, f"osac({t:.6g})") for t in np.linspace(0, 1, grid)]


def time_share(a: SrCrPoint, b: SrCrPoint, grid=11):
    return [
        SrCrPoint(t * a.sr + (1 - t) * b.sr, t * a.cr + (1 - t) * b.cr, f"time-share({t:.6g})")
        for t in np.linspace(0, 1, grid)
    ]


def hull_dominates(points, target, tol=1e-9) -> bool:
    """True when a time-sharing combination of two of ``points`` is at
    least ``target`` in both coordinates (up to ``tol``)."""
    pts = [(p.sr, p.cr) for p in points]
    s, c = target.sr - tol, target.cr - tol
    for (s1, c1), (s2, c2) in ((p, q) for p in pts for q in pts):
        # lam * p + (1 - lam) * q >= target, lam in [0, 1]
        lo, hi = 0.0, 1.0
        for a, b, need in ((s1, s2, s), (c1, c2, c)):
            slope = a - b
            if slope > 0:
                lo = max(lo, (need - b) / slope)
            elif slope < 0:
                hi = min(hi, (need - b) / slope)
            elif b < need:
                lo, hi = 1.0, 0.0
        if lo <= hi:
            return True
    return False


def region_contains(isac_points, osac_points, tol=1e-9) -> bool:
    return all(hull_dominates(isac_points, p, tol) for p in osac_points)


# uplink ----------------------------------------------------------------------

@dataclass
class UplinkRegion:
    c_sic: SrCrPoint
    s_sic: SrCrPoint
    boundary: list
    osac: list

    @property
    def points(self):
        return [self.c_sic, self.s_sic] + self.boundary


def _whitened_covariance(r_g, q, n_t):
    w = np.linalg.inv(sqrtm(q.conj()))
    t = np.kron(w, np.eye(n_t))
    return t @ r_g @ t.conj().T


def echo_covariance(x, r_g, n_r) -> np.ndarray:
    """Receive covariance of the echo ``G x_l`` averaged over the columns of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    n_t, length = x.shape
    blocks = np.asarray(r_g).reshape(n_r, n_t, n_r, n_t)
    # Q[r, s] = x^H R_G[s, r] x
    q = np.einsum("il,sirj,jl->rs", x.conj(), blocks, x) / length
    return (q + q.conj().T) / 2


def uplink_isac_region(channels, powers, x, r_g, grid=11) -> UplinkRegion:
    """Corner points and time-sharing boundary of uplink NOMA-ISAC.

    With C-SIC the echo is sensed first while the users' signals act as
    white-in-time Gaussian noise of spatial covariance ``sum p h h^H``; the
    users are then decoded interference-free. With S-SIC the users are
    decoded first under the echo, modeled as Gaussian noise with its
    column-averaged covariance, and sensing is interference-free.
    """
    h = np.asarray(channels, dtype=complex)
    h = h.reshape(-1, 1) if h.ndim == 1 else h
    n_r = h.shape[0]
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    n_t, length = x.shape
    p = np.broadcast_to(np.asarray(powers, dtype=float), (h.shape[1],))
    comm = (h * p) @ h.conj().T
    eye = np.eye(n_r)

    cr_free = log2det(eye + comm)
    sr_free = sensing_mi(x, r_g=r_g) / length
    sr_whitened = sensing_mi(x, r_g=_whitened_covariance(r_g, eye + comm, n_t)) / length
    echo = echo_covariance(x, r_g, n_r)
    cr_masked = max(log2det(eye + echo + comm) - log2det(eye + echo), 0.0)

    c_sic = SrCrPoint(sr_whitened, cr_free, "C-SIC")
    s_sic = SrCrPoint(sr_free, cr_masked, "S-SIC")
    return UplinkRegion(c_sic, s_sic, time_share(s_sic, c_sic, grid), osac_region(sr_free, cr_free, grid))


# downlink SISO NOMA ----------------------------------------------------------

@dataclass
class SisoNomaIsac:
    sr: float
    near_rates: np.ndarray
    far_rates: np.ndarray
    splits: np.ndarray

    @property
    def cr_max(self) -> float:
        return float(np.max(self.near_rates + self.far_rates))

    @property
    def corner(self) -> SrCrPoint:
        return SrCrPoint(self.sr, self.cr_max, "corner")


def siso_sensing_rate(power, variance, length) -> float:
    return shannon_rate(power * length * variance) / length


def dl_siso_noma_isac(power, gains, variance, length, noise=1.0, grid=101) -> SisoNomaIsac:
    """Single-antenna ISAC serving a near and a far user with NOMA.

    The full-power signal both probes the target and carries the
    superposed messages, so every NOMA power split comes with the same SR.
    ``gains`` is ``(near, far)`` with ``near >= far``.
    """
    g_near, g_far = gains
    if g_near < g_far:
        raise ValueError("the near user must have the larger gain")
    split = np.linspace(0, 1, grid)
    p_near = split * power
    p_far = (1 - split) * power
    near = shannon_rate(p_near * g_near / noise)
    far = shannon_rate(p_far * g_far / (p_near * g_far + noise))
    return SisoNomaIsac(siso_sensing_rate(power, variance, length), near, far, split)


# downlink SU-MISO --------------------------------------------------------------

@dataclass
class SuMisoRegion:
    sc: SrCrPoint
    cc: SrCrPoint
    pareto: list
    alphas: np.ndarray
    beams: list = field(default_factory=list)


class SuMisoScene:
    """One communication user ``h_c`` and one target at ``theta``."""

    def __init__(self, h_c, theta, variance, power, n_r, length, noise=1.0):
        self.h_c = np.asarray(h_c, dtype=complex)
        if not np.linalg.norm(self.h_c) > 0:
            raise ValueError("communication channel must be nonzero")
        self.h_s = steering_vector(_half_wave(self.h_c.size), theta)
        self.variance, self.power, self.n_r, self.length, self.noise = variance, power, n_r, length, noise

    def rates(self, w):
        w = np.asarray(w, dtype=complex)
        cr = shannon_rate(self.power * abs(np.vdot(w, self.h_c)) ** 2 / self.noise)
        sr = shannon_rate(self.power * self.n_r * self.length * self.variance * abs(np.vdot(w, self.h_s)) ** 2)
        return sr / self.length, cr

    def sr_of_gain(self, gain):
        return shannon_rate(self.power * self.n_r * self.length * self.variance * gain) / self.length

    def cr_of_gain(self, gain):
        return shannon_rate(self.power * gain / self.noise)

    def span_basis(self):
        """Orthonormal ``u1 = h_c/|h_c|`` and the part of ``h_s`` orthogonal to it."""
        u1 = self.h_c / np.linalg.norm(self.h_c)
        rest = self.h_s - u1 * np.vdot(u1, self.h_s)
        nrm = np.linalg.norm(rest)
        u2 = rest / nrm if nrm > 1e-12 * np.linalg.norm(self.h_s) else np.zeros_like(u1)
        return u1, u2


def _rate_profile_phi(scene: SuMisoScene, alpha, tol):
    """Beam in the span of both channels solving the rate-profile problem.

    Writing ``w = cos(phi) u1 + sin(phi) e^{j psi} u2`` and aligning ``psi``
    with ``h_s``, CR falls and SR rises as ``phi`` goes from the C-C
    direction to the S-C direction ``phi_s``. The optimum is the endpoint
    that already balances the profile, or else the crossing
    ``SR / alpha = CR / (1 - alpha)``, located by bisection.
    """
    u1, u2 = scene.span_basis()
    a = abs(np.vdot(u1, scene.h_s))
    b = abs(np.vdot(u2, scene.h_s))
    hc2 = np.linalg.norm(scene.h_c) ** 2
    hs = np.hypot(a, b)
    phi_s = np.arctan2(b, a)
    phase = np.angle(np.vdot(u2, scene.h_s)) - np.angle(np.vdot(u1, scene.h_s))

    def gap(phi):
        sr = scene.sr_of_gain((hs * np.cos(phi - phi_s)) ** 2)
        cr = scene.cr_of_gain(hc2 * np.cos(phi) ** 2)
        return sr / alpha - cr / (1 - alpha)

    if gap(0.0) >= 0:
        phi = 0.0
    elif gap(phi_s) <= 0:
        phi = phi_s
    else:
        lo, hi = 0.0, phi_s
        while hi - lo > tol:
            mid = (lo + hi) / 2
            lo, hi = (lo, mid) if gap(mid) >= 0 else (mid, hi)
        phi = (lo + hi) / 2
    return np.cos(phi) * u1 + np.sin(phi) * np.exp(1j * phase) * u2


def su_miso_pareto_beam(scene: SuMisoScene, alpha, tol=1e-15):
    """Beamformer solving the rate-profile problem for ``alpha``.

    ``alpha = 0`` and ``alpha = 1`` return the matched filters of the
    communication and sensing channels.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("rate-profile parameter must lie in [0, 1]")
    if alpha == 0:
        return scene.h_c / np.linalg.norm(scene.h_c)
    if alpha == 1:
        return scene.h_s / np.linalg.norm(scene.h_s)
    return _rate_profile_phi(scene, alpha, tol)


def dl_su_miso_isac(scene: SuMisoScene, alphas=None) -> SuMisoRegion:
    alphas = np.linspace(0, 1, 11) if alphas is None else np.asarray(alphas, dtype=float)
    sc = SrCrPoint(*scene.rates(scene.h_s / np.linalg.norm(scene.h_s)), "S-C")
    cc = SrCrPoint(*scene.rates(scene.h_c / np.linalg.norm(scene.h_c)), "C-C")
    beams = [su_miso_pareto_beam(scene, a) for a in alphas]
    pareto = [SrCrPoint(*scene.rates(w), f"pareto({a:.6g})") for a, w in zip(alphas, beams)]
    return SuMisoRegion(sc, cc, pareto, alphas, beams)


# downlink cluster-based MIMO-NOMA ----------------------------------------------

class ClusterScene:
    """Clusters of multi-antenna users with one beam per transmit antenna.

    ``clusters[c]`` lists the ``N_t x N_U`` channel matrices of cluster
    ``c``'s users; ``r`` is the target transmit correlation.
    """

    def __init__(self, clusters, r, power, n_r, length, noise=1.0):
        self.clusters = [[np.asarray(h, dtype=complex) for h in group] for group in clusters]
        self.r = np.asarray(r, dtype=complex)
        self.n_t = self.r.shape[0]
        if len(self.clusters) != self.n_t:
            raise ValueError("one cluster per transmit antenna is required")
        self.power, self.n_r, self.length, self.noise = power, n_r, length, noise
        sizes = [len(g) for g in self.clusters]
        starts = np.cumsum([0] + sizes)
        self.assignment = ClusterAssignment(tuple(tuple(range(s, s + k)) for s, k in zip(starts, sizes)))
        self.channels = [h for group in self.clusters for h in group]

    def cluster_gains(self, w) -> np.ndarray:
        """Best post-equalization gain ``|v^H H^H w_c|^2`` in every cluster."""
        design = intercluster_zf_user(self.channels, w, self.assignment)
        if not design.feasible:
            raise InfeasibleError(f"user-side zero-forcing infeasible ({design.condition}): {design.detail}")
        labels = self.assignment.labels()
        gains = np.zeros(self.n_t)
        for user, (h, v) in enumerate(zip(self.channels, design.vectors)):
            c = labels[user]
            gains[c] = max(gains[c], abs(np.vdot(v, h.conj().T @ w[:, c])) ** 2)
        return gains

    def sr(self, w, ptilde) -> float:
        p = w * np.sqrt(np.asarray(ptilde, dtype=float))
        inner = self.length * p.conj().T @ self.r @ p
        return self.n_r * log2det(np.eye(self.n_t) + inner) / self.length

    def cr(self, gains, ptilde) -> float:
        """Sum rate with each cluster's power on its strongest user, which
        maximizes the intra-cluster NOMA sum rate."""
        return float(np.sum(shannon_rate(gains * np.asarray(ptilde, dtype=float) / self.noise)))

    def user_rates(self, w, powers) -> np.ndarray:
        """Per-user rates for an explicit power split ``powers[c][k]``.

        Users are decoded in increasing gain order within each cluster.
        """
        design = intercluster_zf_user(self.channels, w, self.assignment)
        if not design.feasible:
            raise InfeasibleError(f"user-side zero-forcing infeasible ({design.condition}): {design.detail}")
        flat = np.concatenate([np.asarray(p, dtype=float) for p in powers])
        gains = np.array([
            abs(np.vdot(v, h.conj().T @ w[:, c])) ** 2
            for h, v, c in zip(self.channels, design.vectors, self.assignment.labels())
        ])
        rates = np.zeros(len(flat))
        for group in self.assignment.clusters:
            idx = np.array(group)
            order = idx[np.argsort(gains[idx], kind="stable")]
            for pos, user in enumerate(order):
                later = flat[order[pos + 1:]].sum()
                rates[user] = shannon_rate(gains[user] * flat[user] / (gains[user] * later + self.noise))
        return rates


def cluster_cc_design(scene: ClusterScene, taus=None):
    """Beams from :func:`beam_family` with the largest water-filled sum rate.

    Powers are water-filled over the clusters' effective gains.
    """
    best = None
    for w in beam_family(scene, taus):
        ptilde, _ = water_filling(scene.cluster_gains(w) / scene.noise, scene.power)
        rate = scene.cr(scene.cluster_gains(w), ptilde)
        if best is None or rate > best[0] + 1e-12:
            best = (rate, w, ptilde)
    return best[1], best[2]


def cluster_sc_design(scene: ClusterScene):
    """Eigenvectors of ``R`` with water-filling over ``L`` times its eigenvalues."""
    lam, vec = np.linalg.eigh(scene.r)
    lam = np.clip(lam, 0.0, None)
    ptilde, _ = water_filling(scene.length * lam, scene.power)
    return vec.astype(complex), ptilde


def polar_unitary(m):
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def beam_family(scene: ClusterScene, taus=None):
    """Unitary beams interpolated between the identity and the eigenvectors
    of ``R``: the unitary polar factor of ``(1 - tau) I + tau U``."""
    taus = np.linspace(0, 1, 11) if taus is None else taus
    w_s, _ = cluster_sc_design(scene)
    eye = np.eye(scene.n_t, dtype=complex)
    return [polar_unitary((1 - t) * eye + t * w_s) for t in taus]


def _profile_powers(scene: ClusterScene, w, alpha):
    """Maximize ``R`` s.t. ``SR >= alpha R``, ``CR >= (1 - alpha) R`` over
    cluster powers for fixed beams (a convex program)."""
    gains = scene.cluster_gains(w)
    m = w.conj().T @ scene.r @ w
    n = scene.n_t
    scale = scene.n_r / scene.length / LN2

    def sr(pt):
        return scene.sr(w, pt)

    def sr_grad(pt):
        inv = np.linalg.inv(np.eye(n) + scene.length * m * pt[None, :])
        return scale * scene.length * np.real(np.diag(inv @ m))

    def cr_grad(pt):
        return gains / (scene.noise + gains * pt) / LN2

    x0 = np.full(n, scene.power / n)
    r0 = 0.5 * min(sr(x0) / max(alpha, 1e-12), scene.cr(gains, x0) / max(1 - alpha, 1e-12))
    cons = [
        {"type": "ineq", "fun": lambda y: sr(y[:n]) - alpha * y[n],
         "jac": lambda y: np.append(sr_grad(y[:n]), -alpha)},
        {"type": "ineq", "fun": lambda y: scene.cr(gains, y[:n]) - (1 - alpha) * y[n],
         "jac": lambda y: np.append(cr_grad(y[:n]), -(1 - alpha))},
        {"type": "ineq", "fun": lambda y: scene.power - y[:n].sum(),
         "jac": lambda y: np.append(-np.ones(n), 0.0)},
    ]
    res = minimize(
        lambda y: -y[n], np.append(x0, r0), jac=lambda y: np.append(np.zeros(n), -1.0),
        bounds=[(0, scene.power)] * n + [(0, None)], constraints=cons, method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 500},
    )
    pt = np.clip(res.x[:n], 0, None)
    total = pt.sum()
    if total > scene.power:
        pt *= scene.power / total
    return pt, gains


@dataclass
class ClusterRegion:
    cc: SrCrPoint
    sc: SrCrPoint
    pareto: list
    osac: list

    @property
    def points(self):
        return [self.cc, self.sc] + self.pareto


def cluster_point(scene: ClusterScene, w, ptilde, label="") -> SrCrPoint:
    return SrCrPoint(scene.sr(w, ptilde), scene.cr(scene.cluster_gains(w), ptilde), label)


def cluster_pareto_point(scene: ClusterScene, alpha, taus=None) -> SrCrPoint:
    """Rate-profile point for ``alpha``, best over :func:`beam_family`.

    The endpoints are the C-C (``alpha = 0``) and S-C (``alpha = 1``)
    points.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("rate-profile parameter must lie in [0, 1]")
    if alpha == 0:
        w, pt = cluster_cc_design(scene, taus)
        return cluster_point(scene, w, pt, "pareto(0)")
    if alpha == 1:
        w, pt = cluster_sc_design(scene)
        return cluster_point(scene, w, pt, "pareto(1)")
    best, best_r = None, -np.inf
    for w in beam_family(scene, taus):
        pt, gains = _profile_powers(scene, w, alpha)
        sr, cr = scene.sr(w, pt), scene.cr(gains, pt)
        value = min(sr / alpha, cr / (1 - alpha))
        if value > best_r:
            best, best_r = SrCrPoint(sr, cr, f"pareto({alpha:.6g})"), value
    return best


def dl_cluster_isac(scene: ClusterScene, alphas=None, taus=None, grid=11) -> ClusterRegion:
    alphas = np.linspace(0, 1, 11) if alphas is None else alphas
    w_c, p_c = cluster_cc_design(scene, taus)
    w_s, p_s = cluster_sc_design(scene)
    cc = cluster_point(scene, w_c, p_c, "C-C")
    sc = cluster_point(scene, w_s, p_s, "S-C")
    pareto = [cluster_pareto_point(scene, a, taus) for a in alphas]
    return ClusterRegion(cc, sc, pareto, osac_region(sc.sr, cc.cr, grid))
