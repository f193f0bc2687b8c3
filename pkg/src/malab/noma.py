"""Multi-antenna NOMA rate engines with successive interference cancellation.

A decoding order is stored as a ``K x K`` 0/1 matrix ``alpha``:
``alpha[k, j] == 0`` means user ``k`` decodes and removes user ``j``'s
message before decoding its own. Only pairs in the same cluster are
constrained; across clusters no SIC takes place.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import correlation_rho
from .foundation import InfeasibleError, shannon_rate

SIC_SLACK = 1e-12


@dataclass(frozen=True)
class ClusterAssignment:
    clusters: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(u) for u in g) for g in self.clusters)
        object.__setattr__(self, "clusters", groups)
        members = [u for g in groups for u in g]
        if any(len(g) == 0 for g in groups):
            raise ValueError("clusters must be nonempty")
        if sorted(members) != list(range(len(members))):
            raise ValueError("clusters must partition the users 0..K-1")

    @classmethod
    def single(cls, k):
        return cls((tuple(range(k)),))

    @classmethod
    def singletons(cls, k):
        return cls(tuple((u,) for u in range(k)))

    @property
    def n_users(self) -> int:
        return sum(len(g) for g in self.clusters)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def labels(self) -> np.ndarray:
        out = np.empty(self.n_users, dtype=int)
        for c, g in enumerate(self.clusters):
            out[list(g)] = c
        return out

    def same_cluster(self) -> np.ndarray:
        lab = self.labels()
        return lab[:, None] == lab[None, :]


@dataclass(frozen=True)
class SicOrdering:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=int)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("alpha must be a square matrix")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("alpha entries must be 0 or 1")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def from_orders(cls, orders, k=None):
        """Build from per-cluster decoding sequences.

        Each sequence lists users whose messages are decoded first to last:
        every user removes the messages listed before its own.
        """
        orders = [list(o) for o in orders]
        k = sum(len(o) for o in orders) if k is None else k
        a = np.ones((k, k), dtype=int)
        for seq in orders:
            for pos, user in enumerate(seq):
                a[user, seq[:pos]] = 0
        np.fill_diagonal(a, 0)
        return cls(a)

    def validate(self, assignment: ClusterAssignment) -> None:
        """Check complementarity and transitivity inside every cluster."""
        a = self.alpha
        if a.shape[0] != assignment.n_users:
            raise ValueError("ordering size does not match the number of users")
        for group in assignment.clusters:
            idx = np.asarray(group)
            sub = a[np.ix_(idx, idx)]
            off = ~np.eye(len(idx), dtype=bool)
            if np.any((sub + sub.T)[off] != 1):
                raise ValueError("alpha[k, j] + alpha[j, k] must equal 1 within a cluster")
            # a tournament is transitive iff its score sequence is 0..n-1
            scores = np.sort(((sub == 0) & off).sum(axis=1))
            if not np.array_equal(scores, np.arange(len(idx))):
                raise ValueError("SIC relation within a cluster is not a total order")

    def decoding_sequence(self, group) -> list:
        """Users of ``group`` in the order their messages are decoded."""
        group = list(group)
        sub = self.alpha[np.ix_(group, group)]
        cancelled = ((sub == 0) & ~np.eye(len(group), dtype=bool)).sum(axis=1)
        return [group[i] for i in np.argsort(cancelled, kind="stable")]


@dataclass
class NomaRates:
    rates: np.ndarray
    cross: np.ndarray
    sic_feasible: bool
    violations: list = field(default_factory=list)


def _interference_mask(ordering: SicOrdering, assignment: ClusterAssignment) -> np.ndarray:
    """``mask[k, j] == 1`` when user ``j`` still interferes while user
    ``k``'s message is decoded."""
    same = assignment.same_cluster()
    mask = np.where(same, ordering.alpha, 1)
    np.fill_diagonal(mask, 0)
    return mask


def noma_rates(h, w, powers, noise, ordering: SicOrdering, assignment: ClusterAssignment | None = None):
    """Cluster-free SIC rates with per-user beamformers.

    ``cross[r, k]`` is the rate at which user ``r`` can decode user ``k``'s
    message; ``rates`` is its diagonal. SIC is feasible when every required
    cancellation runs faster than the cancelled user's own rate (by more
    than ``1e-12``). Cancelling a signal that arrives with zero power is not
    required.
    """
    h = np.asarray(h, dtype=complex)
    w = np.asarray(w, dtype=complex)
    k = h.shape[1]
    if w.shape != h.shape:
        raise ValueError("need one beamformer per user")
    assignment = ClusterAssignment.single(k) if assignment is None else assignment
    ordering.validate(assignment)
    p = np.broadcast_to(np.asarray(powers, dtype=float), (k,))
    sigma2 = np.broadcast_to(np.asarray(noise, dtype=float), (k,))
    received = np.abs(h.conj().T @ w) ** 2 * p  # [r, j]: user j's signal power at user r
    mask = _interference_mask(ordering, assignment)
    interference = received @ mask.T  # [r, k]
    cross = shannon_rate(received / (interference + sigma2[:, None]))
    rates = np.diag(cross).copy()

    violations = []
    same = assignment.same_cluster()
    for r in range(k):
        for j in range(k):
            if r == j or not same[r, j] or ordering.alpha[r, j] != 0:
                continue
            if received[r, j] <= 1e-12 * sigma2[r]:
                continue
            if not cross[r, j] - rates[j] > SIC_SLACK:
                violations.append((r, j))
    return NomaRates(rates, cross, not violations, violations)


def bb_noma_rates(h, w, powers, noise, ordering: SicOrdering) -> NomaRates:
    """Beamformer-based NOMA: all users in one SIC group."""
    return noma_rates(h, w, powers, noise, ordering)


def clusterfree_rates(h, w, powers, noise, ordering: SicOrdering, assignment: ClusterAssignment):
    return noma_rates(h, w, powers, noise, ordering, assignment).rates


def cluster_noma_rates(h, cluster_beams, powers, noise, ordering: SicOrdering, assignment: ClusterAssignment):
    """Rates when all users of a cluster share that cluster's beamformer."""
    beams = np.asarray(cluster_beams, dtype=complex)
    if beams.shape[1] != assignment.n_clusters:
        raise ValueError("need one beamformer per cluster")
    return clusterfree_rates(h, beams[:, assignment.labels()], powers, noise, ordering, assignment)


def order_by_effective_gain(h, w, assignment: ClusterAssignment) -> SicOrdering:
    """Per-cluster decoding order from effective gains ``|h_k^H w_k|^2``.

    Weaker users' messages are decoded first, so the strongest user of a
    cluster cancels everybody else.
    """
    h = np.asarray(h, dtype=complex)
    w = np.asarray(w, dtype=complex)
    gains = np.abs(np.sum(h.conj() * w, axis=0)) ** 2
    orders = [sorted(g, key=lambda u: (gains[u], u)) for g in assignment.clusters]
    return SicOrdering.from_orders(orders, h.shape[1])


def clusters_by_correlation(h, threshold=0.5) -> ClusterAssignment:
    """Greedy grouping: a user joins the first cluster whose founding member
    it correlates with at least ``threshold``."""
    h = np.asarray(h, dtype=complex)
    groups = []
    for user in range(h.shape[1]):
        for g in groups:
            if correlation_rho(h[:, g[0]], h[:, user]) >= threshold:
                g.append(user)
                break
        else:
            groups.append([user])
    return ClusterAssignment(tuple(tuple(g) for g in groups))


@dataclass
class ZfDesign:
    feasible: bool
    condition: str
    detail: str = ""
    vectors: object = None
    residual: float = 0.0


RANK_ONE_CONDITION = "N_BS >= N_Cluster"
FULL_RANK_CONDITION = "N_BS >= max_c sum_{c' != c} K_c'"
USER_SIDE_CONDITION = "N_U >= N_Cluster"


def _null_space(m, n):
    if m.shape[1] == 0:
        return np.eye(n, dtype=complex)
    u, s, _ = np.linalg.svd(m, full_matrices=True)
    tol = max(m.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    return u[:, rank:]


def intercluster_zf(h, assignment: ClusterAssignment) -> ZfDesign:
    """BS-side cluster beamformers that null every other cluster's users.

    Each beamformer is the unit vector in the null space of the other
    clusters' channels that collects the most energy from its own cluster.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    tol = 1e-10
    rank_one = all(np.linalg.matrix_rank(h[:, list(g)], tol=1e-9 * np.abs(h).max()) == 1
                   for g in assignment.clusters)
    condition = RANK_ONE_CONDITION if rank_one else FULL_RANK_CONDITION
    beams = np.zeros((n, assignment.n_clusters), dtype=complex)
    for c, group in enumerate(assignment.clusters):
        others = [u for u in range(h.shape[1]) if u not in group]
        basis = _null_space(h[:, others], n)
        if basis.shape[1] == 0:
            return ZfDesign(False, condition,
                            f"cluster {c}: other-cluster channels span all {n} antennas")
        proj = basis.conj().T @ h[:, list(group)]
        u, _, _ = np.linalg.svd(proj)
        beam = basis @ u[:, 0]
        if np.abs(h[:, list(group)].conj().T @ beam).min() <= tol * np.linalg.norm(h[:, list(group)], axis=0).max():
            return ZfDesign(False, condition,
                            f"cluster {c}: a member's channel is orthogonal to the nulling subspace")
        beams[:, c] = beam
    labels = assignment.labels()
    leak = np.abs(h.conj().T @ beams)
    leak[np.arange(h.shape[1]), labels] = 0
    return ZfDesign(True, condition, "", beams, float(leak.max()))


def intercluster_zf_user(channels, cluster_beams, assignment: ClusterAssignment) -> ZfDesign:
    """Receive equalizers that null other clusters' beams at each user.

    ``channels[k]`` is user ``k``'s ``N_BS x N_U`` channel matrix.
    """
    beams = np.asarray(cluster_beams, dtype=complex)
    labels = assignment.labels()
    n_clusters = assignment.n_clusters
    equalizers = []
    worst = 0.0
    for user, hk in enumerate(channels):
        hk = np.asarray(hk, dtype=complex)
        n_u = hk.shape[1]
        if n_u < n_clusters:
            return ZfDesign(False, USER_SIDE_CONDITION,
                            f"user {user} has {n_u} antennas for {n_clusters} clusters")
        seen = hk.conj().T @ beams  # N_U x C effective beams at this user
        c = labels[user]
        others = [j for j in range(n_clusters) if j != c]
        basis = _null_space(seen[:, others], n_u)
        target = basis.conj().T @ seen[:, c]
        if basis.shape[1] == 0 or np.linalg.norm(target) <= 1e-10 * np.linalg.norm(seen[:, c]):
            return ZfDesign(False, USER_SIDE_CONDITION,
                            f"user {user}: own cluster beam lies in the span of the others")
        v = basis @ target
        v /= np.linalg.norm(v)
        equalizers.append(v)
        if others:
            worst = max(worst, float(np.abs(v.conj() @ seen[:, others]).max()))
    return ZfDesign(True, USER_SIDE_CONDITION, "", equalizers, worst)


def require(design: ZfDesign) -> ZfDesign:
    if not design.feasible:
        raise InfeasibleError(f"inter-cluster zero-forcing infeasible ({design.condition}): {design.detail}")
    return design
