"""Linear multiuser beamforming.

Channels are ``N_BS x K`` matrices whose column ``k`` is user ``k``'s
channel. Uplink combiners and downlink precoders are returned with unit-norm
columns, so powers are always passed separately.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .foundation import InfeasibleError, shannon_rate

UPLINK_METHODS = ("mrc", "zf", "lmmse")
DOWNLINK_METHODS = ("mrt", "zf", "rzf", "slnr", "lmmse")
ZF_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class PrecoderSet:
    vectors: np.ndarray
    powers: np.ndarray
    method: str

    @property
    def n_users(self) -> int:
        return self.vectors.shape[1]


def _channel_matrix(h):
    h = np.asarray(h, dtype=complex)
    return h.reshape(-1, 1) if h.ndim == 1 else h


def _per_user(value, k):
    return np.broadcast_to(np.asarray(value, dtype=float), (k,)).copy()


def _normalize_columns(m):
    norms = np.linalg.norm(m, axis=0)
    if np.any(norms == 0):
        raise ValueError("beamforming vector of zero norm")
    return m / norms


def _zf_matrix(h):
    n, k = h.shape
    if k > n:
        raise InfeasibleError(f"zero-forcing needs at least as many antennas as users ({n} < {k})")
    gram = h.conj().T @ h
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > ZF_CONDITION_LIMIT:
        raise InfeasibleError(f"channel Gram matrix is ill-conditioned (condition number {cond:.3g})")
    return h @ np.linalg.inv(gram)


def uplink_combiner(h, powers=1.0, noise=1.0, method="lmmse") -> np.ndarray:
    h = _channel_matrix(h)
    n, k = h.shape
    p = _per_user(powers, k)
    if method == "mrc":
        v = h.copy()
    elif method == "zf":
        v = _zf_matrix(h)
    elif method == "lmmse":
        cov = (h * p) @ h.conj().T + noise * np.eye(n)
        v = np.linalg.solve(cov, h)
    else:
        raise ValueError(f"unknown uplink method {method!r}")
    return _normalize_columns(v)


def uplink_sinr(h, combiners, powers=1.0, noise=1.0) -> np.ndarray:
    h = _channel_matrix(h)
    v = _channel_matrix(combiners)
    k = h.shape[1]
    p = _per_user(powers, k)
    vnorm = np.linalg.norm(v, axis=0) ** 2
    if np.any(vnorm == 0):
        raise ValueError("combiner of zero norm")
    gains = np.abs(v.conj().T @ h) ** 2 * p  # [k, j]: user j seen through combiner k
    signal = np.diag(gains).copy()
    interference = gains.sum(axis=1) - signal
    return signal / (interference + noise * vnorm)


def uplink_rates(h, combiners, powers=1.0, noise=1.0) -> np.ndarray:
    return shannon_rate(uplink_sinr(h, combiners, powers, noise))


def zf_uplink_rates(h, powers=1.0, noise=1.0) -> np.ndarray:
    """Zero-forcing rates through the diagonal of the inverse Gram matrix."""
    h = _channel_matrix(h)
    p = _per_user(powers, h.shape[1])
    _zf_matrix(h)
    diag = np.diag(np.linalg.inv(h.conj().T @ h)).real
    return shannon_rate(p / (noise * diag))


def lmmse_uplink_rates(h, powers=1.0, noise=1.0) -> np.ndarray:
    """Rates of the MMSE receiver with interference-plus-noise whitening."""
    h = _channel_matrix(h)
    n, k = h.shape
    p = _per_user(powers, k)
    rates = np.empty(k)
    for user in range(k):
        others = np.delete(np.arange(k), user)
        cov = (h[:, others] * p[others]) @ h[:, others].conj().T + noise * np.eye(n)
        hk = h[:, user]
        rates[user] = shannon_rate(max(p[user] * np.vdot(hk, np.linalg.solve(cov, hk)).real, 0.0))
    return rates


def downlink_precoder(h, method="mrt", powers=1.0, noise=1.0, rzf_alpha=None) -> PrecoderSet:
    """Unit-norm downlink precoders.

    SLNR uses the closed form ``(p_k H H^H + sigma_k^2 I)^{-1} h_k``; with
    equal powers and noise it points in the same direction as the LMMSE
    precoder. RZF defaults its regularizer to ``K * mean(sigma^2) / sum(p)``.
    """
    h = _channel_matrix(h)
    n, k = h.shape
    p = _per_user(powers, k)
    sigma2 = _per_user(noise, k)
    if method == "mrt":
        g = h.copy()
    elif method == "zf":
        g = _zf_matrix(h)
    elif method == "rzf":
        alpha = k * sigma2.mean() / p.sum() if rzf_alpha is None else rzf_alpha
        if not alpha > 0:
            raise ValueError("RZF regularizer must be positive")
        g = h @ np.linalg.inv(alpha * np.eye(k) + h.conj().T @ h)
    elif method == "slnr":
        gram = h @ h.conj().T
        g = np.column_stack([
            np.linalg.solve(p[user] * gram + sigma2[user] * np.eye(n), h[:, user])
            for user in range(k)
        ])
    elif method == "lmmse":
        cov = (h * p) @ h.conj().T
        g = np.column_stack([
            np.linalg.solve(cov + sigma2[user] * np.eye(n), h[:, user]) for user in range(k)
        ])
    else:
        raise ValueError(f"unknown downlink method {method!r}")
    return PrecoderSet(_normalize_columns(g), p, method)


def downlink_sinr(h, precoders, powers=None, noise=1.0, budget=None) -> np.ndarray:
    h = _channel_matrix(h)
    k = h.shape[1]
    if isinstance(precoders, PrecoderSet):
        g = precoders.vectors
        p = precoders.powers if powers is None else _per_user(powers, k)
    else:
        g = _channel_matrix(precoders)
        p = _per_user(1.0 if powers is None else powers, k)
    sigma2 = _per_user(noise, k)
    if budget is not None:
        used = float(np.sum(p * np.linalg.norm(g, axis=0) ** 2))
        if used > budget * (1 + 1e-9):
            raise ValueError(f"transmit power {used:.6g} exceeds budget {budget:.6g}")
    gains = np.abs(h.conj().T @ g) ** 2 * p  # [k, j]: precoder j received by user k
    signal = np.diag(gains).copy()
    return signal / (gains.sum(axis=1) - signal + sigma2)


def downlink_rates(h, precoders, powers=None, noise=1.0, budget=None) -> np.ndarray:
    return shannon_rate(downlink_sinr(h, precoders, powers, noise, budget))


def slnr(h, g, user, power=1.0, noise=1.0) -> float:
    """Signal-to-leakage-plus-noise ratio of precoder ``g`` for ``user``."""
    h = _channel_matrix(h)
    g = np.asarray(g, dtype=complex)
    resp = np.abs(h.conj().T @ g) ** 2
    leak = resp.sum() - resp[user]
    return float(power * resp[user] / (power * leak + noise))


@dataclass(frozen=True)
class HybridConfig:
    """Analog phase-shifter network ``F`` and digital precoder ``W``.

    Every analog entry must have modulus ``1/sqrt(N_RF N_BS)`` and the
    radiated power ``trace(W^H F^H F W)`` must equal ``power``.
    """

    analog: np.ndarray
    digital: np.ndarray
    power: float

    def __post_init__(self):
        f = np.asarray(self.analog)
        w = np.asarray(self.digital)
        n_bs, n_rf = f.shape
        if w.shape[0] != n_rf:
            raise ValueError(f"digital precoder has {w.shape[0]} rows, expected {n_rf}")
        target = 1 / np.sqrt(n_rf * n_bs)
        dev = np.abs(np.abs(f) - target).max()
        if dev > 1e-9 * target:
            raise ValueError(
                f"analog entries must have modulus {target:.6g}; largest deviation {dev:.3g}"
            )
        radiated = np.trace(w.conj().T @ f.conj().T @ f @ w).real
        if abs(radiated - self.power) > 1e-9 * max(self.power, 1.0):
            raise ValueError(f"radiated power {radiated:.12g} differs from budget {self.power:.12g}")


def phase_aligned_analog(h, n_rf=None) -> np.ndarray:
    """Analog beamformer whose column ``k`` matches the phases of channel ``k``."""
    h = _channel_matrix(h)
    n_bs, k = h.shape
    n_rf = k if n_rf is None else n_rf
    if n_rf != k:
        raise ValueError("one RF chain per user is required")
    return np.exp(1j * np.angle(h)) / np.sqrt(n_rf * n_bs)


def hybrid_sinr(config: HybridConfig, h, noise=1.0):
    """Per-user SINR and rate of a hybrid precoder."""
    h = _channel_matrix(h)
    effective = config.analog @ config.digital
    sinr = downlink_sinr(h, effective, np.ones(h.shape[1]), noise)
    return sinr, shannon_rate(sinr)
