"""Near-field analyses.

Analog-beamforming SNR of a user broadside to an extremely large array and
its closed-form approximations, antenna-count sweeps, hybrid SDMA with
phase-aligned analog beams, and continuous-aperture (CAP) transmission.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamforming import HybridConfig, hybrid_sinr, phase_aligned_analog
from .channels import cap_green, element_distances, farfield_los, nearfield_spd
from .foundation import ArrayGeometry, Position

VARIANTS = ("printed", "squared")


def analog_snr_direct(geom: ArrayGeometry, r, theta=np.pi / 2, power=1.0, beta_r=1.0, noise=1.0, r_ref=1.0):
    """SNR of phase-aligned analog beamforming, ``p beta r_ref^2 / (N sigma^2) |sum 1/r_i|^2``."""
    dist = element_distances(geom, Position(r, theta), "exact")
    total = np.sum(1.0 / dist)
    return float(power * beta_r * r_ref**2 / (geom.n_antennas * noise) * total**2)


def analog_snr_closed(geom: ArrayGeometry, r, power=1.0, beta_r=1.0, noise=1.0, r_ref=1.0, variant="squared"):
    """Integral approximation of :func:`analog_snr_direct` for a broadside user.

    With ``x = n_half d / r`` the sum of inverse distances becomes
    ``(2/d) asinh(x) * d``. ``"squared"`` keeps the square of that integral;
    ``"printed"`` uses ``2 asinh(x)`` unsquared.
    """
    x = geom.n_half * geom.spacing / r
    scale = power * beta_r * r_ref**2 / (geom.n_antennas * noise * geom.spacing**2)
    if variant == "squared":
        return float(scale * (2 * np.arcsinh(x)) ** 2)
    if variant == "printed":
        return float(scale * 2 * np.arcsinh(x))
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def asinh_ratio(x):
    """``f(x) = ln(x + sqrt(x^2 + 1)) / x``."""
    x = np.asarray(x, dtype=float)
    return np.arcsinh(x) / x


def radiating_antenna_limit(r, spacing, wavelength) -> float:
    """Largest array size that keeps range ``r`` outside the reactive near field."""
    return float(wavelength ** (1 / 3) / spacing * (r / 0.62) ** (2 / 3))


def analog_snr_curve(spacing, wavelength, r, n_max, power=1.0, beta_r=1.0, noise=1.0, r_ref=1.0):
    """Broadside analog SNR for every odd ``N <= n_max`` via cumulative sums.

    Returns ``(counts, snr)``.
    """
    half = np.arange(0, (n_max - 1) // 2 + 1)
    inv = 1.0 / np.hypot(r, half * spacing)
    sums = 2 * np.cumsum(inv) - inv[0]
    counts = 2 * half + 1
    return counts, power * beta_r * r_ref**2 / (counts * noise) * sums**2


@dataclass(frozen=True)
class SweepExtrema:
    counts: np.ndarray
    snr: np.ndarray
    argmax: int
    n_rad: float
    reference_n_star: float

    @property
    def unimodal(self) -> bool:
        return is_unimodal(self.snr)


def is_unimodal(values) -> bool:
    """True when successive differences change sign at most once, from + to -."""
    diff = np.diff(np.asarray(values, dtype=float))
    sign = np.sign(diff[diff != 0])
    changes = np.count_nonzero(sign[1:] != sign[:-1])
    return changes == 0 or (changes == 1 and sign[0] > 0)


def snr_sweep_extrema(spacing, wavelength, r, n_max, power=1.0, beta_r=1.0, noise=1.0) -> SweepExtrema:
    """Numerical argmax of the analog SNR over odd array sizes.

    ``reference_n_star`` is ``3.728 r / d``, reported only for comparison.
    """
    if n_max < 3:
        raise ValueError("n_max must be at least 3")
    counts, snr = analog_snr_curve(spacing, wavelength, r, n_max, power, beta_r, noise)
    return SweepExtrema(
        counts,
        snr,
        int(counts[np.argmax(snr)]),
        radiating_antenna_limit(r, spacing, wavelength),
        3.728 * r / spacing,
    )


def _channels(geom, positions, mode, beta_r):
    if mode == "nearfield-exact":
        return np.column_stack([nearfield_spd(geom, p, beta_r).entries for p in positions])
    if mode == "farfield":
        return np.column_stack([farfield_los(geom, p, beta_r).entries for p in positions])
    raise ValueError(f"unknown channel mode {mode!r}")


def hb_sdma_design(h, power) -> HybridConfig:
    """Phase-aligned analog beams and digital MRT on the effective channel,
    each user radiating ``power / K``."""
    h = np.asarray(h, dtype=complex)
    k = h.shape[1]
    f = phase_aligned_analog(h, k)
    w = f.conj().T @ h
    radiated = np.linalg.norm(f @ w, axis=0)
    w = w / radiated * np.sqrt(power / k)
    return HybridConfig(f, w, power)


def nearfield_hb_sdma_sumrate(positions, geom: ArrayGeometry, power=1.0, noise=1.0, mode="nearfield-exact",
                              beta_r=1.0, n_rf=None) -> float:
    """Sum rate of hybrid SDMA with one RF chain per user.

    ``mode`` selects the channel model used both to build the beams and to
    evaluate the rates.
    """
    k = len(positions)
    if n_rf is not None and n_rf != k:
        raise ValueError(f"one RF chain per user is required (N_RF={n_rf}, K={k})")
    h = _channels(geom, positions, mode, beta_r)
    _, rates = hybrid_sinr(hb_sdma_design(h, power), h, noise)
    return float(np.sum(rates))


# continuous-aperture arrays ---------------------------------------------------

@dataclass(frozen=True)
class CapAperture:
    """Continuous linear aperture ``[-A/2, A/2]`` on the array axis.

    ``panels`` is the starting number of Gauss-Legendre panels; it is raised
    so that no panel exceeds ``wavelength / 8``.
    """

    length: float
    wavelength: float
    panels: int = 64
    nodes: int = 8
    rtol: float = 1e-6
    max_doublings: int = 8

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("aperture length must be positive")
        if self.panels < 64:
            raise ValueError("quadrature resolution must be at least 64 panels")

    def grid(self, panels):
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        edges = np.linspace(-self.length / 2, self.length / 2, panels + 1)
        half = np.diff(edges) / 2
        mid = (edges[1:] + edges[:-1]) / 2
        return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()

    def start_panels(self):
        return max(self.panels, int(np.ceil(self.length / (self.wavelength / 8))))

    def integrate(self, func):
        """Integrate ``func`` over the aperture, doubling the panel count
        until two successive results agree to ``rtol``.

        ``func`` may return an array of integrands stacked on the last axis.
        Returns ``(value, panels)``.
        """
        panels = self.start_panels()
        x, w = self.grid(panels)
        prev = func(x) @ w
        for _ in range(self.max_doublings):
            panels *= 2
            x, w = self.grid(panels)
            cur = func(x) @ w
            scale = np.maximum(np.abs(cur), np.finfo(float).tiny)
            if np.all(np.abs(cur - prev) <= self.rtol * scale + 1e-300):
                return cur, panels
            prev = cur
        raise ArithmeticError("aperture quadrature did not converge")


@dataclass(frozen=True)
class CapCurrent:
    """Current ``scale * conj(G(x))`` focused on ``position``; ``scale == 0``
    is a switched-off source."""

    position: Position
    wavelength: float
    scale: float

    def __call__(self, x):
        return self.scale * np.conj(cap_green(x, self.position, self.wavelength))


def green_energy(aperture: CapAperture, position: Position) -> float:
    value, _ = aperture.integrate(lambda x: np.abs(cap_green(x, position, aperture.wavelength)) ** 2)
    return float(value)


def cap_matched_current(position: Position, aperture: CapAperture, power_share) -> CapCurrent:
    """Matched current with ``int |j|^2 = power_share``."""
    energy = green_energy(aperture, position)
    return CapCurrent(position, aperture.wavelength, float(np.sqrt(power_share / energy)))


def current_power(aperture: CapAperture, current) -> float:
    value, _ = aperture.integrate(lambda x: np.abs(current(x)) ** 2)
    return float(value)


def cap_responses(aperture: CapAperture, currents, positions):
    """``M[k, j] = int G_k(x) j_j(x) dx``: source ``j`` observed at user ``k``."""
    k = len(positions)

    def integrand(x):
        g = np.stack([cap_green(x, p, aperture.wavelength) for p in positions])
        j = np.stack([c(x) for c in currents])
        return (g[:, None, :] * j[None, :, :]).reshape(k * len(currents), -1)

    value, panels = aperture.integrate(integrand)
    return value.reshape(k, len(currents)), panels


def cap_sinr(aperture: CapAperture, currents, positions, noise, power=None):
    """Per-user SINR of a CAP transmitter with one current per user.

    When ``power`` is given the total radiated power must not exceed it by
    more than ``1e-6`` relative.
    """
    if len(currents) != len(positions):
        raise ValueError("need one current per user")
    if power is not None:
        used = sum(current_power(aperture, c) for c in currents)
        if used > power * (1 + 1e-6):
            raise ValueError(f"current power {used:.9g} exceeds budget {power:.9g}")
    sigma2 = np.broadcast_to(np.asarray(noise, dtype=float), (len(positions),))
    resp, _ = cap_responses(aperture, currents, positions)
    gains = np.abs(resp) ** 2
    signal = np.diag(gains).copy()
    return signal / (gains.sum(axis=1) - signal + sigma2)


def cap_leakage_ratio(aperture: CapAperture, intended: Position, other: Position) -> float:
    """``|int G_other j|^2 / |int G_intended j|^2`` for a current matched to ``intended``."""
    cur = cap_matched_current(intended, aperture, 1.0)
    resp, _ = cap_responses(aperture, [cur], [intended, other])
    return float(abs(resp[1, 0]) ** 2 / abs(resp[0, 0]) ** 2)


def spd_leakage_ratio(geom: ArrayGeometry, intended: Position, other: Position) -> float:
    """Same ratio for MRT on exact spherical-wave channels."""
    h1 = nearfield_spd(geom, intended).entries
    h2 = nearfield_spd(geom, other).entries
    return float(abs(np.vdot(h2, h1)) ** 2 / abs(np.vdot(h1, h1)) ** 2)
