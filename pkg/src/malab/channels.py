"""Channel models and channel correlations.

Far-field (line of sight, isotropic scattering, sparse Rician), near-field
spherical-wave channels for spatially discrete arrays, the Green's function
of a continuous aperture, and the DFT beamspace transform.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .foundation import (
    ArrayGeometry,
    Position,
    field_boundaries,
    keyed_rng,
    steering_vector,
)

MODELS = ("farfield-los", "isotropic", "rician-sparse", "nearfield-exact", "nearfield-approx")


@dataclass(frozen=True)
class ChannelVector:
    entries: np.ndarray
    model: str
    position: Position
    pathloss_ref: float = 1.0
    flags: tuple = ()

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown channel model {self.model!r}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("channel entries must be finite")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __len__(self):
        return len(self.entries)


def stack_channels(channels) -> np.ndarray:
    """Column-stack channel vectors into an ``N x K`` matrix."""
    return np.column_stack([np.asarray(h) for h in channels])


def _amplitude(pos: Position, beta_r: float, r_ref: float) -> float:
    return np.sqrt(beta_r) * r_ref / pos.range_r


def farfield_los(geom: ArrayGeometry, pos: Position, beta_r=1.0, r_ref=1.0) -> ChannelVector:
    """Planar-wave line-of-sight channel ``sqrt(beta_r) r_ref / r * a(theta)``.

    Positions inside the Rayleigh distance are allowed but flagged.
    """
    flags = ()
    if pos.range_r < field_boundaries(geom).rayleigh:
        flags = ("inside-rayleigh-distance",)
    h = _amplitude(pos, beta_r, r_ref) * steering_vector(geom, pos.angle_theta)
    return ChannelVector(h, "farfield-los", pos, beta_r, flags)


def isotropic(geom: ArrayGeometry, pos: Position, beta_r=1.0, seed=0, user=0, draw=0, r_ref=1.0):
    """Rich-scattering channel with i.i.d. unit-variance complex Gaussian entries."""
    rng = keyed_rng(seed, user, draw)
    n = geom.n_antennas
    g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return ChannelVector(_amplitude(pos, beta_r, r_ref) * g, "isotropic", pos, beta_r)


@dataclass(frozen=True)
class RicianParams:
    """Rician factor, line-of-sight angle and the scattered paths of one user."""

    k_factor: float
    los_angle: float
    nlos_angles: tuple = field(default_factory=tuple)
    nlos_gains: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.k_factor < 0:
            raise ValueError("Rician factor must be nonnegative")
        if len(self.nlos_angles) != len(self.nlos_gains):
            raise ValueError("need one gain per scattered path")
        if len(self.nlos_angles) < 1:
            raise ValueError("at least one scattered path is required")

    @property
    def n_paths(self) -> int:
        return len(self.nlos_angles)

    @classmethod
    def sample(cls, k_factor, n_paths, los_angle, seed=0, user=0, unit_gains=False):
        """Draw path angles uniformly in (-pi, pi] and CN(0, 1) gains.

        With ``unit_gains`` every path gain is set to one and only the
        angles are random.
        """
        rng = keyed_rng(seed, user)
        angles = np.pi - 2 * np.pi * rng.random(n_paths)
        if unit_gains:
            gains = np.ones(n_paths, dtype=complex)
        else:
            gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2)
        return cls(float(k_factor), float(los_angle), tuple(angles), tuple(gains))


def rician_sparse(geom: ArrayGeometry, pos: Position, params: RicianParams, beta_r=1.0, r_ref=1.0):
    k = params.k_factor
    h = np.sqrt(k / (1 + k)) * steering_vector(geom, params.los_angle)
    scatter = np.zeros(geom.n_antennas, dtype=complex)
    for angle, gain in zip(params.nlos_angles, params.nlos_gains):
        scatter += gain * steering_vector(geom, angle)
    h = h + np.sqrt(1 / ((1 + k) * params.n_paths)) * scatter
    return ChannelVector(_amplitude(pos, beta_r, r_ref) * h, "rician-sparse", pos, beta_r)


def element_distances(geom: ArrayGeometry, pos: Position, mode="exact") -> np.ndarray:
    """Distance from each array element to ``pos``.

    ``mode="quadratic"`` returns the second-order (Fresnel) expansion.
    """
    r, theta = pos.range_r, pos.angle_theta
    x = geom.indices * geom.spacing
    if mode == "exact":
        return np.sqrt((r * np.cos(theta) - x) ** 2 + (r * np.sin(theta)) ** 2)
    if mode == "quadratic":
        return r - x * np.cos(theta) + x**2 * np.sin(theta) ** 2 / (2 * r)
    raise ValueError(f"unknown distance mode {mode!r}")


def nearfield_spd(geom: ArrayGeometry, pos: Position, beta_r=1.0, mode="exact", r_ref=1.0,
                  uniform_power_distance=None) -> ChannelVector:
    """Spherical-wave line-of-sight channel of a spatially discrete array.

    Entry ``i`` is ``sqrt(beta_r) r_ref / r_i * exp(-j 2 pi r_i / lambda)``
    with ``r_i`` the exact element distance or its quadratic expansion.
    The quadratic mode is flagged when the user is closer than ``10 d`` or
    closer than ``uniform_power_distance`` (default ten apertures).
    """
    dist = element_distances(geom, pos, mode)
    flags = []
    if mode == "quadratic":
        if pos.range_r < 10 * geom.spacing:
            flags.append("range-below-10-spacings")
        limit = 10 * geom.aperture if uniform_power_distance is None else uniform_power_distance
        if pos.range_r < limit:
            flags.append("inside-uniform-power-distance")
    h = np.sqrt(beta_r) * r_ref / dist * np.exp(-1j * geom.wavenumber * dist)
    model = "nearfield-exact" if mode == "exact" else "nearfield-approx"
    return ChannelVector(h, model, pos, beta_r, tuple(flags))


def cap_green(x, pos: Position, wavelength, mode="exact"):
    """Green's function from aperture point(s) ``x`` (meters on the array
    axis) to ``pos``."""
    x = np.asarray(x, dtype=float)
    r, theta = pos.range_r, pos.angle_theta
    k = 2 * np.pi / wavelength
    if mode == "exact":
        dist = np.sqrt((r * np.cos(theta) - x) ** 2 + (r * np.sin(theta)) ** 2)
        if np.any(dist == 0):
            raise ValueError("observation point lies on the aperture")
        return np.exp(-1j * k * dist) / (4 * np.pi * dist)
    if mode == "approx":
        phase = r - x * np.cos(theta) + x**2 * np.sin(theta) ** 2 / (2 * r)
        return np.exp(-1j * k * phase) / (4 * np.pi * r)
    raise ValueError(f"unknown mode {mode!r}")


def correlation_rho(h1, h2) -> float:
    h1 = np.asarray(h1).ravel()
    h2 = np.asarray(h2).ravel()
    n1, n2 = np.linalg.norm(h1), np.linalg.norm(h2)
    if n1 == 0 or n2 == 0:
        raise ValueError("correlation of a zero vector is undefined")
    return float(min(abs(np.vdot(h1, h2)) / (n1 * n2), 1.0))


def quadratic_phase_integral(linear, quadratic, small=1e-6):
    """Evaluate ``int_{-1/2}^{1/2} exp(j (linear x + quadratic x^2)) dx``.

    Completing the square reduces the integral to a difference of complex
    error functions. Nearly linear phases (``|quadratic| < small``) fall back
    to Gauss-Legendre quadrature, where the erf difference loses precision.
    """
    b, c = float(linear), float(quadratic)
    if abs(c) < small:
        if abs(c) == 0:
            return 1.0 + 0j if b == 0 else complex(2 * np.sin(b / 2) / b)
        n = 64 + int(abs(b))
        x, w = np.polynomial.legendre.leggauss(n)
        x, w = x / 2, w / 2
        return complex(np.sum(w * np.exp(1j * (b * x + c * x * x))))
    if c < 0:
        return np.conj(quadratic_phase_integral(-b, -c, small))
    s = np.sqrt(c)
    rot = np.exp(-1j * np.pi / 4)
    shift = b / (2 * c)
    upper = erf(rot * s * (0.5 + shift))
    lower = erf(rot * s * (-0.5 + shift))
    value = np.sqrt(np.pi) / 2 * np.conj(rot) / s * (upper - lower)
    return complex(value * np.exp(-1j * b * b / (4 * c)))


def nearfield_coefficients(geom: ArrayGeometry, pos1: Position, pos2: Position):
    """Per-index quadratic and linear phase coefficients of ``h1^H h2``
    under the quadratic distance model."""
    k, d = geom.wavenumber, geom.spacing
    t1, t2 = pos1.angle_theta, pos2.angle_theta
    quad = k * d**2 * (np.sin(t1) ** 2 / (2 * pos1.range_r) - np.sin(t2) ** 2 / (2 * pos2.range_r))
    lin = k * d * (np.cos(t2) - np.cos(t1))
    return quad, lin


def nearfield_rho_closed(geom: ArrayGeometry, pos1: Position, pos2: Position) -> float:
    """Near-field channel correlation from the continuous (integral) limit.

    The normalized inner product of two uniform-amplitude quadratic-phase
    channels is replaced by an integral over the normalized aperture and
    evaluated with complex error functions.
    """
    quad, lin = nearfield_coefficients(geom, pos1, pos2)
    n = geom.n_antennas
    if quad == 0 and lin == 0:
        return 1.0
    return float(min(abs(quadratic_phase_integral(lin * n, quad * n * n)), 1.0))


@dataclass(frozen=True)
class BeamspaceResult:
    matrix: np.ndarray
    dominant_index: np.ndarray
    transform: np.ndarray

    def energy_fraction(self) -> np.ndarray:
        power = np.abs(self.matrix) ** 2
        return power.max(axis=0) / power.sum(axis=0)


def beam_grid(n: int) -> np.ndarray:
    """Spatial frequencies ``(2i - N - 1) / N`` for ``i = 1..N``."""
    return (2 * np.arange(1, n + 1) - n - 1) / n


def dft_transform(geom: ArrayGeometry) -> np.ndarray:
    """Unitary beamspace matrix whose rows are the conjugated grid steering
    vectors, scaled by ``1/sqrt(N)``."""
    if not np.isclose(geom.spacing, geom.wavelength / 2, rtol=1e-12, atol=0):
        raise ValueError("beamspace transform requires half-wavelength spacing")
    psi = beam_grid(geom.n_antennas)
    basis = np.exp(-1j * np.pi * np.outer(geom.indices - 1, psi))
    return basis.conj().T / np.sqrt(geom.n_antennas)


def dominant_beam_index(n: int, cos_theta: float) -> int:
    """1-based grid index closest to ``cos_theta``; ties go to the lower index."""
    gap = np.abs(beam_grid(n) - cos_theta)
    return int(np.flatnonzero(gap <= gap.min() * (1 + 1e-12) + 1e-15)[0] + 1)


def beamspace_transform(channels, geom: ArrayGeometry) -> BeamspaceResult:
    """Map an ``N x K`` channel matrix to the beam domain.

    The dominant index of each user is the 1-based position of its largest
    beamspace coefficient (first one on exact ties).
    """
    h = np.asarray(channels)
    if h.ndim == 1:
        h = h[:, None]
    u = dft_transform(geom)
    b = u @ h
    power = np.abs(b) ** 2
    idx = np.argmax(power, axis=0) + 1
    return BeamspaceResult(b, idx, u)
