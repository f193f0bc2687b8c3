"""Shared numeric primitives.

Rates, unit conversions, the uniform linear array geometry used by every
channel model, far-field steering vectors and the field-region boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.constants import speed_of_light

__all__ = [
    "SPEED_OF_LIGHT",
    "ConvergenceError",
    "InfeasibleError",
    "ArrayGeometry",
    "Position",
    "FieldBoundaries",
    "shannon_rate",
    "db_to_linear",
    "linear_to_db",
    "steering_vector",
    "rayleigh_distance",
    "reactive_distance",
    "field_boundaries",
    "keyed_rng",
    "log2det",
]

SPEED_OF_LIGHT = speed_of_light


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""


class InfeasibleError(ValueError):
    """A design problem has no solution for the given dimensions or inputs."""


def shannon_rate(x):
    """Return ``log2(1 + x)`` for a nonnegative SNR (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("SNR must be nonnegative")
    out = np.log1p(x) / np.log(2.0)
    return float(out) if out.ndim == 0 else out


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array centred at the origin.

    Element ``i`` sits at ``i * spacing`` on the array axis, with
    ``i = -n_half .. n_half``. An even element count is only accepted when
    ``allow_even`` is set; its indices then run ``-N/2 .. N/2 - 1``.

    Parameters
    ----------
    n_antennas : int
        Number of elements ``N``.
    spacing : float
        Inter-element spacing ``d`` in meters.
    wavelength : float
        Carrier wavelength in meters.
    allow_even : bool
        Accept an even ``N`` (beamspace experiments use power-of-two arrays).
    """

    n_antennas: int
    spacing: float
    wavelength: float
    allow_even: bool = False

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ValueError("n_antennas must be a positive integer")
        if self.n_antennas % 2 == 0 and not self.allow_even:
            raise ValueError(
                f"n_antennas must be odd (N = 2*n_half + 1), got {self.n_antennas}"
            )
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def half_wavelength(cls, n_antennas, wavelength, allow_even=False):
        return cls(n_antennas, wavelength / 2, wavelength, allow_even)

    @property
    def n_half(self) -> int:
        return (self.n_antennas - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_antennas) - self.n_antennas // 2

    @property
    def aperture(self) -> float:
        return (self.n_antennas - 1) * self.spacing

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    def with_size(self, n_antennas: int) -> "ArrayGeometry":
        return ArrayGeometry(n_antennas, self.spacing, self.wavelength, self.allow_even)


@dataclass(frozen=True)
class Position:
    """User location in polar coordinates (range in meters, angle in radians
    measured from the array axis)."""

    range_r: float
    angle_theta: float = np.pi / 2

    def __post_init__(self):
        if not self.range_r > 0:
            raise ValueError("range must be positive")

    @property
    def xy(self) -> tuple[float, float]:
        return (
            self.range_r * np.cos(self.angle_theta),
            self.range_r * np.sin(self.angle_theta),
        )


class FieldBoundaries(NamedTuple):
    rayleigh: float
    reactive: float


def steering_vector(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Far-field array response with entries ``exp(-j k (i-1) d cos(theta))``.

    The ``(i-1)`` offset is a common phase and does not affect any
    magnitude or correlation.
    """
    phase = geom.wavenumber * (geom.indices - 1) * geom.spacing * np.cos(theta)
    return np.exp(-1j * phase)


def rayleigh_distance(aperture, wavelength):
    return 2.0 * aperture**2 / wavelength


def reactive_distance(aperture, wavelength):
    return 0.62 * np.sqrt(aperture**3 / wavelength)


def field_boundaries(geom: ArrayGeometry) -> FieldBoundaries:
    """Rayleigh distance and reactive near-field boundary of ``geom``."""
    return FieldBoundaries(
        rayleigh_distance(geom.aperture, geom.wavelength),
        reactive_distance(geom.aperture, geom.wavelength),
    )


def keyed_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Draws for a given key tuple never depend on the order in which other
    keys are consumed, so results do not change with thread count.
    """
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError("seed and keys must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def log2det(matrix) -> float:
    """log2 of the determinant of a Hermitian positive definite matrix."""
    matrix = np.asarray(matrix)
    matrix = (matrix + matrix.conj().T) / 2
    chol = np.linalg.cholesky(matrix)
    return float(2.0 * np.sum(np.log2(np.abs(np.diagonal(chol)))))
