"""Field primitives: 2D free-field Green's function, plane waves, the
plane-wave angular density of a point source, and the modal truncation
rule that ties them together."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import hankel2_sym_range, hankel2_zero

DEFAULT_SPEED_OF_SOUND = 343.0

# points closer than this to a source are treated as coincident
_SINGULARITY_EPS = 1e-12


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing positive frequencies and the medium speed."""

    frequencies: np.ndarray          # Hz, (K,)
    c: float = DEFAULT_SPEED_OF_SOUND

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64)
        object.__setattr__(self, "frequencies", f)
        if f.ndim != 1 or len(f) == 0:
            raise ValueError("frequencies must be a non-empty 1D array")
        if np.any(f <= 0) or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be positive and increasing")
        if self.c <= 0:
            raise ValueError("speed of sound must be positive")

    @classmethod
    def uniform(cls, start: float, step: float, count: int,
                c: float = DEFAULT_SPEED_OF_SOUND) -> "FrequencyGrid":
        return cls(frequencies=start + step * np.arange(count), c=c)

    @property
    def angular(self) -> np.ndarray:
        return 2 * np.pi * self.frequencies

    @property
    def k(self) -> int:
        return len(self.frequencies)

    def nearest_index(self, frequency: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - frequency)))


@dataclass(frozen=True)
class Source:
    """Point source outside the listening region.

    spectrum holds A(omega_k) per grid frequency; None means unit
    spectrum at every frequency.
    """

    position: np.ndarray            # (2,)
    spectrum: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(2)
        object.__setattr__(self, "position", p)
        if self.spectrum is not None:
            s = np.asarray(self.spectrum, dtype=np.complex128)
            object.__setattr__(self, "spectrum", s)

    @property
    def rho(self) -> float:
        return float(np.hypot(self.position[0], self.position[1]))

    @property
    def theta(self) -> float:
        return float(np.arctan2(self.position[1], self.position[0]))

    def amplitude(self, freq_index: int) -> complex:
        if self.spectrum is None:
            return 1.0 + 0.0j
        return complex(self.spectrum[freq_index])


@dataclass(frozen=True)
class PlaneWaveSet:
    """Uniformly sampled plane-wave directions over an angular window."""

    directions: np.ndarray           # theta_n, (N,)
    order: int                       # modal truncation order M
    window: tuple                    # (theta_min, theta_max)

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=np.float64)
        object.__setattr__(self, "directions", d)
        if len(d) < 2 * self.order + 1:
            raise ValueError("need at least 2M+1 plane-wave directions")

    @classmethod
    def full_circle(cls, order: int) -> "PlaneWaveSet":
        n = 2 * order + 1
        return cls(directions=2 * np.pi * np.arange(n) / n, order=order,
                   window=(0.0, 2 * np.pi))

    @classmethod
    def windowed(cls, order: int, theta_min: float, theta_max: float) -> "PlaneWaveSet":
        """Midpoint sampling, so a single direction lands on the window centre."""
        n = 2 * order + 1
        width = theta_max - theta_min
        if width <= 0:
            raise ValueError("window must have positive width")
        d = theta_min + (np.arange(n) + 0.5) * width / n
        return cls(directions=d, order=order, window=(theta_min, theta_max))

    @property
    def width(self) -> float:
        return self.window[1] - self.window[0]


def green2d(r, r_src, omega: float, c: float = DEFAULT_SPEED_OF_SOUND):
    """Free-field 2D Green's function (j/4) H_0^(2)(k |r - r_src|).

    Accepts a single point or an (N, 2) array of points; raises on
    coincident point/source pairs.
    """
    r = np.asarray(r, dtype=np.float64)
    src = np.asarray(r_src, dtype=np.float64).reshape(2)
    single = r.ndim == 1
    pts = np.atleast_2d(r)
    d = np.hypot(pts[:, 0] - src[0], pts[:, 1] - src[1])
    if np.any(d < _SINGULARITY_EPS):
        raise ValueError("field point coincides with the source position")
    g = 0.25j * hankel2_zero((omega / c) * d)
    return g[0] if single else g


def green_matrix(points: np.ndarray, sources: np.ndarray, omega: float,
                 c: float = DEFAULT_SPEED_OF_SOUND) -> np.ndarray:
    """Matrix of Green's-function values, shape (n_points, n_sources)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    srcs = np.atleast_2d(np.asarray(sources, dtype=np.float64))
    d = np.linalg.norm(pts[:, None, :] - srcs[None, :, :], axis=-1)
    if np.any(d < _SINGULARITY_EPS):
        raise ValueError("a field point coincides with a source position")
    return 0.25j * hankel2_zero((omega / c) * d.ravel()).reshape(d.shape)


def plane_wave_field(r, theta: float, omega: float,
                     c: float = DEFAULT_SPEED_OF_SOUND):
    """Unit plane wave exp(j k <r, k_hat(theta)>), k_hat = [cos, sin]."""
    r = np.asarray(r, dtype=np.float64)
    single = r.ndim == 1
    pts = np.atleast_2d(r)
    phase = (omega / c) * (pts[:, 0] * np.cos(theta) + pts[:, 1] * np.sin(theta))
    w = np.exp(1j * phase)
    return w[0] if single else w


def truncation_order(omega: float, rho: float,
                     c: float = DEFAULT_SPEED_OF_SOUND) -> int:
    """Smallest modal order bounding the reproduction error in a disk of
    radius rho: ceil(e * (omega/c) * rho / 2)."""
    if omega <= 0 or rho <= 0 or c <= 0:
        raise ValueError("omega, rho and c must be positive")
    return int(math.ceil(math.e * (omega / c) * rho / 2))


def herglotz_coefficients(omega: float, source: Source, M: int,
                          c: float = DEFAULT_SPEED_OF_SOUND,
                          amplitude: complex = 1.0) -> np.ndarray:
    """Circular-harmonic coefficients c_m, m = -M..M, of the plane-wave
    density of a point source:

        phi(theta) = sum_m c_m exp(j m (theta - theta_z)),
        c_m = A * j^(-m) * (j/4) * H_m^(2)(k rho_z).
    """
    if M < 0:
        raise ValueError("M must be >= 0")
    k = omega / c
    if k * source.rho <= 0:
        raise ValueError("source must lie away from the origin")
    ms = np.arange(-M, M + 1)
    H = hankel2_sym_range(M, k * source.rho)
    return amplitude * (1j) ** (-ms) * 0.25j * H


def herglotz_point_source(theta, omega: float, source: Source, M: int,
                          c: float = DEFAULT_SPEED_OF_SOUND,
                          amplitude: complex = 1.0):
    """Plane-wave angular density of a point source, truncated at order M.

    Vectorized over theta; the value depends on theta only through
    theta - theta_z.
    """
    cm = herglotz_coefficients(omega, source, M, c, amplitude)
    th = np.asarray(theta, dtype=np.float64)
    single = th.ndim == 0
    th = np.atleast_1d(th)
    ms = np.arange(-M, M + 1)
    phi = np.exp(1j * np.outer(th - source.theta, ms)) @ cm
    return phi[0] if single else phi
