"""Driving-signal computation: model-based rendering for circular and
linear arrays, pressure matching, and field synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .acoustics import (
    DEFAULT_SPEED_OF_SOUND,
    PlaneWaveSet,
    Source,
    green_matrix,
    herglotz_point_source,
    plane_wave_field,
    truncation_order,
)
from .bessel import hankel2_sym_range
from .geometry import ArrayGeometry, PointSet

PROVENANCES = ("mr", "pm", "cnn")


@dataclass(frozen=True)
class DrivingSignals:
    """Per-loudspeaker, per-frequency complex driving coefficients."""

    values: np.ndarray               # (L_active, K)
    provenance: str                  # "mr" | "pm" | "cnn"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError("driving signals must be an (L, K) matrix")
        if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
            raise ValueError("driving signals must be finite")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def l_active(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FilterBank:
    """Per-loudspeaker filters for a set of plane-wave directions at one
    frequency; values indexed (loudspeaker, direction)."""

    values: np.ndarray               # (L_active, N)
    directions: np.ndarray           # (N,)
    omega: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", v)
        if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
            raise ValueError("filter bank must be finite")


@dataclass(frozen=True)
class PMOperator:
    """Pressure-matching operator C = (G^H G + lam I)^-1 G^H for one
    frequency; independent of the target field."""

    g_cp: np.ndarray                 # (I, L_active)
    c_cp: np.ndarray                 # (L_active, I)
    lam: float
    omega: float

    @property
    def n_control(self) -> int:
        return self.g_cp.shape[0]

    @property
    def l_active(self) -> int:
        return self.g_cp.shape[1]


def synthesize(array: ArrayGeometry, d: np.ndarray, points: PointSet,
               omega: float, c: float = DEFAULT_SPEED_OF_SOUND) -> np.ndarray:
    """Pressure produced at `points` by driving the active loudspeakers
    with the coefficients d at angular frequency omega."""
    d = np.asarray(d, dtype=np.complex128).reshape(-1)
    if len(d) != array.active_count:
        raise ValueError("driving length must equal the active loudspeaker count")
    g = green_matrix(points.points, array.active_positions, omega, c)
    return g @ d


def mr_circular_filter_bank(array: ArrayGeometry, pw: PlaneWaveSet,
                            omega: float,
                            c: float = DEFAULT_SPEED_OF_SOUND) -> FilterBank:
    """Closed-form plane-wave filters for a circular array.

    h_l(theta_n) = 4/(j L) sum_m j^m exp(j m (theta_l - theta_n)) / H_m^(2)(k rho_l)

    The j^m factor is required for the modal sum to synthesize the plane
    wave exp(j k <r, k_hat(theta_n)>): matching circular-harmonic
    coefficients of the Green's function against the Jacobi-Anger
    expansion of the target introduces exactly one factor j^m.
    L is the active loudspeaker count, which keeps the amplitude scale
    stable across decimation levels.
    """
    if array.family != "circular":
        raise ValueError("circular filter bank needs a circular array")
    k = omega / c
    M = pw.order
    ms = np.arange(-M, M + 1)
    H = hankel2_sym_range(M, k * array.radius)
    w = (1j) ** ms / H
    e_l = np.exp(1j * np.outer(array.active_angles, ms))      # (L, 2M+1)
    e_n = np.exp(-1j * np.outer(pw.directions, ms))           # (N, 2M+1)
    scale = 4.0 / (1j * array.active_count)
    values = scale * (e_l * w) @ e_n.T
    return FilterBank(values=values, directions=pw.directions, omega=omega)


def mr_circular_driving(array: ArrayGeometry, source: Source, omega: float,
                        c: float = DEFAULT_SPEED_OF_SOUND,
                        listening_radius: float = 1.0,
                        amplitude: complex = 1.0) -> np.ndarray:
    """Model-based driving signals for a circular array at one frequency.

    Chooses M from the listening radius, renders N = 2M+1 uniformly
    spaced plane waves, and averages the filters against the source's
    plane-wave density.
    """
    if array.family != "circular":
        raise ValueError("mr_circular_driving needs a circular array")
    if source.rho <= array.radius:
        raise ValueError("source must lie outside the array radius")
    M = truncation_order(omega, listening_radius, c)
    pw = PlaneWaveSet.full_circle(M)
    k = omega / c
    ms = np.arange(-M, M + 1)
    H = hankel2_sym_range(M, k * array.radius)
    phi = herglotz_point_source(pw.directions, omega, source, M, c, amplitude)
    # separable evaluation of (1/N) sum_n phi(theta_n) h_l(theta_n)
    proj = np.exp(-1j * np.outer(ms, pw.directions)) @ phi    # (2M+1,)
    e_l = np.exp(1j * np.outer(array.active_angles, ms))
    scale = 4.0 / (1j * array.active_count * len(pw.directions))
    return scale * (e_l @ (((1j) ** ms / H) * proj))


def mr_linear_filter_bank(array: ArrayGeometry, cp: PointSet,
                          pw: PlaneWaveSet, omega: float, lam: float,
                          c: float = DEFAULT_SPEED_OF_SOUND) -> FilterBank:
    """Plane-wave filters for a linear array, fitted in the regularized
    least-squares sense at the control points."""
    if array.family != "linear":
        raise ValueError("linear filter bank needs a linear array")
    if len(cp) == 0:
        raise ValueError("control point set must be non-empty")
    g = green_matrix(cp.points, array.active_positions, omega, c)
    targets = np.stack(
        [plane_wave_field(cp.points, th, omega, c) for th in pw.directions],
        axis=1)                                               # (I, N)
    a = g.conj().T @ g + lam * np.eye(array.active_count)
    cho = sla.cho_factor(a)
    values = sla.cho_solve(cho, g.conj().T @ targets)
    return FilterBank(values=values, directions=pw.directions, omega=omega)


def mr_linear_filters(array: ArrayGeometry, cp: PointSet, theta_n: float,
                      omega: float, lam: float,
                      c: float = DEFAULT_SPEED_OF_SOUND) -> np.ndarray:
    """Regularized least-squares filter for a single plane-wave direction."""
    pw = PlaneWaveSet(directions=np.array([theta_n]), order=0,
                      window=(theta_n, theta_n))
    return mr_linear_filter_bank(array, cp, pw, omega, lam, c).values[:, 0]


def linear_window(array: ArrayGeometry) -> tuple:
    """Admissible plane-wave window [atan2(-y0, x0), atan2(y0, x0)].

    With the exp(+j k <r, k_hat>) convention these directions propagate
    toward the listening half-plane x < x0.
    """
    if array.family != "linear":
        raise ValueError("window only defined for linear arrays")
    t_min = float(np.arctan2(-array.y_extent, array.x0))
    t_max = float(np.arctan2(array.y_extent, array.x0))
    if t_max <= t_min:
        raise ValueError("array x0 must be positive for a contiguous window")
    return t_min, t_max


def combine_plane_waves(bank: FilterBank, phi: np.ndarray,
                        window_width: float) -> np.ndarray:
    """Windowed plane-wave superposition of per-direction filters:
    d = width/(2 pi N) sum_n phi(theta_n) h(:, theta_n)."""
    n = bank.values.shape[1]
    if len(phi) != n:
        raise ValueError("density sample count must match the filter bank")
    return window_width / (2 * np.pi * n) * (bank.values @ phi)


def mr_linear_driving(array: ArrayGeometry, source: Source, cp: PointSet,
                      omega: float, lam: float,
                      c: float = DEFAULT_SPEED_OF_SOUND,
                      listening_radius: float = 1.0,
                      amplitude: complex = 1.0) -> np.ndarray:
    """Model-based driving signals for a linear array at one frequency."""
    t_min, t_max = linear_window(array)
    M = truncation_order(omega, listening_radius, c)
    pw = PlaneWaveSet.windowed(M, t_min, t_max)
    bank = mr_linear_filter_bank(array, cp, pw, omega, lam, c)
    phi = herglotz_point_source(pw.directions, omega, source, M, c, amplitude)
    return combine_plane_waves(bank, phi, pw.width)


def pm_operator(array: ArrayGeometry, cp: PointSet, omega: float, lam: float,
                c: float = DEFAULT_SPEED_OF_SOUND) -> PMOperator:
    """Build the pressure-matching operator for one frequency."""
    if len(cp) == 0:
        raise ValueError("control point set must be non-empty")
    if array.active_count < 1:
        raise ValueError("array has no active loudspeakers")
    g = green_matrix(cp.points, array.active_positions, omega, c)
    a = g.conj().T @ g + lam * np.eye(array.active_count)
    cho = sla.cho_factor(a)
    c_cp = sla.cho_solve(cho, g.conj().T)
    return PMOperator(g_cp=g, c_cp=c_cp, lam=lam, omega=omega)


def pm_driving(op: PMOperator, p_cp: np.ndarray) -> np.ndarray:
    """Driving signals d = C_cp p_cp; cost O(I L) per frequency."""
    p = np.asarray(p_cp, dtype=np.complex128).reshape(-1)
    if len(p) != op.n_control:
        raise ValueError("control pressure length must equal the operator's I")
    return op.c_cp @ p
