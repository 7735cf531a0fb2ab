"""Divergence-free toroidal beam basis on the ball of radius R.

Each beam is

    T_lmn(x) = N_ln * g_ln(r) * (grad_S Y_l^m x r_hat),   g_ln(r) = j_l(alpha_ln r / R)

with ``alpha_ln`` the n-th positive zero of ``j_l``. Equivalently it is the
curl of ``r g_ln(r) Y_l^m r_hat``, so it is solenoidal, tangential, vanishes
on the boundary sphere and is an eigenfunction of the vector Laplacian
with eigenvalue ``-(alpha_ln / R)**2``. ``N_ln`` makes the beams orthonormal
in L2 of the ball.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DomainError, ModeIndexError
from .special_fn import (
    SphericalPoint,
    legendre_tables,
    spherical_bessel_j,
    spherical_bessel_table,
    spherical_bessel_zeros,
)

__all__ = [
    "ModeIndex",
    "ModeSet",
    "BeamBasis",
    "ResolutionWarning",
    "RayleighQuotient",
    "build_mode_set",
    "build_basis",
    "radial_amplitude",
    "evaluate_beam",
    "beam_values",
    "viscous_eigenvalue",
    "rayleigh_quotient",
    "cartesian_to_spherical",
    "fd_jacobian",
    "fd_divergence",
    "fd_laplacian",
]

_BOUNDARY_SLACK = 1e-12


class ResolutionWarning(UserWarning):
    """Quadrature grid too coarse for the requested modes."""


@dataclass(frozen=True, order=True)
class ModeIndex:
    ell: int
    m: int
    n: int

    def __post_init__(self):
        if self.ell < 1 or abs(self.m) > self.ell or self.n < 1:
            raise ModeIndexError(
                f"invalid mode (l={self.ell}, m={self.m}, n={self.n}); "
                "need l >= 1, |m| <= l, n >= 1"
            )

    def __iter__(self):
        return iter((self.ell, self.m, self.n))


@dataclass(frozen=True, eq=False)
class ModeSet:
    """All modes with ``1 <= l <= l_max``, ``|m| <= l``, ``1 <= n <= n_max``.

    Modes are stored in lexicographic ``(l, m, n)`` order so coefficient
    vectors line up across runs.
    """

    l_max: int
    n_max: int
    domain_radius: float = 1.0
    modes: tuple = field(init=False)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        modes = tuple(
            ModeIndex(ell, m, n)
            for ell in range(1, self.l_max + 1)
            for m in range(-ell, ell + 1)
            for n in range(1, self.n_max + 1)
        )
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "_index", {md: i for i, md in enumerate(modes)})

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __contains__(self, mode):
        return mode in self._index

    def index(self, mode) -> int:
        if not isinstance(mode, ModeIndex):
            mode = ModeIndex(*mode)
        try:
            return self._index[mode]
        except KeyError:
            raise ModeIndexError(f"{mode} not in mode set (l_max={self.l_max}, n_max={self.n_max})")

    def same_as(self, other) -> bool:
        return (
            self.l_max == other.l_max
            and self.n_max == other.n_max
            and math.isclose(self.domain_radius, other.domain_radius)
        )

    @property
    def ells(self) -> np.ndarray:
        return np.array([md.ell for md in self.modes])

    @property
    def ms(self) -> np.ndarray:
        return np.array([md.m for md in self.modes])

    @property
    def ns(self) -> np.ndarray:
        return np.array([md.n for md in self.modes])

    def conjugate_partner(self):
        """Index of ``(l, -m, n)`` for every mode and the sign ``(-1)^m``."""
        partner = np.array([self._index[ModeIndex(md.ell, -md.m, md.n)] for md in self.modes])
        sign = np.array([(-1.0) ** md.m for md in self.modes])
        return partner, sign


def build_mode_set(l_max, n_max, domain_radius=1.0) -> ModeSet:
    if int(l_max) < 1 or int(n_max) < 1:
        raise ConfigurationError(f"l_max and n_max must be >= 1, got {l_max}, {n_max}")
    if not domain_radius > 0:
        raise ConfigurationError(f"domain_radius must be positive, got {domain_radius}")
    return ModeSet(int(l_max), int(n_max), float(domain_radius))


@dataclass(frozen=True, eq=False)
class BeamBasis:
    """Bessel zeros and normalisation constants for a mode set."""

    mode_set: ModeSet
    alphas: dict
    norms: dict

    @property
    def radius(self) -> float:
        return self.mode_set.domain_radius

    def eigenvalues(self) -> np.ndarray:
        """Viscous eigenvalue of every mode, in mode-set order."""
        R = self.radius
        return np.array([(self.alphas[md.ell, md.n] / R) ** 2 for md in self.mode_set])


def build_basis(mode_set: ModeSet) -> BeamBasis:
    R = mode_set.domain_radius
    alphas = {}
    norms = {}
    for ell in range(1, mode_set.l_max + 1):
        zeros = spherical_bessel_zeros(ell, mode_set.n_max)
        for n, alpha in enumerate(zeros, start=1):
            alphas[ell, n] = alpha
            jn1 = spherical_bessel_table(ell + 1, alpha)[ell + 1]
            norms[ell, n] = 1.0 / math.sqrt(ell * (ell + 1) * 0.5 * R**3 * jn1**2)
    return BeamBasis(mode_set, alphas, norms)


def radial_amplitude(ell, n, r, basis: BeamBasis):
    """``g_ln(r) = j_l(alpha_ln r / R)`` for ``0 <= r <= R``."""
    R = basis.radius
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > R * (1 + _BOUNDARY_SLACK)):
        raise DomainError(f"radius outside [0, {R}]")
    return spherical_bessel_j(ell, basis.alphas[ell, n] * r_arr / R)


def cartesian_to_spherical(xyz):
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    theta = np.arctan2(np.sqrt(x * x + y * y), z)
    phi = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    return r, theta, phi


def _as_xyz(points):
    if isinstance(points, SphericalPoint):
        return points.to_cartesian()[None, :]
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], SphericalPoint):
        return np.array([p.to_cartesian() for p in points])
    return np.atleast_2d(np.asarray(points, dtype=float))


def beam_values(basis: BeamBasis, xyz, modes=None, check_domain=True) -> np.ndarray:
    """Cartesian beam vectors, shape ``(len(modes), N, 3)``, at points ``xyz`` (N, 3).

    With ``check_domain=False`` the closed-form expression is evaluated
    outside the ball as well (needed by finite-difference stencils that
    straddle the boundary).
    """
    xyz = _as_xyz(xyz)
    if modes is None:
        modes = basis.mode_set.modes
    R = basis.radius
    r, theta, phi = cartesian_to_spherical(xyz)
    if check_domain and np.any(r > R * (1 + _BOUNDARY_SLACK)):
        raise DomainError(f"point outside ball of radius {R}")
    lmax = max(md.ell for md in modes)
    _, Q, dP = legendre_tables(lmax, theta)

    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    e_theta = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)

    radial = {}
    phases = {}
    out = np.empty((len(modes),) + r.shape + (3,), dtype=complex)
    for i, md in enumerate(modes):
        key = (md.ell, md.n)
        if key not in radial:
            x = basis.alphas[key] * r / R
            radial[key] = basis.norms[key] * spherical_bessel_table(md.ell, x)[md.ell]
        if md.m not in phases:
            phases[md.m] = np.exp(1j * md.m * phi)
        am = abs(md.m)
        sign = (-1.0) ** md.m if md.m < 0 else 1.0
        comp_theta = sign * dP[md.ell, am] * phases[md.m]
        comp_phi = sign * 1j * md.m * Q[md.ell, am] * phases[md.m]
        # grad_S Y x r_hat = comp_phi e_theta - comp_theta e_phi
        vec = comp_phi[..., None] * e_theta - comp_theta[..., None] * e_phi
        out[i] = radial[key][..., None] * vec
    return out


def evaluate_beam(mode, point, basis: BeamBasis) -> np.ndarray:
    """Cartesian value of one beam at a point (or an (N, 3) array of points)."""
    if not isinstance(mode, ModeIndex):
        mode = ModeIndex(*mode)
    single = isinstance(point, SphericalPoint) or np.ndim(point) == 1
    values = beam_values(basis, point, [mode])[0]
    return values[0] if single else values


def viscous_eigenvalue(mode, basis: BeamBasis) -> float:
    if not isinstance(mode, ModeIndex):
        mode = ModeIndex(*mode)
    if mode not in basis.mode_set:
        raise ModeIndexError(f"{mode} not in basis")
    return (basis.alphas[mode.ell, mode.n] / basis.radius) ** 2


# ---------------------------------------------------------------------------
# Finite-difference helpers on Cartesian evaluators


def fd_jacobian(func, xyz, h):
    """4th-order central differences: ``J[..., a, b] = d f_a / d x_b``.

    ``func`` maps an (N, 3) point array to an array ending in ``(N, 3)``.
    """
    xyz = np.asarray(xyz, dtype=float)
    cols = []
    for b in range(3):
        step = np.zeros(3)
        step[b] = h
        d = (
            -func(xyz + 2 * step) + 8 * func(xyz + step)
            - 8 * func(xyz - step) + func(xyz - 2 * step)
        ) / (12 * h)
        cols.append(d)
    return np.stack(cols, axis=-1)


def fd_divergence(func, xyz, h):
    jac = fd_jacobian(func, xyz, h)
    return jac[..., 0, 0] + jac[..., 1, 1] + jac[..., 2, 2]


def fd_laplacian(func, xyz, h):
    """4th-order central second differences summed over the three axes."""
    xyz = np.asarray(xyz, dtype=float)
    center = func(xyz)
    total = 0
    for b in range(3):
        step = np.zeros(3)
        step[b] = h
        total = total + (
            -func(xyz + 2 * step) + 16 * func(xyz + step) - 30 * center
            + 16 * func(xyz - step) - func(xyz - 2 * step)
        ) / (12 * h * h)
    return total


class RayleighQuotient(NamedTuple):
    value: float
    warning: str | None


def rayleigh_quotient(mode, basis: BeamBasis, grid) -> RayleighQuotient:
    """``<-Laplacian T, T> / <T, T>`` by finite differences and quadrature.

    Certifies :func:`viscous_eigenvalue` independently of the Bessel zeros
    entering the closed form.
    """
    if not isinstance(mode, ModeIndex):
        mode = ModeIndex(*mode)
    ms = basis.mode_set
    message = None
    if grid.n_r < 4 * ms.n_max + 8 or min(grid.n_theta, grid.n_phi) < 2 * ms.l_max + 8:
        message = (
            f"grid ({grid.n_r}, {grid.n_theta}, {grid.n_phi}) under-resolves "
            f"l_max={ms.l_max}, n_max={ms.n_max}"
        )
        warnings.warn(message, ResolutionWarning, stacklevel=2)

    def beam(points):
        return beam_values(basis, points, [mode], check_domain=False)[0]

    h = 1e-3 * basis.radius
    values = beam(grid.points)
    lap = fd_laplacian(beam, grid.points, h)
    w = grid.weights[:, None]
    num = -np.sum(w * lap * np.conj(values))
    den = np.sum(w * values * np.conj(values))
    return RayleighQuotient(float((num / den).real), message)
