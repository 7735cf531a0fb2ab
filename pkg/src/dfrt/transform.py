"""Quadrature on the ball and the forward / inverse beam transform.

Coefficients are extracted by direct quadrature against the conjugated
beams; orthonormality of the beams on the grid is what makes this the
exact projection, and it is monitored by :func:`gram_matrix`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import (
    BeamBasis,
    ModeSet,
    beam_values,
    build_basis,
    build_mode_set,
    _as_xyz,
)
from .errors import ConfigurationError, DimensionError, DomainError

__all__ = [
    "QuadratureGrid",
    "CoefficientVector",
    "SampledField",
    "ParsevalReport",
    "build_grid",
    "reference_grid",
    "inner_product",
    "gram_matrix",
    "forward_transform",
    "inverse_transform",
    "parseval_report",
    "completeness_decay",
    "real_field_projection",
]


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor-product rule on the ball.

    Gauss-Legendre in ``r`` (with the ``r**2`` Jacobian folded into the
    weights) and in ``cos(theta)``; the trapezoid rule in ``phi``. Flattened
    node order is r outer, theta middle, phi inner.
    """

    n_r: int
    n_theta: int
    n_phi: int
    radius: float
    radial_nodes: np.ndarray = field(repr=False)
    radial_weights: np.ndarray = field(repr=False)
    polar_nodes: np.ndarray = field(repr=False)
    polar_weights: np.ndarray = field(repr=False)
    azimuthal_nodes: np.ndarray = field(repr=False)
    azimuthal_weights: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return (self.n_r, self.n_theta, self.n_phi)

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta * self.n_phi

    def spec(self) -> dict:
        return {"n_r": self.n_r, "n_theta": self.n_theta, "n_phi": self.n_phi, "radius": self.radius}

    def same_as(self, other) -> bool:
        return self.shape == other.shape and math.isclose(self.radius, other.radius)


def build_grid(n_r, n_theta, n_phi, domain_radius=1.0) -> QuadratureGrid:
    n_r, n_theta, n_phi = int(n_r), int(n_theta), int(n_phi)
    if n_r < 2 or n_theta < 2 or n_phi < 4:
        raise ConfigurationError(
            f"grid counts need n_r>=2, n_theta>=2, n_phi>=4; got ({n_r}, {n_theta}, {n_phi})"
        )
    if not domain_radius > 0:
        raise ConfigurationError(f"domain_radius must be positive, got {domain_radius}")
    R = float(domain_radius)

    t, wt = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * R * (t + 1.0)
    wr = 0.5 * R * wt * r * r
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)[::-1]
    wtheta = wx[::-1]
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * np.pi / n_phi)

    rr, tt, pp = np.meshgrid(r, theta, phi, indexing="ij")
    st = np.sin(tt)
    points = np.stack([rr * st * np.cos(pp), rr * st * np.sin(pp), rr * np.cos(tt)], axis=-1)
    weights = wr[:, None, None] * wtheta[None, :, None] * wphi[None, None, :]

    grid = QuadratureGrid(
        n_r, n_theta, n_phi, R, r, wr, theta, wtheta, phi, wphi,
        points.reshape(-1, 3), weights.reshape(-1),
    )
    _certify(grid)
    return grid


def _certify(grid):
    R = grid.radius
    volume = grid.weights.sum()
    if abs(volume - 4.0 * math.pi * R**3 / 3.0) > 1e-12 * max(1.0, R**3) * 10:
        raise RuntimeError(f"grid volume {volume} deviates from the ball volume")
    r2 = np.sum(grid.weights * np.sum(grid.points**2, axis=1))
    if abs(r2 - 4.0 * math.pi * R**5 / 5.0) > 1e-11 * max(1.0, R**5):
        raise RuntimeError("grid fails to integrate r**2 exactly")


def reference_grid(l_max, n_max, domain_radius=1.0, scale=1.0) -> QuadratureGrid:
    """The default grid resolving a ``(l_max, n_max)`` basis, optionally enlarged."""
    counts = (4 * n_max + 16, 2 * l_max + 16, 4 * l_max + 16)
    n_r, n_t, n_p = (int(math.ceil(scale * c)) for c in counts)
    return build_grid(n_r, n_t, n_p + (n_p % 2), domain_radius)


@dataclass
class CoefficientVector:
    """Complex beam amplitudes ordered like ``mode_set``."""

    mode_set: ModeSet
    values: np.ndarray
    real_field: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)
        if self.values.size != len(self.mode_set):
            raise DimensionError(
                f"{self.values.size} coefficients for a mode set of {len(self.mode_set)}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("coefficients must be finite")
        if self.real_field:
            gap = self.conjugate_asymmetry()
            if gap > 1e-12 * max(1.0, np.abs(self.values).max()):
                raise ValueError(f"coefficients flagged real_field are not conjugate symmetric ({gap:.3g})")

    def conjugate_asymmetry(self) -> float:
        partner, sign = self.mode_set.conjugate_partner()
        return float(np.max(np.abs(self.values - sign * np.conj(self.values[partner])), initial=0.0))

    def __getitem__(self, mode):
        return self.values[self.mode_set.index(mode)]

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    @classmethod
    def zeros(cls, mode_set, real_field=False):
        return cls(mode_set, np.zeros(len(mode_set), dtype=complex), real_field)

    @classmethod
    def unit(cls, mode_set, mode):
        values = np.zeros(len(mode_set), dtype=complex)
        values[mode_set.index(mode)] = 1.0
        return cls(mode_set, values)


def real_field_projection(mode_set, values):
    """Closest conjugate-symmetric vector: ``(a + (-1)^m conj(a_{l,-m,n})) / 2``."""
    partner, sign = mode_set.conjugate_partner()
    return 0.5 * (values + sign * np.conj(values[partner]))


@dataclass(frozen=True, eq=False)
class SampledField:
    """A vector field on the ball, given lazily or as values on a grid."""

    radius: float
    func: Callable | None = None
    grid: QuadratureGrid | None = None
    values: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_callable(cls, func, radius=1.0):
        """``func`` maps an (N, 3) Cartesian point array to (N, 3) complex values."""
        return cls(float(radius), func=func)

    @classmethod
    def from_grid(cls, values, grid: QuadratureGrid):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.size, 3):
            raise DimensionError(f"field values of shape {values.shape} do not match grid {grid.shape}")
        return cls(grid.radius, grid=grid, values=values)

    @classmethod
    def from_coefficients(cls, coeffs: CoefficientVector, basis: BeamBasis):
        def func(xyz):
            return inverse_transform(coeffs, basis, xyz)

        return cls(basis.radius, func=func)

    def on_grid(self, grid: QuadratureGrid) -> np.ndarray:
        if self.values is not None:
            if not self.grid.same_as(grid):
                raise DimensionError(f"field sampled on {self.grid.shape}, requested {grid.shape}")
            return self.values
        if not math.isclose(self.radius, grid.radius):
            raise DimensionError(f"field radius {self.radius} differs from grid radius {grid.radius}")
        return np.asarray(self.func(grid.points), dtype=complex).reshape(grid.size, 3)


def _samples(field_or_array, grid):
    if isinstance(field_or_array, SampledField):
        return field_or_array.on_grid(grid)
    arr = np.asarray(field_or_array, dtype=complex)
    if arr.shape[-2:] != (grid.size, 3):
        raise DimensionError(f"array of shape {arr.shape} does not match grid with {grid.size} nodes")
    return arr


def inner_product(a, b, grid: QuadratureGrid) -> complex:
    """Quadrature of ``a . conj(b)`` over the ball."""
    va = _samples(a, grid)
    vb = _samples(b, grid)
    return complex(np.einsum("n,nc,nc->", grid.weights, va, np.conj(vb)))


def _shells(mode_set):
    by_ell = {}
    for i, md in enumerate(mode_set.modes):
        by_ell.setdefault(md.ell, []).append(i)
    return by_ell


def _check_basis_grid(basis, grid):
    if not math.isclose(basis.radius, grid.radius):
        raise DimensionError(f"basis radius {basis.radius} differs from grid radius {grid.radius}")


def gram_matrix(basis: BeamBasis, grid: QuadratureGrid) -> np.ndarray:
    _check_basis_grid(basis, grid)
    vals = beam_values(basis, grid.points)
    weighted = vals * grid.weights[None, :, None]
    return np.einsum("inc,jnc->ij", weighted, np.conj(vals))


def forward_transform(field, basis: BeamBasis, grid: QuadratureGrid, real_field=False) -> CoefficientVector:
    """``a_lmn = <u, T_lmn>`` for every mode of the basis."""
    _check_basis_grid(basis, grid)
    u = _samples(field, grid) * grid.weights[:, None]
    modes = basis.mode_set.modes
    coeffs = np.empty(len(modes), dtype=complex)
    for idx in _shells(basis.mode_set).values():
        vals = beam_values(basis, grid.points, [modes[i] for i in idx])
        coeffs[idx] = np.einsum("nc,inc->i", u, np.conj(vals))
    if real_field:
        coeffs = real_field_projection(basis.mode_set, coeffs)
    return CoefficientVector(basis.mode_set, coeffs, real_field=real_field)


def inverse_transform(coeffs: CoefficientVector, basis: BeamBasis, points) -> np.ndarray:
    """Truncated synthesis ``sum_k a_k T_k(x)``; returns an (N, 3) complex array."""
    if not coeffs.mode_set.same_as(basis.mode_set):
        raise DimensionError("coefficient mode set does not match the basis")
    xyz = _as_xyz(points)
    r = np.linalg.norm(xyz, axis=-1)
    if np.any(r > basis.radius * (1 + 1e-12)):
        raise DomainError(f"point outside ball of radius {basis.radius}")
    modes = basis.mode_set.modes
    out = np.zeros(xyz.shape, dtype=complex)
    nz = np.flatnonzero(coeffs.values)
    if nz.size == 0:
        return out
    active = set(nz.tolist())
    for idx in _shells(basis.mode_set).values():
        idx = [i for i in idx if i in active]
        if not idx:
            continue
        vals = beam_values(basis, xyz, [modes[i] for i in idx])
        out += np.einsum("i,inc->nc", coeffs.values[idx], vals)
    return out


@dataclass(frozen=True)
class ParsevalReport:
    norm_sq_physical: float
    norm_sq_spectral: float
    relative_gap: float
    l_max: int
    n_max: int


def parseval_report(field, coeffs: CoefficientVector, basis: BeamBasis, grid: QuadratureGrid) -> ParsevalReport:
    physical = inner_product(field, field, grid).real
    spectral = coeffs.norm_sq()
    gap = 0.0 if physical == 0.0 else abs(physical - spectral) / physical
    ms = basis.mode_set
    return ParsevalReport(physical, spectral, gap, ms.l_max, ms.n_max)


def completeness_decay(field, l_max_list, n_max_list, grid: QuadratureGrid) -> list[dict]:
    """Residual energy ``||u||^2 - sum |a|^2`` for each ``(l_max, n_max)`` pair.

    Coefficients are computed once in the largest basis; smaller truncations
    are nested subsets of it.
    """
    pairs = list(zip(l_max_list, n_max_list))
    if not pairs:
        return []
    big = build_basis(build_mode_set(max(p[0] for p in pairs), max(p[1] for p in pairs), grid.radius))
    coeffs = forward_transform(field, big, grid)
    energy = inner_product(field, field, grid).real
    ells, ns = big.mode_set.ells, big.mode_set.ns
    power = np.abs(coeffs.values) ** 2
    rows = []
    for L, N in pairs:
        captured = float(power[(ells <= L) & (ns <= N)].sum())
        rows.append(
            {
                "l_max": int(L),
                "n_max": int(N),
                "energy": energy,
                "captured": captured,
                "residual": energy - captured,
                "residual_fraction": (energy - captured) / energy if energy else 0.0,
            }
        )
    return rows
