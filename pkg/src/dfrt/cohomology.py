"""Spectral coboundary on beam coefficients.

The coboundary is the quadratic map

    (d a)_{l3 m3 n3} = sum  CG(l1 m1, l2 m2 | l3 m3) * {l1 l2 l3; s1 s2 s3}
                            * W(n1, n2, n3) * a_{l1 m1 n1} * a_{l2 m2 n2}

over the truncated mode set. ``W`` is either the triple radial overlap of
the beam amplitudes or identically one. Only the index combinations
admitted by the coupling selection rules are stored; the operator is
applied as a sparse bilinear form.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .basis import BeamBasis, ModeSet
from .errors import ConfigurationError, DimensionError
from .special_fn import spherical_bessel_table
from .transform import CoefficientVector
from .wigner import clebsch_gordan, triangle_ok, wigner_6j

__all__ = [
    "KERNELS",
    "DEFAULT_SPIN_SWEEP",
    "CoboundaryConfig",
    "Cochain",
    "radial_coupling_weight",
    "coboundary",
    "bilinear",
    "linearized_coboundary",
    "nilpotency_residual",
    "nilpotency_sweep",
    "coupling_support",
]

KERNELS = ("triple_overlap", "unit")

DEFAULT_SPIN_SWEEP = ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1), (1, 1, 2), (2, 2, 2))


@dataclass(frozen=True)
class CoboundaryConfig:
    mode_set: ModeSet
    spin_triple: tuple = (1, 1, 1)
    radial_kernel: str = "triple_overlap"

    def __post_init__(self):
        spins = tuple(int(s) for s in self.spin_triple)
        if len(spins) != 3 or min(spins) < 0 or max(spins) > 8:
            raise ConfigurationError(f"spin_triple needs three integers in [0, 8], got {self.spin_triple}")
        object.__setattr__(self, "spin_triple", spins)
        if self.radial_kernel == "overlap":
            object.__setattr__(self, "radial_kernel", "triple_overlap")
        if self.radial_kernel not in KERNELS:
            raise ConfigurationError(f"radial_kernel must be one of {KERNELS}, got {self.radial_kernel!r}")


@dataclass
class Cochain(CoefficientVector):
    """Coefficient vector carrying a cochain degree."""

    degree: int = 0


def _as_cochain(a, mode_set):
    if isinstance(a, Cochain):
        cochain = a
    elif isinstance(a, CoefficientVector):
        cochain = Cochain(a.mode_set, a.values)
    else:
        cochain = Cochain(mode_set, np.asarray(a, dtype=complex))
    if not cochain.mode_set.same_as(mode_set):
        raise DimensionError("cochain mode set does not match the coboundary configuration")
    return cochain


def _radial_nodes(basis, alphas):
    count = max(64, int(sum(alphas)) + 32)
    t, w = np.polynomial.legendre.leggauss(count)
    R = basis.radius
    r = 0.5 * R * (t + 1.0)
    return r, 0.5 * R * w * r * r


def radial_coupling_weight(n1, n2, n3, ell1, ell2, ell3, basis: BeamBasis, kernel="triple_overlap") -> float:
    """``int_0^R g_{l1 n1} g_{l2 n2} g_{l3 n3} r^2 dr`` (or 1 for the unit kernel)."""
    if kernel == "unit":
        return 1.0
    if kernel not in ("triple_overlap", "overlap"):
        raise ConfigurationError(f"unknown radial kernel {kernel!r}")
    R = basis.radius
    pairs = ((ell1, n1), (ell2, n2), (ell3, n3))
    alphas = [basis.alphas[p] for p in pairs]
    r, w = _radial_nodes(basis, alphas)
    g1, g2, g3 = (spherical_bessel_table(ell, a * r / R)[ell] for (ell, _), a in zip(pairs, alphas))
    return float(np.sum(w * (g1 * g2) * g3))


@functools.lru_cache(maxsize=32)
def _coupling_entries(basis: BeamBasis, spins: tuple, kernel: str):
    """Sparse representation ``(i1, i2, k, weight)`` of the bilinear form."""
    ms = basis.mode_set
    L, N = ms.l_max, ms.n_max
    s1, s2, s3 = spins
    radial_cache = {}

    def radial(l1, l2, l3):
        key = (l1, l2, l3)
        if key not in radial_cache:
            W = np.empty((N, N, N))
            for n1 in range(1, N + 1):
                for n2 in range(1, N + 1):
                    for n3 in range(1, N + 1):
                        W[n1 - 1, n2 - 1, n3 - 1] = radial_coupling_weight(
                            n1, n2, n3, l1, l2, l3, basis, kernel
                        )
            radial_cache[key] = W
        return radial_cache[key]

    i1s, i2s, ks, ws = [], [], [], []
    ns = range(1, N + 1)
    for l3 in range(1, L + 1):
        for l1 in range(1, L + 1):
            for l2 in range(1, L + 1):
                if not triangle_ok(l1, l2, l3):
                    continue
                six = wigner_6j(l1, l2, l3, s1, s2, s3)
                if six == 0.0:
                    continue
                W = radial(l1, l2, l3)
                for m1 in range(-l1, l1 + 1):
                    for m2 in range(-l2, l2 + 1):
                        m3 = m1 + m2
                        if abs(m3) > l3:
                            continue
                        cg = clebsch_gordan(l1, m1, l2, m2, l3, m3)
                        if cg == 0.0:
                            continue
                        for n1 in ns:
                            i1 = ms.index((l1, m1, n1))
                            for n2 in ns:
                                i2 = ms.index((l2, m2, n2))
                                for n3 in ns:
                                    i1s.append(i1)
                                    i2s.append(i2)
                                    ks.append(ms.index((l3, m3, n3)))
                                    ws.append(cg * six * W[n1 - 1, n2 - 1, n3 - 1])
    return (
        np.array(i1s, dtype=np.int64),
        np.array(i2s, dtype=np.int64),
        np.array(ks, dtype=np.int64),
        np.array(ws, dtype=float),
    )


def _entries(config, basis):
    if not config.mode_set.same_as(basis.mode_set):
        raise DimensionError("configuration mode set does not match the basis")
    return _coupling_entries(basis, config.spin_triple, config.radial_kernel)


def coupling_support(config: CoboundaryConfig, basis: BeamBasis) -> set:
    """Set of ``((l1, m1), (l2, m2), (l3, m3))`` with a nonzero coupling weight."""
    i1, i2, k, w = _entries(config, basis)
    modes = basis.mode_set.modes
    out = set()
    for a, b, c, wt in zip(i1, i2, k, w):
        if wt != 0.0:
            out.add(((modes[a].ell, modes[a].m), (modes[b].ell, modes[b].m), (modes[c].ell, modes[c].m)))
    return out


def _scatter(k, values, size):
    return np.bincount(k, weights=values.real, minlength=size) + 1j * np.bincount(
        k, weights=values.imag, minlength=size
    )


def bilinear(a, b, config: CoboundaryConfig, basis: BeamBasis) -> np.ndarray:
    """The bilinear form whose diagonal ``bilinear(a, a)`` is the coboundary."""
    i1, i2, k, w = _entries(config, basis)
    va = np.asarray(getattr(a, "values", a), dtype=complex)
    vb = np.asarray(getattr(b, "values", b), dtype=complex)
    return _scatter(k, w * va[i1] * vb[i2], len(basis.mode_set))


def coboundary(a, config: CoboundaryConfig, basis: BeamBasis) -> Cochain:
    a = _as_cochain(a, config.mode_set)
    values = bilinear(a.values, a.values, config, basis)
    return Cochain(a.mode_set, values, degree=a.degree + 1)


def linearized_coboundary(background, direction, config: CoboundaryConfig, basis: BeamBasis) -> Cochain:
    """First variation ``B(b, v) + B(v, b)`` of the coboundary at ``b``."""
    b = _as_cochain(background, config.mode_set)
    v = _as_cochain(direction, config.mode_set)
    values = bilinear(b.values, v.values, config, basis) + bilinear(v.values, b.values, config, basis)
    return Cochain(b.mode_set, values, degree=v.degree + 1)


def nilpotency_residual(a, config: CoboundaryConfig, basis: BeamBasis) -> dict:
    """Measure how far the coboundary is from squaring to zero at ``a``.

    ``ratio`` is ``||d(d a)|| / (||a|| ||d a||)``, which is homogeneous of
    degree one under ``a -> c a``. ``norm_linear_chain`` is
    ``||D_{da}(D_a(a / ||a||))||``, the linearized composition applied to
    the unit direction of ``a``.
    """
    a = _as_cochain(a, config.mode_set)
    da = coboundary(a, config, basis)
    dda = coboundary(da, config, basis)
    norm_a = float(np.linalg.norm(a.values))
    norm_da = float(np.linalg.norm(da.values))
    norm_dda = float(np.linalg.norm(dda.values))
    if norm_a == 0.0:
        chain = 0.0
    else:
        unit = Cochain(a.mode_set, a.values / norm_a, degree=a.degree)
        step = linearized_coboundary(a, unit, config, basis)
        chain = float(np.linalg.norm(linearized_coboundary(da, step, config, basis).values))
    ratio = norm_dda / (norm_a * norm_da) if norm_da > 0.0 else 0.0
    return {
        "spin_triple": list(config.spin_triple),
        "radial_kernel": config.radial_kernel,
        "norm_a": norm_a,
        "norm_da": norm_da,
        "norm_dda": norm_dda,
        "norm_linear_chain": chain,
        "ratio": ratio,
    }


def nilpotency_sweep(a, basis: BeamBasis, spin_triples=DEFAULT_SPIN_SWEEP, kernels=KERNELS) -> list[dict]:
    """:func:`nilpotency_residual` for every spin triple and radial kernel."""
    reports = []
    for kernel in kernels:
        for spins in spin_triples:
            config = CoboundaryConfig(basis.mode_set, tuple(spins), kernel)
            reports.append(nilpotency_residual(a, config, basis))
    return reports
