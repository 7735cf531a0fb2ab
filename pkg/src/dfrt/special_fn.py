"""Scalar special functions behind the beam basis.

Spherical Bessel functions of the first kind (series near the origin,
Miller downward recurrence elsewhere), their positive zeros, fully
normalised complex spherical harmonics with the Condon-Shortley phase,
and the surface gradient of those harmonics with exact pole limits.

All evaluators broadcast over numpy arrays; scalar input gives scalar
output.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ModeIndexError, UnsupportedOrderError

__all__ = [
    "MAX_ORDER",
    "SphericalPoint",
    "TangentVector",
    "spherical_bessel_j",
    "spherical_bessel_table",
    "spherical_bessel_zeros",
    "spherical_harmonic",
    "surface_gradient_Y",
    "legendre_tables",
]

MAX_ORDER = 32

_SERIES_CUTOFF = 1.0
_RESCALE_LIMIT = 1e200


@dataclass(frozen=True)
class SphericalPoint:
    """A point in spherical coordinates, normalised on construction."""

    r: float
    theta: float
    phi: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"radius must be nonnegative, got {self.r}")
        object.__setattr__(self, "theta", min(max(float(self.theta), 0.0), math.pi))
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))

    def to_cartesian(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [
                self.r * st * math.cos(self.phi),
                self.r * st * math.sin(self.phi),
                self.r * math.cos(self.theta),
            ]
        )


@dataclass(frozen=True)
class TangentVector:
    """Tangential vector on the sphere: polar and azimuthal components only."""

    comp_theta: complex | np.ndarray
    comp_phi: complex | np.ndarray


# ---------------------------------------------------------------------------
# Spherical Bessel functions


def _bessel_series(lmax, x):
    # j_l(x) = x^l/(2l+1)!! * sum_k (-x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))
    out = np.empty((lmax + 1,) + x.shape)
    h = -0.5 * x * x
    lead = np.ones_like(x)
    for ell in range(lmax + 1):
        if ell > 0:
            lead = lead * x / (2 * ell + 1)
        term = np.ones_like(x)
        total = np.ones_like(x)
        for k in range(1, 30):
            term = term * h / (k * (2 * ell + 2 * k + 1))
            total = total + term
        out[ell] = lead * total
    return out


def _bessel_miller(lmax, x):
    xmax = float(x.max())
    start = int(max(lmax, xmax)) + 30 + int(6.0 * xmax ** (1.0 / 3.0))
    out = np.zeros((lmax + 1,) + x.shape)
    f_next = np.zeros_like(x)
    f_cur = np.full_like(x, 1e-300)
    for k in range(start, 0, -1):
        f_prev = (2 * k + 1) / x * f_cur - f_next
        if k - 1 <= lmax:
            out[k - 1] = f_prev
        big = np.abs(f_prev) > _RESCALE_LIMIT
        if big.any():
            f_prev = np.where(big, f_prev / _RESCALE_LIMIT, f_prev)
            f_cur = np.where(big, f_cur / _RESCALE_LIMIT, f_cur)
            out[:, big] /= _RESCALE_LIMIT
        f_next, f_cur = f_cur, f_prev
    j0 = np.sin(x) / x
    j1 = np.sin(x) / (x * x) - np.cos(x) / x
    f0 = out[0]
    if lmax >= 1:
        f1 = out[1]
    else:
        # recover the order-1 value from the last two recurrence iterates
        f1 = f_next
    use0 = np.abs(j0) >= np.abs(j1)
    scale = np.where(use0, j0 / np.where(use0, f0, 1.0), j1 / np.where(use0, 1.0, f1))
    return out * scale


def spherical_bessel_table(lmax, x):
    """Return ``j_0 .. j_lmax`` at ``x`` as an array of shape ``(lmax+1,) + x.shape``.

    No order limit is enforced here; :func:`spherical_bessel_j` is the
    guarded public entry point.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("spherical Bessel argument must be nonnegative")
    flat = x.reshape(-1)
    out = np.empty((lmax + 1, flat.size))
    small = flat < _SERIES_CUTOFF
    if small.any():
        out[:, small] = _bessel_series(lmax, flat[small])
    if (~small).any():
        out[:, ~small] = _bessel_miller(lmax, flat[~small])
    return out.reshape((lmax + 1,) + x.shape)


def spherical_bessel_j(ell, x):
    """Spherical Bessel function of the first kind ``j_ell(x)`` for ``x >= 0``.

    Accurate to about 1e-13 relative for ``ell <= 32`` and ``x <= 200``.
    """
    ell = int(ell)
    if ell < 0:
        raise ModeIndexError(f"order must be nonnegative, got {ell}")
    if ell > MAX_ORDER:
        raise UnsupportedOrderError(f"order {ell} exceeds supported maximum {MAX_ORDER}")
    values = spherical_bessel_table(ell, x)[ell]
    return float(values) if values.ndim == 0 else values


def _bisect_zeros(ell, lo, hi):
    def f(z):
        return spherical_bessel_table(ell, z)[ell]

    flo = f(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        same = np.sign(fmid) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fmid, flo)
        hi = np.where(same, hi, mid)
    root = 0.5 * (lo + hi)
    # one Newton polish, j_l' = j_{l-1} - (l+1)/x j_l
    table = spherical_bessel_table(ell, root)
    deriv = table[ell - 1] - (ell + 1) / root * table[ell]
    polished = root - table[ell] / deriv
    keep = (polished > lo - 1e-12) & (polished < hi + 1e-12)
    return np.where(keep, polished, root)


@functools.lru_cache(maxsize=None)
def _zero_table(ell, count):
    zeros = np.pi * np.arange(1, count + ell + 1, dtype=float)
    for k in range(1, ell + 1):
        zeros = _bisect_zeros(k, zeros[:-1].copy(), zeros[1:].copy())
    return tuple(float(z) for z in zeros[:count])


def spherical_bessel_zeros(ell, count):
    """First ``count`` positive zeros of ``j_ell`` in increasing order.

    Zeros of ``j_k`` bracket those of ``j_{k+1}`` (interlacing), so the
    table is built upward from ``n*pi`` by bisection with a Newton polish.
    """
    ell = int(ell)
    count = int(count)
    if ell < 0:
        raise ModeIndexError(f"order must be nonnegative, got {ell}")
    if ell > MAX_ORDER + 1:
        raise UnsupportedOrderError(f"order {ell} exceeds supported maximum {MAX_ORDER}")
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    return list(_zero_table(ell, count))


# ---------------------------------------------------------------------------
# Spherical harmonics


def legendre_tables(lmax, theta):
    """Normalised associated Legendre data for ``0 <= m <= l <= lmax``.

    Returns ``(P, Q, dP)`` of shape ``(lmax+1, lmax+1) + theta.shape``
    indexed ``[l, m]``:

    ``P``
        ``Y_l^m = P[l, m] * exp(i m phi)`` (Condon-Shortley phase included).
    ``Q``
        ``P[l, m] / sin(theta)`` for ``m >= 1``, obtained by running the same
        recurrence from a seed one power of ``sin`` lower; exact at the poles.
    ``dP``
        ``d P[l, m] / d theta`` from the ladder identity, also pole-safe.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.sin(theta)
    shape = (lmax + 1, lmax + 1) + theta.shape
    P = np.zeros(shape)
    Q = np.zeros(shape)
    p_mm = np.full(theta.shape, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(lmax + 1):
        if m > 0:
            factor = -math.sqrt((2 * m + 1) / (2 * m))
            q_mm = factor * p_mm
            p_mm = q_mm * s
        else:
            q_mm = np.zeros(theta.shape)
        for table, seed in ((P, p_mm), (Q, q_mm)):
            table[m, m] = seed
            if m + 1 <= lmax:
                table[m + 1, m] = math.sqrt(2 * m + 3) * x * seed
            for ell in range(m + 2, lmax + 1):
                a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
                b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
                table[ell, m] = a * (x * table[ell - 1, m] - b * table[ell - 2, m])
    dP = np.zeros(shape)
    for ell in range(1, lmax + 1):
        # d/dtheta Y_l^m = (c+ Y_l^{m+1} e^{-i phi} - c- Y_l^{m-1} e^{i phi}) / 2
        dP[ell, 0] = math.sqrt(ell * (ell + 1)) * P[ell, 1]
        for m in range(1, ell + 1):
            c_up = math.sqrt((ell - m) * (ell + m + 1))
            c_dn = math.sqrt((ell + m) * (ell - m + 1))
            up = P[ell, m + 1] if m + 1 <= ell else 0.0
            dP[ell, m] = 0.5 * (c_up * up - c_dn * P[ell, m - 1])
    return P, Q, dP


def _check_lm(ell, m):
    if ell < 0 or abs(m) > ell:
        raise ModeIndexError(f"need |m| <= l with l >= 0, got l={ell}, m={m}")


def _unwrap(value):
    return complex(value) if np.ndim(value) == 0 else value


def spherical_harmonic(ell, m, theta, phi):
    """Orthonormal complex spherical harmonic ``Y_l^m(theta, phi)``."""
    ell, m = int(ell), int(m)
    _check_lm(ell, m)
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    P, _, _ = legendre_tables(ell, theta)
    sign = (-1) ** m if m < 0 else 1
    return _unwrap(sign * P[ell, abs(m)] * np.exp(1j * m * phi))


def surface_gradient_Y(ell, m, theta, phi) -> TangentVector:
    """Surface gradient of ``Y_l^m``: ``(d_theta Y, (1/sin theta) d_phi Y)``.

    Finite at the poles (nonzero there only for ``|m| = 1``).
    """
    ell, m = int(ell), int(m)
    _check_lm(ell, m)
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    _, Q, dP = legendre_tables(ell, theta)
    sign = (-1) ** m if m < 0 else 1
    phase = np.exp(1j * m * phi)
    comp_theta = sign * dP[ell, abs(m)] * phase
    comp_phi = sign * 1j * m * Q[ell, abs(m)] * phase
    return TangentVector(_unwrap(comp_theta), _unwrap(comp_phi))
