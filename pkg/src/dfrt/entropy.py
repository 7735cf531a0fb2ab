"""Per-shell energy spectra, spectral entropy and exponential-decay profiles.

The maximum-entropy distribution over shells ``l`` subject to

    sum_l P_l = 1,    sum_l lambda_l P_l = C

has the Gibbs form ``P_l = A exp(beta * lambda_l)``. With the default
``lambda_l = l**2`` this is ``P_l = A exp(-mu * l**2)``, ``mu = -beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BeamBasis
from .errors import ConfigurationError, FeasibilityError, InsufficientDataError, NormalizationError
from .special_fn import spherical_bessel_zeros

__all__ = [
    "ModalSpectrum",
    "MaxEntSolution",
    "LAMBDA_KINDS",
    "shell_lambdas",
    "modal_spectrum",
    "spectral_entropy",
    "maxent_solve",
    "fit_decay_profile",
    "decay_class_report",
]

LAMBDA_KINDS = ("ell2", "bessel")


@dataclass(frozen=True)
class ModalSpectrum:
    ell_values: np.ndarray
    E_ell: np.ndarray
    P_ell: np.ndarray
    total_E: float
    zero_energy: bool = False


@dataclass(frozen=True)
class MaxEntSolution:
    A: float
    mu: float
    beta: float
    alpha_minus_1: float
    constraint_residuals: tuple
    C: float
    lambdas: np.ndarray
    P: np.ndarray
    iterations: int = 0

    @property
    def alpha(self) -> float:
        return 1.0 + self.alpha_minus_1

    def stationarity_residual(self) -> np.ndarray:
        """``|-log P_l - 1 + alpha + beta lambda_l|`` for every level."""
        return np.abs(-np.log(self.P) - 1.0 + self.alpha + self.beta * self.lambdas)


def shell_lambdas(l_max, kind="ell2", radius=1.0) -> np.ndarray:
    """Shell weights ``l**2`` or the smallest viscous eigenvalue ``(alpha_l1 / R)**2``."""
    ells = np.arange(1, int(l_max) + 1)
    if kind == "ell2":
        return ells.astype(float) ** 2
    if kind == "bessel":
        return np.array([(spherical_bessel_zeros(int(ell), 1)[0] / radius) ** 2 for ell in ells])
    raise ConfigurationError(f"lambda kind must be one of {LAMBDA_KINDS}, got {kind!r}")


def modal_spectrum(a, basis: BeamBasis) -> ModalSpectrum:
    """Energy per shell ``E_l = sum_{m,n} |a_lmn|^2`` and its normalised fractions.

    ``basis`` may also be a bare :class:`~dfrt.basis.ModeSet`.
    """
    ms = getattr(basis, "mode_set", basis)
    values = np.asarray(getattr(a, "values", a), dtype=complex)
    ells = np.arange(1, ms.l_max + 1)
    E = np.bincount(ms.ells - 1, weights=np.abs(values) ** 2, minlength=ms.l_max)
    total = float(E.sum())
    if total == 0.0:
        return ModalSpectrum(ells, E, np.zeros_like(E), 0.0, zero_energy=True)
    return ModalSpectrum(ells, E, E / total, total)


def _probabilities(spec):
    if isinstance(spec, ModalSpectrum):
        if spec.zero_energy:
            raise NormalizationError("spectrum has zero total energy; fractions are undefined")
        return np.asarray(spec.P_ell, dtype=float)
    return np.asarray(spec, dtype=float)


def spectral_entropy(spec) -> float:
    """``-sum P log P`` with ``0 log 0 = 0``; accepts a spectrum or a probability vector."""
    P = _probabilities(spec)
    if np.any(P < 0) or abs(P.sum() - 1.0) > 1e-10:
        raise NormalizationError(f"probabilities must be nonnegative and sum to 1 (sum={P.sum():.17g})")
    nz = P[P > 0]
    return float(-np.sum(nz * np.log(nz)))


def _moments(beta, lam):
    # shift exponents so the largest weight is 1
    z = beta * lam
    w = np.exp(z - z.max())
    s = w.sum()
    mean = float(np.dot(w, lam) / s)
    var = float(np.dot(w, (lam - mean) ** 2) / s)
    return mean, var


def maxent_solve(lambda_ells, C, ell_range=None, tol=1e-15, max_iter=200) -> MaxEntSolution:
    """Entropy-maximising level distribution with prescribed mean ``C`` of ``lambda``.

    ``beta`` solves ``<lambda>_beta = C`` by Newton iteration safeguarded by
    a shrinking bracket; the map is strictly increasing, with derivative
    equal to the variance of ``lambda`` under the current distribution.

    Parameters
    ----------
    lambda_ells : sequence of float
        Level weights; ``l**2`` for the standard profile.
    C : float
        Target value of ``sum lambda_l P_l``.
    ell_range : sequence of int, optional
        Labels of the levels, only used in error messages.
    """
    lam = np.asarray(lambda_ells, dtype=float)
    if lam.ndim != 1 or lam.size < 2 or not np.all(np.isfinite(lam)):
        raise ConfigurationError("need at least two finite level weights")
    C = float(C)
    lo_l, hi_l = float(lam.min()), float(lam.max())
    if not (lo_l < C < hi_l):
        levels = "" if ell_range is None else f" for levels {list(ell_range)}"
        raise FeasibilityError(
            f"dissipation target C={C:g} infeasible{levels}; "
            f"admissible interval [{lo_l:g}, {hi_l:g}] (endpoints excluded)"
        )

    # bracket: the mean tends to min/max as beta -> -inf/+inf
    span = hi_l - lo_l
    lo, hi = -1.0 / span, 1.0 / span
    while _moments(lo, lam)[0] > C:
        lo *= 2.0
    while _moments(hi, lam)[0] < C:
        hi *= 2.0

    beta = 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi)
    it = 0
    for it in range(1, max_iter + 1):
        mean, var = _moments(beta, lam)
        f = mean - C
        if f > 0:
            hi = beta
        else:
            lo = beta
        if f == 0.0:
            break
        step = f / var if var > 0 else math.inf
        cand = beta - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if abs(cand - beta) <= tol * max(1.0, abs(beta)):
            beta = cand
            break
        beta = cand

    z = beta * lam
    log_norm = z.max() + math.log(np.exp(z - z.max()).sum())
    log_A = -log_norm
    P = np.exp(z + log_A)
    residuals = (float(P.sum() - 1.0), float(np.dot(lam, P) - C))
    return MaxEntSolution(
        A=math.exp(log_A),
        mu=-beta,
        beta=beta,
        alpha_minus_1=log_A,
        constraint_residuals=residuals,
        C=C,
        lambdas=lam,
        P=P,
        iterations=it,
    )


def fit_decay_profile(spec, ell_values=None) -> dict:
    """Least-squares fit of ``log P_l = log A - mu l**2`` over the nonzero levels.

    ``spec`` is a :class:`ModalSpectrum`, or a probability vector together
    with ``ell_values``.
    """
    if isinstance(spec, ModalSpectrum):
        if spec.zero_energy:
            raise InsufficientDataError("zero-energy spectrum has no usable levels")
        ells = np.asarray(spec.ell_values, dtype=float)
        P = np.asarray(spec.P_ell, dtype=float)
    else:
        P = np.asarray(spec, dtype=float)
        ells = np.arange(1, P.size + 1, dtype=float) if ell_values is None else np.asarray(ell_values, float)
    keep = P > 0
    if keep.sum() < 3:
        raise InsufficientDataError(f"decay fit needs at least 3 nonzero levels, got {int(keep.sum())}")
    x = ells[keep] ** 2
    y = np.log(P[keep])
    design = np.column_stack([np.ones_like(x), x])
    (intercept, slope), *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = intercept + slope * x
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"A": float(math.exp(intercept)), "mu": float(-slope), "r_squared": r2}


def decay_class_report(traj, basis: BeamBasis, mu_min, r2_min=0.9) -> list[dict]:
    """Decay-profile fit at every recorded time of a trajectory.

    Each row holds ``t``, ``mu``, ``r_squared``, ``satisfies`` (``mu >= mu_min``
    and ``r_squared >= r2_min``) and a ``status`` of ``ok``,
    ``insufficient-data`` or ``zero-energy``. Failed fits carry NaN values.
    """
    if len(traj) == 0:
        raise InsufficientDataError("trajectory has no samples")
    rows = []
    for idx, t in enumerate(traj.times):
        spec = modal_spectrum(traj.coefficients[idx], basis)
        row = {"t": float(t), "mu": math.nan, "r_squared": math.nan, "satisfies": False}
        if spec.zero_energy:
            row["status"] = "zero-energy"
        else:
            try:
                fit = fit_decay_profile(spec)
            except InsufficientDataError:
                row["status"] = "insufficient-data"
            else:
                row.update(mu=fit["mu"], r_squared=fit["r_squared"], status="ok")
                row["satisfies"] = bool(fit["mu"] >= mu_min and fit["r_squared"] >= r2_min)
        rows.append(row)
    return rows
