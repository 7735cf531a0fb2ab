"""Galerkin Navier-Stokes dynamics in the beam basis.

The modal system is

    da_k/dt = sum_{i,j} G[k; i, j] a_i a_j - nu * lambda_k * a_k,
    G[k; i, j] = -<(T_i . grad) T_j, T_k>,

with the pressure gradient dropping out because every beam is
solenoidal and tangential at the boundary. ``G`` is obtained by
quadrature with finite-difference beam gradients and stored sparsely on
the triples admitted by the triadic selection rules.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BeamBasis, ModeIndex, ModeSet, beam_values, build_mode_set, fd_jacobian
from .errors import ConfigurationError, DimensionError, InsufficientDataError
from .transform import CoefficientVector, QuadratureGrid, real_field_projection, reference_grid
from .wigner import triangle_ok

__all__ = [
    "CouplingTensor",
    "SimulationConfig",
    "TrajectoryRecord",
    "selection_prefilter",
    "parity_rule",
    "coupling_grid",
    "compute_coupling_tensor",
    "cached_coupling_tensor",
    "convective_projection",
    "rhs",
    "integrate",
    "energy_budget",
    "INTEGRATORS",
]

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4_exponential", "rk4_plain")
FORMAT_VERSION = 1
_FD_STEP = 1e-4


def selection_prefilter(i, j, k) -> bool:
    """``m_k == m_i + m_j`` and the triangle rule on ``(l_i, l_j, l_k)``."""
    i, j, k = (md if isinstance(md, ModeIndex) else ModeIndex(*md) for md in (i, j, k))
    return k.m == i.m + j.m and triangle_ok(i.ell, j.ell, k.ell)


def parity_rule(i, j, k) -> bool:
    """Toroidal triads couple only when ``l_i + l_j + l_k`` is odd."""
    i, j, k = (md if isinstance(md, ModeIndex) else ModeIndex(*md) for md in (i, j, k))
    return (i.ell + j.ell + k.ell) % 2 == 1


def _masks(mode_set):
    ells, ms = mode_set.ells, mode_set.ms
    li, lj, lk = np.meshgrid(ells, ells, ells, indexing="ij")
    mi, mj, mk = np.meshgrid(ms, ms, ms, indexing="ij")
    prefilter = (mk == mi + mj) & (np.abs(li - lj) <= lk) & (lk <= li + lj)
    return prefilter, (li + lj + lk) % 2 == 1


@dataclass(eq=False)
class CouplingTensor:
    """Sparse ``G[k; i, j]`` entries, indexed by positions in ``mode_set``."""

    mode_set: ModeSet
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.int64)
        self.j = np.asarray(self.j, dtype=np.int64)
        self.k = np.asarray(self.k, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=complex)
        if not (self.i.shape == self.j.shape == self.k.shape == self.values.shape):
            raise DimensionError("coupling tensor index and value arrays differ in length")

    def __len__(self):
        return self.values.size

    @property
    def density(self) -> float:
        return len(self) / float(len(self.mode_set) ** 3)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.i, self.j, self.k, self.values):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def sidecar(self) -> dict:
        ms = self.mode_set
        return {
            "lmax": ms.l_max,
            "nmax": ms.n_max,
            "radius": ms.domain_radius,
            "grid": self.meta.get("grid"),
            "hash": self.content_hash(),
            "entries": len(self),
            "format_version": FORMAT_VERSION,
            "audit_max_rejected": self.meta.get("audit_max_rejected"),
            "audit_max_parity": self.meta.get("audit_max_parity"),
            "warning": self.meta.get("warning"),
        }

    def zeroed(self) -> "CouplingTensor":
        empty = np.zeros(0, dtype=np.int64)
        return CouplingTensor(self.mode_set, empty, empty, empty, np.zeros(0, complex), dict(self.meta))

    def save(self, path) -> Path:
        """Write entries (CSV for ``*.csv``, otherwise numpy binary) plus ``<path>.json``."""
        path = Path(path)
        if path.suffix.lower() == ".csv":
            with open(path, "w", newline="") as fh:
                fh.write("i,j,k,gamma_re,gamma_im\n")
                for a, b, c, v in zip(self.i, self.j, self.k, self.values):
                    fh.write(f"{a},{b},{c},{float(v.real)!r},{float(v.imag)!r}\n")
        else:
            with open(path, "wb") as fh:
                np.savez(fh, i=self.i, j=self.j, k=self.k, values=self.values)
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True))
        return sidecar

    @classmethod
    def load(cls, path, verify=True) -> "CouplingTensor":
        path = Path(path)
        meta = json.loads(path.with_name(path.name + ".json").read_text())
        if path.suffix.lower() == ".csv":
            raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
            i, j, k = (raw[:, c].astype(np.int64) for c in range(3))
            values = np.empty(raw.shape[0], complex)
            values.real, values.imag = raw[:, 3], raw[:, 4]  # keeps signed zeros
        else:
            with np.load(path) as data:
                i, j, k, values = data["i"], data["j"], data["k"], data["values"]
        ms = build_mode_set(meta["lmax"], meta["nmax"], meta["radius"])
        keys = ("grid", "audit_max_rejected", "audit_max_parity", "warning")
        tensor = cls(ms, i, j, k, values, {key: meta.get(key) for key in keys})
        if verify and tensor.content_hash() != meta["hash"]:
            raise ValueError(f"coupling tensor {path} does not match its recorded hash")
        return tensor


def coupling_grid(mode_set: ModeSet) -> QuadratureGrid:
    """1.5x the reference grid; resolves the cubic triple-product integrands."""
    return reference_grid(mode_set.l_max, mode_set.n_max, mode_set.domain_radius, scale=1.5)


def _dense_coupling(basis, grid, threads=1):
    ms = basis.mode_set
    modes = ms.modes
    M = len(modes)
    pts = grid.points
    T = beam_values(basis, pts)
    wconjT = np.conj(T) * grid.weights[None, :, None]
    wconjT = wconjT.reshape(M, -1)
    h = _FD_STEP * basis.radius
    G = np.empty((M, M, M), dtype=complex)  # [i, j, k]

    shells = {}
    for idx, md in enumerate(modes):
        shells.setdefault(md.ell, []).append(idx)

    for jdx in shells.values():
        jmodes = [modes[q] for q in jdx]

        def evaluator(points, jmodes=jmodes):
            return beam_values(basis, points, jmodes, check_domain=False)

        jac = fd_jacobian(evaluator, pts, h)  # [j, n, a, b] = d_b T_j,a

        def project(i):
            # (T_i . grad) T_j at every node
            adv = np.einsum("nb,jnab->jna", T[i], jac)
            return i, -(adv.reshape(len(jdx), -1) @ wconjT.T)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(project, range(M)))
        else:
            results = [project(i) for i in range(M)]
        for i, block in results:
            G[i, jdx, :] = block
    return G


def compute_coupling_tensor(basis: BeamBasis, grid: QuadratureGrid | None = None, threads=1) -> CouplingTensor:
    """Quadrature evaluation of ``-<(T_i . grad) T_j, T_k>`` on admissible triples.

    Every triple is integrated. Entries are kept only where
    :func:`selection_prefilter` admits the triple and :func:`parity_rule`
    holds; the largest discarded magnitude in each class is recorded in
    ``meta`` as an audit of both rules.
    """
    ms = basis.mode_set
    if grid is None:
        grid = coupling_grid(ms)
    warning = None
    ref = coupling_grid(ms)
    if grid.n_r < ref.n_r or grid.n_theta < ref.n_theta or grid.n_phi < ref.n_phi:
        warning = f"grid {grid.shape} coarser than recommended {ref.shape}"
        log.warning(warning)
    G = _dense_coupling(basis, grid, threads)
    prefilter, parity = _masks(ms)
    keep = prefilter & parity
    i, j, k = np.nonzero(keep)
    rejected = np.abs(G[~prefilter])
    odd_out = np.abs(G[prefilter & ~parity])
    meta = {
        "grid": grid.spec(),
        "audit_max_rejected": float(rejected.max()) if rejected.size else 0.0,
        "audit_max_parity": float(odd_out.max()) if odd_out.size else 0.0,
        "admitted_by_prefilter": int(prefilter.sum()),
        "warning": warning,
    }
    return CouplingTensor(ms, i, j, k, G[i, j, k], meta)


def convective_projection(basis: BeamBasis, grid: QuadratureGrid, i, j, k) -> complex:
    """``<(T_i . grad) T_j, T_k>`` for a single triple (used for audits)."""
    modes = [m if isinstance(m, ModeIndex) else ModeIndex(*m) for m in (i, j, k)]
    pts = grid.points
    Ti, Tk = beam_values(basis, pts, [modes[0], modes[2]])
    jac = fd_jacobian(lambda p: beam_values(basis, p, [modes[1]], check_domain=False)[0], pts, _FD_STEP * basis.radius)
    adv = np.einsum("nb,nab->na", Ti, jac)
    return complex(np.sum(grid.weights[:, None] * adv * np.conj(Tk)))


def _cache_dir(cache_dir=None) -> Path:
    if cache_dir is None:
        cache_dir = os.environ.get("DFRT_CACHE_DIR") or Path.home() / ".cache" / "dfrt"
    path = Path(cache_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cached_coupling_tensor(basis: BeamBasis, grid: QuadratureGrid | None = None, cache_dir=None, threads=1):
    """Load the tensor for ``(l_max, n_max, R, grid)`` from disk or compute and store it."""
    ms = basis.mode_set
    if grid is None:
        grid = coupling_grid(ms)
    key = json.dumps(
        {"lmax": ms.l_max, "nmax": ms.n_max, "radius": ms.domain_radius, "grid": grid.spec(), "v": FORMAT_VERSION},
        sort_keys=True,
    )
    digest = hashlib.sha256(key.encode()).hexdigest()[:20]
    path = _cache_dir(cache_dir) / f"gamma-{digest}.npz"
    if path.exists():
        try:
            return CouplingTensor.load(path)
        except (OSError, ValueError, KeyError) as exc:
            log.warning("discarding unreadable cache entry %s: %s", path, exc)
    tensor = compute_coupling_tensor(basis, grid, threads)
    tensor.save(path)
    return tensor


# ---------------------------------------------------------------------------
# Time integration


def _nonlinear(values, tensor):
    contrib = tensor.values * values[tensor.i] * values[tensor.j]
    size = values.size
    return np.bincount(tensor.k, weights=contrib.real, minlength=size) + 1j * np.bincount(
        tensor.k, weights=contrib.imag, minlength=size
    )


def rhs(a, tensor: CouplingTensor, basis: BeamBasis, nu) -> CoefficientVector:
    """Right-hand side of the modal system at ``a``."""
    values = np.asarray(getattr(a, "values", a), dtype=complex)
    if values.size != len(basis.mode_set) or not tensor.mode_set.same_as(basis.mode_set):
        raise DimensionError("state, tensor and basis disagree on the mode set")
    out = _nonlinear(values, tensor) - nu * basis.eigenvalues() * values
    return CoefficientVector(basis.mode_set, out)


@dataclass
class SimulationConfig:
    nu: float
    dt: float
    t_end: float
    initial_coeffs: CoefficientVector
    integrator: str = "rk4_exponential"
    real_field: bool = True

    def __post_init__(self):
        if not self.nu >= 0:
            raise ConfigurationError(f"nu must be nonnegative, got {self.nu}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ConfigurationError(f"t_end must be at least dt, got {self.t_end}")
        if self.integrator not in INTEGRATORS:
            raise ConfigurationError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")


@dataclass
class TrajectoryRecord:
    mode_set: ModeSet
    times: np.ndarray
    coefficients: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    status: str = "ok"
    blowup_time: float | None = None
    max_real_drift: float = 0.0

    def __len__(self):
        return self.times.size

    def coefficient_vector(self, index) -> CoefficientVector:
        return CoefficientVector(self.mode_set, self.coefficients[index])


def integrate(config: SimulationConfig, tensor: CouplingTensor, basis: BeamBasis) -> TrajectoryRecord:
    """Fixed-step RK4, optionally with the exact viscous integrating factor.

    A non-finite state stops the run; the trajectory up to the last finite
    sample is returned with ``status="blow-up"``.
    """
    ms = basis.mode_set
    if not tensor.mode_set.same_as(ms) or not config.initial_coeffs.mode_set.same_as(ms):
        raise DimensionError("tensor, basis and initial condition disagree on the mode set")
    lam = basis.eigenvalues()
    nu = config.nu
    steps = max(1, int(math.ceil(config.t_end / config.dt - 1e-9)))
    dt = config.t_end / steps

    a = config.initial_coeffs.values.copy()
    if config.real_field:
        a = real_field_projection(ms, a)

    def full(v):
        return _nonlinear(v, tensor) - nu * lam * v

    def nonlin(v):
        return _nonlinear(v, tensor)

    half = np.exp(-nu * lam * dt / 2)
    whole = half * half

    def step_exponential(v):
        k1 = nonlin(v)
        k2 = nonlin(half * (v + 0.5 * dt * k1))
        k3 = nonlin(half * v + 0.5 * dt * k2)
        k4 = nonlin(whole * v + dt * half * k3)
        return whole * v + dt / 6.0 * (whole * k1 + 2.0 * half * (k2 + k3) + k4)

    def step_plain(v):
        k1 = full(v)
        k2 = full(v + 0.5 * dt * k1)
        k3 = full(v + 0.5 * dt * k2)
        k4 = full(v + dt * k3)
        return v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    advance = step_exponential if config.integrator == "rk4_exponential" else step_plain
    times = [0.0]
    states = [a.copy()]
    status, blowup, drift = "ok", None, 0.0
    for step in range(1, steps + 1):
        # overflow on the way to a blow-up is expected and caught below
        with np.errstate(over="ignore", invalid="ignore"):
            a_new = advance(a)
        t = step * dt
        if not np.all(np.isfinite(a_new)):
            status, blowup = "blow-up", t
            log.warning("non-finite state at t=%g; integration stopped", t)
            break
        if config.real_field:
            projected = real_field_projection(ms, a_new)
            drift = max(drift, float(np.max(np.abs(projected - a_new))))
            a_new = projected
        a = a_new
        times.append(t)
        states.append(a.copy())
    if drift:
        log.debug("max real-field projection drift %.3g", drift)

    coeffs = np.array(states)
    with np.errstate(over="ignore", invalid="ignore"):
        power = np.abs(coeffs) ** 2
        energy = power.sum(axis=1)
        dissipation = 2.0 * nu * (power * lam).sum(axis=1)
    return TrajectoryRecord(
        ms,
        np.array(times),
        coeffs,
        energy,
        dissipation,
        status,
        blowup,
        drift,
    )


def energy_budget(traj: TrajectoryRecord, nu, basis: BeamBasis) -> dict:
    """Energy drift and the residual of ``dE/dt = -2 nu sum lambda |a|^2``."""
    if len(traj) < 3:
        raise InsufficientDataError(f"energy budget needs at least 3 samples, got {len(traj)}")
    E = traj.energy
    t = traj.times
    lam = basis.eigenvalues()
    D = 2.0 * nu * (np.abs(traj.coefficients) ** 2 * lam).sum(axis=1)
    dEdt = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    residual = np.abs(dEdt + D[1:-1])
    drift = float(np.max(np.abs(E - E[0])) / E[0]) if E[0] > 0 else 0.0
    return {
        "max_drift": drift,
        "balance_residual": residual,
        "max_balance_residual": float(residual.max()),
    }
