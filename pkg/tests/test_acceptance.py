"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
written straight to the terminal even when output capture is on.
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from dfrt.basis import beam_values, build_basis, build_mode_set, fd_divergence
from dfrt.cohomology import DEFAULT_SPIN_SWEEP, KERNELS, CoboundaryConfig, coupling_support, nilpotency_sweep
from dfrt.dynamics import (
    SimulationConfig,
    convective_projection,
    coupling_grid,
    integrate,
    selection_prefilter,
)
from dfrt.entropy import fit_decay_profile, maxent_solve, shell_lambdas, spectral_entropy
from dfrt.transform import (
    CoefficientVector,
    SampledField,
    completeness_decay,
    forward_transform,
    gram_matrix,
    parseval_report,
    real_field_projection,
)
from dfrt.wigner import (
    biedenharn_elliott_residual,
    exact_wigner_3j,
    exact_wigner_6j,
    triangle_ok,
    wigner_3j,
    wigner_6j,
)

FIXTURES = Path(__file__).parent / "fixtures"


def verdict(capsys, number, title, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({elapsed:.1f} s, budget {budget:g} s)"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def ball_points(rng, count, r_max):
    v = rng.normal(size=(count, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * (r_max * rng.uniform(0, 1, count) ** (1 / 3))[:, None]


def field_a(R=1.0):
    """grad(psi) x x with psi = (R^2 - r^2)^2 z (x + i y)."""

    def u(p):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        s = (R * R - (x * x + y * y + z * z)) ** 2
        grad = np.stack([z + 0j, 1j * z, x + 1j * y], axis=1)
        return s[:, None] * np.cross(grad, p)

    return SampledField.from_callable(u, R)


def field_b(R=1.0):
    """grad(psi) x x with psi = (R^2 - r^2) exp(x / R)."""

    def u(p):
        s = (R * R - np.sum(p * p, axis=1)) * np.exp(p[:, 0] / R) / R
        return s[:, None] * np.cross(np.array([1.0, 0.0, 0.0]), p)

    return SampledField.from_callable(u, R)


def bisection_beta(lam, C):
    def mean(beta):
        z = beta * lam
        w = np.exp(z - z.max())
        return np.dot(w, lam) / w.sum()

    lo, hi = -1.0, 1.0
    while mean(lo) > C:
        lo *= 2
    while mean(hi) < C:
        hi *= 2
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            return mid
        if mean(mid) > C:
            hi = mid
        else:
            lo = mid


def test_criterion_01_orthonormality(basis32, grid32, capsys):
    start = time.perf_counter()
    G = gram_matrix(basis32, grid32)
    off = float(np.max(np.abs(G - np.diag(np.diag(G)))))
    diag = float(np.max(np.abs(np.diag(G) - 1)))
    ok = off < 1e-6 and diag < 1e-6
    detail = f"max offdiag {off:.2e}, max diag error {diag:.2e} over {G.shape[0]}x{G.shape[1]} (tol 1e-6)"
    verdict(capsys, 1, "orthonormality", ok, detail, time.perf_counter() - start, 60)


def test_criterion_02_divergence_free(basis32, capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    h = 1e-4 * basis32.radius
    worst = 0.0
    for md in basis32.mode_set:
        pts = ball_points(rng, 200, 0.999 * basis32.radius)

        def f(p, md=md):
            return beam_values(basis32, p, [md], check_domain=False)[0]

        ratio = np.max(np.abs(fd_divergence(f, pts, h))) / np.max(np.abs(f(pts)))
        worst = max(worst, float(ratio))
    detail = f"max |div T| / max |T| = {worst:.2e} at 200 points x {len(basis32.mode_set)} modes (tol 1e-6)"
    verdict(capsys, 2, "divergence-free beams", worst < 1e-6, detail, time.perf_counter() - start, 30)


def test_criterion_03_parseval(basis32, grid32, capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    ms = basis32.mode_set
    gap = dev = 0.0
    for _ in range(50):
        c = CoefficientVector(ms, rng.normal(size=len(ms)) + 1j * rng.normal(size=len(ms)))
        field = SampledField.from_coefficients(c, basis32)
        a = forward_transform(field, basis32, grid32)
        phys = parseval_report(field, c, basis32, grid32).norm_sq_physical
        gap = max(gap, abs(phys - c.norm_sq()) / phys)
        dev = max(dev, float(np.max(np.abs(a.values - c.values))))
    ok = gap < 1e-6 and dev < 1e-6
    detail = f"max Parseval gap {gap:.2e}, max |forward(inverse(a)) - a| {dev:.2e} over 50 vectors (tol 1e-6)"
    verdict(capsys, 3, "Parseval", ok, detail, time.perf_counter() - start, 120)


def test_criterion_04_completeness(capsys):
    from dfrt.transform import reference_grid

    start = time.perf_counter()
    grid = reference_grid(6, 4)
    ok = True
    parts = []
    for name, field in (("A", field_a()), ("B", field_b())):
        rows = completeness_decay(field, [1, 3, 6], [1, 2, 4], grid)
        rel = [row["residual"] / row["energy"] for row in rows]
        ok &= rel[0] > rel[1] > rel[2] and rel[2] < 0.10
        parts.append(f"{name}: " + " > ".join(f"{r:.2e}" for r in rel))
    detail = "relative residuals at (1,1), (3,2), (6,4); " + "; ".join(parts) + " (last < 0.10)"
    verdict(capsys, 4, "completeness decay", ok, detail, time.perf_counter() - start, 600)


def test_criterion_05_wigner(capsys):
    start = time.perf_counter()
    err3 = err6 = orth = 0.0
    n3 = n6 = 0
    for j1, j2, j3 in itertools.product(range(7), repeat=3):
        if not triangle_ok(j1, j2, j3):
            continue
        for m1 in range(-j1, j1 + 1):
            for m2 in range(-j2, j2 + 1):
                m3 = -m1 - m2
                if abs(m3) <= j3:
                    n3 += 1
                    ref = float(exact_wigner_3j(j1, j2, j3, m1, m2, m3))
                    err3 = max(err3, abs(wigner_3j(j1, j2, j3, m1, m2, m3) - ref))
    for js in itertools.product(range(7), repeat=6):
        a, b, c, d, e, f = js
        if triangle_ok(a, b, c) and triangle_ok(a, e, f) and triangle_ok(d, b, f) and triangle_ok(d, e, c):
            n6 += 1
            err6 = max(err6, abs(wigner_6j(*js) - float(exact_wigner_6j(*js))))
    for j1, j2 in itertools.product(range(7), repeat=2):
        for j3, j3p in itertools.product(range(abs(j1 - j2), min(j1 + j2, 6) + 1), repeat=2):
            for m3 in range(-min(j3, j3p), min(j3, j3p) + 1):
                total = sum(
                    (2 * j3 + 1) * wigner_3j(j1, j2, j3, m1, m3 - m1, -m3) * wigner_3j(j1, j2, j3p, m1, m3 - m1, -m3)
                    for m1 in range(-j1, j1 + 1)
                    if abs(m3 - m1) <= j2
                )
                orth = max(orth, abs(total - (j3 == j3p)))
    rng = np.random.default_rng(5)
    be, count = 0.0, 0
    while count < 200:
        a, b, c, d, e, f, p, q, r = (int(v) for v in rng.integers(0, 6, 9))
        rhs_ok = all(
            triangle_ok(*t) for t in [(p, q, r), (p, a, d), (e, q, d), (e, a, r), (p, b, c), (f, q, c), (f, b, r)]
        )
        if not rhs_ok or max(abs(a - b), abs(c - d), abs(e - f)) > min(a + b, c + d, e + f):
            continue
        count += 1
        be = max(be, biedenharn_elliott_residual(a, b, c, d, e, f, p, q, r))
    ok = max(err3, err6, orth, be) < 1e-12
    detail = (
        f"3j err {err3:.1e} ({n3} symbols), 6j err {err6:.1e} ({n6} symbols), "
        f"orthogonality {orth:.1e}, Biedenharn-Elliott {be:.1e} on 200 tuples (tol 1e-12)"
    )
    verdict(capsys, 5, "Wigner certificates", ok, detail, time.perf_counter() - start, 60)


def test_criterion_06_selection_rules(basis32, capsys):
    start = time.perf_counter()
    ms = basis32.mode_set
    grid = coupling_grid(ms)
    rng = np.random.default_rng(6)
    rejected = []
    while len(rejected) < 20:
        i, j, k = (ms.modes[int(x)] for x in rng.integers(0, len(ms), 3))
        if not selection_prefilter(i, j, k):
            rejected.append((i, j, k))
    audit = max(abs(convective_projection(basis32, grid, *t)) for t in rejected)
    violations = 0
    for spins in DEFAULT_SPIN_SWEEP:
        for kernel in KERNELS:
            support = coupling_support(CoboundaryConfig(ms, spins, kernel), basis32)
            for (l1, m1), (l2, m2), (l3, m3) in support:
                violations += not (m3 == m1 + m2 and abs(l1 - l2) <= l3 <= l1 + l2)
    ok = audit < 1e-8 and violations == 0
    detail = f"max |G| on 20 rejected triples {audit:.2e} (tol 1e-8), coboundary support violations {violations}"
    verdict(capsys, 6, "selection rules", ok, detail, time.perf_counter() - start, 120)


def test_criterion_07_inviscid_energy(basis32, gamma32, capsys):
    start = time.perf_counter()
    ms = basis32.mode_set
    rng = np.random.default_rng(7)
    v = real_field_projection(ms, rng.normal(size=len(ms)) + 1j * rng.normal(size=len(ms)))
    a0 = CoefficientVector(ms, 0.1 * v / np.linalg.norm(v))
    traj = integrate(SimulationConfig(0.0, 1e-3, 1.0, a0), gamma32, basis32)
    drift = abs(traj.energy[-1] - traj.energy[0]) / traj.energy[0]
    ok = traj.status == "ok" and drift < 1e-6
    detail = f"|E(1) - E(0)| / E(0) = {drift:.2e} with dt = 1e-3 (tol 1e-6)"
    verdict(capsys, 7, "inviscid energy conservation", ok, detail, time.perf_counter() - start, 60)


def test_criterion_08_viscous_decay(basis32, gamma32, capsys):
    start = time.perf_counter()
    ms = basis32.mode_set
    lam = basis32.eigenvalues()
    empty = gamma32.zeroed()
    worst = 0.0
    for md in ms.modes:
        k = ms.index(md)
        a0 = CoefficientVector(ms, (0.8 - 0.3j) * CoefficientVector.unit(ms, md).values)
        traj = integrate(SimulationConfig(0.1, 0.01, 1.0, a0, real_field=False), empty, basis32)
        exact = a0.values[k] * np.exp(-0.1 * lam[k] * traj.times)
        worst = max(worst, float(np.max(np.abs(traj.coefficients[:, k] - exact))))
    detail = f"max |a(t) - a(0) exp(-nu lambda t)| = {worst:.2e} over {len(ms)} single-mode runs (tol 1e-10)"
    verdict(capsys, 8, "viscous decay exactness", worst < 1e-10, detail, time.perf_counter() - start, 5)


def test_criterion_09_maxent(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    stat = 0.0
    for l_max in (2, 3, 5, 8, 12):
        lam = shell_lambdas(l_max)
        for frac in (0.05, 0.25, 0.5, 0.75):
            stat = max(stat, float(maxent_solve(lam, 1 + frac * (lam[-1] - 1)).stationarity_residual().max()))
    newton = 0.0
    for _ in range(100):
        lam = np.sort(rng.uniform(0.5, 60.0, int(rng.integers(2, 9))))
        C = lam[0] + rng.uniform(0.02, 0.98) * (lam[-1] - lam[0])
        ref = bisection_beta(lam, C)
        newton = max(newton, abs(maxent_solve(lam, C).beta - ref) / max(1.0, abs(ref)))
    lam = shell_lambdas(6)
    sol = maxent_solve(lam, 8.0)
    S = spectral_entropy(sol.P)
    null = np.linalg.svd(np.vstack([np.ones_like(lam), lam]))[2][2:]
    beaten = 0
    for _ in range(1000):
        v = rng.normal(size=null.shape[0]) @ null
        neg = v < 0
        q = np.clip(sol.P + rng.uniform(0, 1) * np.min(-sol.P[neg] / v[neg]) * v, 0, None)
        beaten += spectral_entropy(q / q.sum()) > S + 1e-12
    fit_err = 0.0
    for A, mu in [(0.7, 0.3), (0.05, 0.01), (1.3, 0.12)]:
        fit = fit_decay_profile(A * np.exp(-mu * np.arange(1, 7) ** 2))
        fit_err = max(fit_err, abs(fit["A"] - A), abs(fit["mu"] - mu))
    ok = stat < 1e-9 and newton < 1e-11 and beaten == 0 and fit_err < 1e-10
    detail = (
        f"stationarity {stat:.1e} (tol 1e-9), Newton vs bisection {newton:.1e} (tol 1e-11), "
        f"{beaten}/1000 feasible samples with higher entropy, fit error {fit_err:.1e} (tol 1e-10)"
    )
    verdict(capsys, 9, "maximum-entropy solve", ok, detail, time.perf_counter() - start, 60)


def test_criterion_10_nilpotency_reproducible(capsys):
    import sys

    start = time.perf_counter()
    sys.path.insert(0, str(FIXTURES))
    try:
        from make_nilpotency_fixture import cochains
    finally:
        sys.path.pop(0)
    archived = json.loads((FIXTURES / "nilpotency.json").read_text())
    basis = build_basis(build_mode_set(archived["l_max"], archived["n_max"]))

    def sweep():
        return [
            rep
            for a in cochains(basis.mode_set, seed=archived["seed"])
            for rep in nilpotency_sweep(a, basis, DEFAULT_SPIN_SWEEP, KERNELS)
        ]

    first, second = sweep(), sweep()
    keys = ("norm_a", "norm_da", "norm_dda", "norm_linear_chain", "ratio")
    finite = all(math.isfinite(rep[key]) for rep in first for key in keys)
    rerun = max(abs(x[key] - y[key]) / max(1.0, abs(y[key])) for x, y in zip(first, second) for key in keys)
    fixture = max(
        abs(x[key] - y[key]) / max(1.0, abs(y[key])) for x, y in zip(first, archived["records"]) for key in keys
    )
    ok = finite and len(first) == len(archived["records"]) and rerun <= 1e-12 and fixture <= 1e-12
    detail = (
        f"{len(first)} reports, rerun deviation {rerun:.1e}, archived-fixture deviation {fixture:.1e} (tol 1e-12)"
    )
    verdict(capsys, 10, "nilpotency reproducibility", ok, detail, time.perf_counter() - start, 120)
