"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time

import numpy as np
import pytest
from scipy.integrate import quad

from patchbounds import config
from patchbounds.bounds import efficiency_ub_nonresonant, efficiency_ub_resonant, gain_ub
from patchbounds.constants import C0, Z0
from patchbounds.geometry import DesignRegion, ShapeMask, build_basis, build_mesh, default_cells
from patchbounds.greens import SubstrateStack, WaveContext, hed_farfield
from patchbounds.mom import farfield_row, radiation_operator
from patchbounds.semianalytic import (
    Pinned,
    QLinkInput,
    appendix_pipeline,
    delta_sw,
    efficiency_from_q,
    eta_ub_from_qlb,
    q_lossless,
)
from patchbounds.sweep import _with_ohmic, run_sweep

from conftest import canonical_point

RS = (0.0377, 0.377, 3.77)
TDS = (0.001, 0.01, 0.1)


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def spread(values):
    v = np.asarray(values, dtype=float)
    return (v.max() - v.min()) / np.abs(v).min()


_OPS = {}


def ops_at(size, td):
    """Operators on the default desk-scale mesh (16 x 12 for these sizes)."""
    key = (round(size, 12), td)
    if key not in _OPS:
        nx, ny = default_cells(size)
        _OPS[key] = canonical_point(size, td, nx, ny)
    return _OPS[key]


_RESULTS = []  # (resonant, nonresonant) pairs seen by any criterion


def bounds(ops):
    r = efficiency_ub_resonant(ops.R_r, ops.R_total, ops.X, ops.F_s)
    n = efficiency_ub_nonresonant(ops.R_r, ops.R_total)
    _RESULTS.append((r.value, n.value))
    return r, n


def test_criterion_01_worked_example(capsys):
    t0 = time.perf_counter()
    stack = SubstrateStack.from_loss_tangent(4.29, 0.015, 3.3e-3)
    rep = appendix_pipeline(QLinkInput(25.4, 0.015, stack, 1.9e9), 1.5e9, Pinned(135.4))
    kh1 = 2 * math.pi * 1.9e9 / C0 * 3.3e-3
    dsw1 = delta_sw(4.29, kh1)
    checks = [
        abs(rep.delta_sw_f1 - 0.178) <= 0.001,
        abs(efficiency_from_q(25.4, 0.015, dsw1) - 0.526) <= 0.002,
        abs(rep.eta_f1 - 0.526) <= 0.002,
        abs(q_lossless(25.4, 0.015) - 41.0) <= 0.1,
        abs(rep.Q_lb_f1 - 41.0) <= 0.1,
        abs(rep.delta_sw_f2 - 0.140) <= 0.001,
        abs(rep.eta_ub_f2 - 0.290) <= 0.003,
    ]
    dt = time.perf_counter() - t0
    report(
        capsys, 1, all(checks) and dt < 0.1,
        f"dsw={rep.delta_sw_f1:.4f} eta={rep.eta_f1:.4f} Q_lb={rep.Q_lb_f1:.2f} "
        f"dsw2={rep.delta_sw_f2:.4f} eta_ub={rep.eta_ub_f2:.4f} ({dt * 1e3:.2f} ms)",
    )


def test_criterion_02_route_equivalence(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10_000):
        td = rng.uniform(0, 0.1)
        Q = rng.uniform(1, 500)
        if Q * td >= 0.99:
            Q = rng.uniform(0.01, 0.99) / td
        d = rng.uniform(0, 2)
        a = efficiency_from_q(Q, td, d)
        b = eta_ub_from_qlb(q_lossless(Q, td), td, d)
        worst = max(worst, abs(a - b) / abs(a))
    dt = time.perf_counter() - t0
    report(capsys, 2, worst < 1e-12 and dt < 1.0, f"max relative difference {worst:.2e} over 10^4 inputs ({dt:.2f} s)")


def test_criterion_03_farfield_oracle(capsys):
    t0 = time.perf_counter()
    stack = SubstrateStack.from_loss_tangent(1.0, 0.0, 0.02)
    ctx = WaveContext.for_stack(1e9, stack)
    k, h = ctx.k, stack.h
    theta = np.linspace(0.0, math.pi / 2 - 1e-3, 20)
    pattern = 0.0
    for phi in (0.0, 0.7, 2.0):
        ft, fp = hed_farfield(theta, phi, "x", stack, ctx)
        # dipole at height h over its reversed image
        x = k * h * np.cos(theta)
        af = np.sin(x) * np.exp(-1j * x)
        ref_t = k * Z0 / (2 * math.pi) * np.cos(theta) * math.cos(phi) * af
        ref_p = -k * Z0 / (2 * math.pi) * math.sin(phi) * af
        scale = np.maximum(np.abs(ref_t), np.abs(ref_p)).max()
        pattern = max(pattern, np.abs(ft - ref_t).max() / scale, np.abs(fp - ref_p).max() / scale)

    lx = ctx.lam / 200
    basis = build_basis(build_mesh(DesignRegion(lx, lx, ShapeMask.from_text("00\n11")), 2, 2))
    F_s = radiation_operator(basis, stack, ctx)
    P = 0.5 * np.sum(np.abs(F_s[:, 0]) ** 2)
    J = basis.dipole_moment()
    integral, _ = quad(lambda u: (1 + u * u) * math.sin(k * h * u) ** 2, 0, 1, epsabs=0, epsrel=1e-13)
    P_ref = Z0 * k**2 * J**2 / (8 * math.pi) * integral
    perr = abs(P - P_ref) / P_ref
    dt = time.perf_counter() - t0
    report(
        capsys, 3, pattern < 1e-10 and perr < 1e-3 and dt < 10,
        f"pattern max err/peak {pattern:.2e} at 20 theta x 3 phi; HED power rel err {perr:.2e} ({dt:.2f} s)",
    )


def test_criterion_04_optimizer(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_gap = worst_res = 0.0
    for _ in range(50):
        A = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        R = A @ A.conj().T / 8 + 0.5 * np.eye(8)
        B = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        X = 0.5 * (B + B.conj().T)
        F = (rng.normal(size=(3, 8)) + 1j * rng.normal(size=(3, 8))) / math.sqrt(8)
        r = efficiency_ub_resonant(F.conj().T @ F, R, X, F)
        assert np.linalg.eigvalsh(X).min() < 0 < np.linalg.eigvalsh(X).max()
        worst_gap = max(worst_gap, abs(r.gap.relative_gap))
        worst_res = max(worst_res, r.resonance_residual, r.power_residual)

    F = np.array([[1.0, 1.0, 0.2]])
    r3 = efficiency_ub_resonant(F.T @ F, np.eye(3), np.diag([1.0, -1.0, 0.0]), F)
    n = 100
    a = np.linspace(0, math.pi / 2, n)
    p = np.linspace(0, 2 * math.pi, n, endpoint=False)
    Aa, P2, P3 = np.meshgrid(a, p, p, indexing="ij")
    c = np.cos(Aa) / math.sqrt(2)
    grid_best = (np.abs(c + c * np.exp(1j * P2) + 0.2 * np.sin(Aa) * np.exp(1j * P3)) ** 2).max()
    resolution = 2.04 * (a[1] - a[0]) ** 2
    grid_ok = grid_best <= r3.value + 1e-12 and r3.value - grid_best <= resolution
    dt = time.perf_counter() - t0
    report(
        capsys, 4, worst_gap < 1e-6 and worst_res < 1e-8 and grid_ok and dt < 60,
        f"50 cases: max gap {worst_gap:.2e}, max residual {worst_res:.2e}; "
        f"3x3 dual {r3.value:.6f} vs grid {grid_best:.6f} over {Aa.size} samples ({dt:.1f} s)",
    )


def test_criterion_05_efficiency_anchors(capsys):
    t0 = time.perf_counter()
    targets = [(0.5, 0.001, 0.80, 0.05), (0.5, 0.1, 0.10, 0.03), (1 / 3, 0.001, 0.60, 0.07), (1 / 3, 0.1, 0.015, 0.01)]
    parts, ok = [], True
    for size, td, want, tol in targets:
        basis, *_, ops = ops_at(size, td)
        r, _ = bounds(ops)
        good = abs(r.value - want) <= tol and r.certified
        ok &= good
        parts.append(f"{size:.3f}/{td:g}: {r.value:.4f} (want {want}+-{tol}, mesh {basis.mesh.nx}x{basis.mesh.ny})")
    dt = time.perf_counter() - t0
    report(capsys, 5, ok and dt < 1800, "; ".join(parts) + f" ({dt:.0f} s)")


def test_criterion_06_monotonicity(capsys):
    basis, stack, ctx, ops = ops_at(0.35, 0.0)
    etas = []
    for rs in (0.0, *RS):
        r, n = bounds(_with_ohmic(ops, basis, rs))
        etas.append(r.value)
    mono = all(b <= a + 1e-12 for a, b in zip(etas, etas[1:]))
    lossy = ops_at(0.35, 0.01)[3]
    a = efficiency_ub_resonant(lossy.R_r, lossy.R_total, lossy.X, lossy.F_s, p_in=0.5)
    b = efficiency_ub_resonant(lossy.R_r, lossy.R_total, lossy.X, lossy.F_s, p_in=5.0)
    inv = abs(a.value - b.value) / a.value
    bounds(lossy)
    order = all(r <= n + 1e-9 for r, n in _RESULTS)
    report(
        capsys, 6, mono and order and inv < 1e-10,
        f"eta_ub over R_s=(0,{RS}) = {', '.join(f'{e:.5f}' for e in etas)}; "
        f"resonant<=nonresonant on {len(_RESULTS)} points; P_in invariance {inv:.1e}",
    )


def test_criterion_07_normalization_collapse(capsys):
    kh = None
    rho = []
    basis, stack, ctx, ops = ops_at(0.35, 0.0)
    kh = ctx.k * stack.h
    dsw = delta_sw(4.0, kh)
    for rs in RS:
        r, _ = bounds(_with_ohmic(ops, basis, rs))
        rho.append((1 / r.value - 1 - dsw) * Z0 / rs)
    tand = []
    for td in TDS:
        r, _ = bounds(ops_at(0.35, td)[3])
        tand.append((1 / r.value - 1 - dsw) / td)
    s1, s2 = spread(rho), spread(tand)
    report(
        capsys, 7, s1 < 0.05 and s2 < 0.10,
        f"delta_rho*Z0/R_s = {', '.join(f'{v:.1f}' for v in rho)} (spread {s1:.2%}); "
        f"(delta-dsw)/tand = {', '.join(f'{v:.1f}' for v in tand)} (spread {s2:.2%})",
    )


def test_criterion_08_directivity(capsys):
    parts, ok = [], True
    for size in (0.35, 0.5):
        D = []
        for td in TDS:
            basis, stack, ctx, ops = ops_at(size, td)
            F = farfield_row(basis, stack, ctx, 0.0, 0.0)
            g = gain_ub(F, ops.R_total, ops.X, ops.R_r)
            D.append(g.directivity)
        s = spread(D)
        ok &= s < 0.05
        parts.append(f"size {size}: D = {', '.join(f'{d:.3f}' for d in D)} (spread {s:.2%})")
    report(capsys, 8, ok, "; ".join(parts))


def test_criterion_09_power_balance(capsys):
    basis, stack, ctx, ops = canonical_point(0.5, 0.0, 4, 4)
    Rn = np.linalg.norm(ops.R, 2)
    mineig = np.linalg.eigvalsh(ops.R - ops.R_r).min()
    recip = np.abs(ops.Z - ops.Z.T).max() / np.abs(ops.Z).max()
    report(
        capsys, 9, mineig >= -1e-10 * Rn and recip < 1e-8,
        f"min eig(R - R_r)/||R|| = {mineig / Rn:.2e}; reciprocity {recip:.1e}",
    )


def test_criterion_10_determinism(capsys, tmp_path):
    text = (
        "[geometry]\nlx_over_lambda_eps = 0.3, 0.4, 0.5\nnx = 6\nny = 5\n"
        "[substrate]\neps_r = 4\ntan_delta = 0.001, 0.1\n[ohmic]\nr_s = 0, 0.377\n"
    )
    cfg = config.loads(text)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_sweep(cfg, threads=1, out=a)
    run_sweep(cfg, threads=3, out=b)
    same = a.read_bytes() == b.read_bytes()
    report(capsys, 10, same, f"{len(a.read_text().splitlines()) - 2} rows, byte-identical with 1 and 3 threads: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
