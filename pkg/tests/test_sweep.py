import logging
from pathlib import Path

import numpy as np
import pytest

from patchbounds import config
from patchbounds.bounds import efficiency_ub_nonresonant, efficiency_ub_resonant
from patchbounds.geometry import DesignRegion, build_basis, build_mesh
from patchbounds.greens import SubstrateStack, WaveContext
from patchbounds.mom import assemble_operators
from patchbounds.sweep import COLUMNS, SCHEMA, OperatorCache, expand, fmt, render_csv, run_sweep

ROOT = Path(__file__).resolve().parents[1]

SMALL = """\
[geometry]
lx_over_lambda_eps = 0.35, 0.45, 0.5
nx = 4
ny = 4

[substrate]
eps_r = 4
tan_delta = 0.01, 0.1

[ohmic]
r_s = 0, 0.377
"""


@pytest.fixture(scope="module")
def small_cfg():
    return config.loads(SMALL)


def test_expand_order(small_cfg):
    pts = expand(small_cfg)
    assert len(pts) == 12
    assert [p.index for p in pts] == list(range(12))
    # loss case outermost, then size
    assert [(p.tan_delta, p.R_s) for p in pts[:3]] == [(0.01, 0.0)] * 3
    assert pts[0].lx < pts[1].lx < pts[2].lx
    assert pts[3].R_s == 0.377
    assert all(p.ly == pytest.approx(0.77 * p.lx) and p.h == pytest.approx(0.05 * p.lx) for p in pts)


def test_separate_loss_grid():
    cfg = config.loads(SMALL + "[solve]\nloss_grid = separate\n")
    assert cfg.loss_cases() == [(0.01, 0.0), (0.1, 0.0), (0.0, 0.0), (0.0, 0.377)]


def test_default_mesh_density():
    cfg = config.loads("[geometry]\nlx_over_lambda_eps = 0.5, 1.2\n[substrate]\neps_r = 4\n")
    p1, p2 = expand(cfg)
    assert (p1.nx, p1.ny) == (16, 12)
    assert p2.nx == 24 and p2.lx / p2.nx <= p2.lambda_eps(4.0) / 20 + 1e-15


def test_fmt():
    assert fmt(None) == ""
    assert fmt(True) == "1"
    assert fmt(3) == "3"
    assert fmt(0.1) == "1.00000000e-01"
    assert fmt(float("nan")) == "nan"
    assert fmt("a,b") == "a;b"


def test_csv_header(small_cfg):
    text = render_csv([{"index": 0}])
    lines = text.splitlines()
    assert lines[0] == f"# schema: {SCHEMA}"
    assert lines[1].split(",") == list(COLUMNS)
    assert lines[2].count(",") == len(COLUMNS) - 1


def test_single_point_matches_direct_call():
    cfg = config.loads("[geometry]\nlx_over_lambda_eps = 0.45\nnx = 4\nny = 4\n[substrate]\neps_r = 4\ntan_delta = 0.01\n")
    res = run_sweep(cfg)
    assert len(res.rows) == 1 and res.exit_code == 0
    row = res.rows[0]

    lx = 0.45 * WaveContext.at(1e9, 4.0).lambda_eps
    stack = SubstrateStack.from_loss_tangent(4.0, 0.01, 0.05 * lx)
    ctx = WaveContext.for_stack(1e9, stack)
    basis = build_basis(build_mesh(DesignRegion.canonical(lx), 4, 4))
    ops = assemble_operators(basis, stack, ctx)
    r = efficiency_ub_resonant(ops.R_r, ops.R_total, ops.X, ops.F_s)
    n = efficiency_ub_nonresonant(ops.R_r, ops.R_total)
    assert row["eta_ub"] == r.value
    assert row["eta_ub_nonresonant"] == n.value
    assert row["nu_star"] == r.nu_star
    assert row["lx_m"] == lx


def test_warm_cache_identical_and_skips_assembly(small_cfg, tmp_path, caplog):
    cache_dir = tmp_path / "cache"
    c1 = OperatorCache(cache_dir)
    a = run_sweep(small_cfg, cache=c1).csv()
    # R_s does not enter the cached operators, so half the points hit in memory
    assert c1.misses == 6 and c1.hits == 6
    assert len(list(cache_dir.glob("*.pbop"))) == 6
    c2 = OperatorCache(cache_dir)
    with caplog.at_level(logging.INFO, logger="patchbounds.sweep"):
        b = run_sweep(small_cfg, cache=c2).csv()
    assert c2.misses == 0
    assert "assembly skipped" in caplog.text
    assert a == b


def test_deterministic_across_threads(small_cfg, tmp_path):
    out1, out4 = tmp_path / "t1.csv", tmp_path / "t4.csv"
    run_sweep(small_cfg, threads=1, out=out1)
    run_sweep(small_cfg, threads=4, out=out4)
    assert out1.read_bytes() == out4.read_bytes()


def test_sweep_rows_physical(small_cfg):
    rows = run_sweep(small_cfg).rows
    for r in rows:
        assert r["error"] if "error" in r else True
        assert 0 < r["eta_ub"] <= r["eta_ub_nonresonant"] + 1e-9 <= 1 + 1e-9
        assert r["delta"] == pytest.approx(1 / r["eta_ub"] - 1)
        assert r["certified"]
    with_rs = [r for r in rows if r["R_s"] > 0]
    assert all(np.isfinite(r["delta_rho_Z0_over_Rs"]) for r in with_rs)
    assert all(r.get("delta_minus_sw_over_tand") is None for r in with_rs)


def test_operator_dump_dir(tmp_path):
    cfg = config.loads(SMALL.replace("0.35, 0.45, 0.5", "0.4") + f"[output]\noperator_dir = {tmp_path}\n")
    run_sweep(cfg)
    assert sorted(p.name for p in tmp_path.glob("*.pbop")) == [f"point{i:04d}.pbop" for i in range(4)]


@pytest.mark.slow
def test_fig3_sweep_trend(tmp_path):
    cfg = config.load(ROOT / "configs" / "fig3.cfg")
    res = run_sweep(cfg, threads=4, out=tmp_path / "fig3.csv")
    assert res.exit_code == 0 and len(res.rows) == 60
    for td in cfg.tan_deltas:
        rows = [r for r in res.rows if r["tan_delta"] == td and r["lx_over_lambda_eps"] <= 0.5 + 1e-9]
        eta = [r["eta_ub"] for r in rows]
        assert np.all(np.diff(eta) >= 0), (td, eta)
