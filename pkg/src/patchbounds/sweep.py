"""Sweep orchestration: point expansion, operator cache, deterministic CSV."""
from __future__ import annotations

import hashlib
import io
import logging
import math
import threading
import time
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import opfile
from .bounds import efficiency_ub_nonresonant, efficiency_ub_resonant, gain_ub
from .config import SweepConfig
from .constants import C0, Z0
from .geometry import DesignRegion, build_basis, build_mesh, default_cells
from .greens import SubstrateStack, WaveContext
from .mom import OperatorSet, assemble_operators, farfield_row, ohmic_gram
from .semianalytic import delta_sw
from .spectral import AssemblyOptions

log = logging.getLogger(__name__)

SCHEMA = "patchbounds-sweep/1"
COLUMNS = (
    "index", "shape", "lx_over_lambda", "lx_over_lambda_eps", "frequency_hz", "lx_m", "ly_m", "h_m",
    "eps_r_real", "tan_delta", "R_s", "nx", "ny", "N",
    "eta_ub", "eta_ub_nonresonant", "G_ub", "D",
    "delta", "delta_sw", "delta_rho", "delta_rho_Z0_over_Rs", "delta_minus_sw_over_tand",
    "nu_star", "gap", "resonance_residual", "power_residual", "certified", "wall_time_s", "error",
)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    frequency: float
    lx: float
    ly: float
    h: float
    tan_delta: float
    R_s: float
    nx: int
    ny: int

    def lambda_eps(self, eps_r):
        return C0 / self.frequency / math.sqrt(eps_r)


def expand(cfg: SweepConfig) -> list[SweepPoint]:
    """Grid points in output order: loss case, then size, then frequency."""
    pts = []
    for td, rs in cfg.loss_cases():
        for size in cfg.sizes:
            for f in cfg.frequencies:
                lam = C0 / f
                lam_eps = lam / math.sqrt(cfg.eps_r)
                lx = {"lx_over_lambda_eps": size * lam_eps, "lx_over_lambda": size * lam, "lx": size}[cfg.size_kind]
                ly = cfg.ly if cfg.ly is not None else cfg.ly_over_lx * lx
                h = cfg.h if cfg.h is not None else cfg.h_over_lx * lx
                if cfg.nx is not None:
                    nx, ny = cfg.nx, cfg.ny
                else:
                    nx, ny = default_cells(lx / lam_eps, ly / lx, cfg.min_cells, cfg.cells_per_lambda_eps)
                pts.append(SweepPoint(len(pts), f, lx, ly, h, td, rs, nx, ny))
    return pts


class OperatorCache:
    """R_s-independent operators keyed by mesh, stack, frequency and options.

    With a directory, entries are stored as PBOP1 files that survive between
    runs.  In memory an entry is kept only while reserved uses remain (see
    :meth:`reserve`), since each set carries a large ``F_s``.
    """

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, OperatorSet] = {}
        self._pending: Counter = Counter()
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    def reserve(self, key: str, uses: int = 1) -> None:
        """Announce ``uses`` upcoming :meth:`get` calls for ``key``."""
        with self._guard:
            self._pending[key] += uses

    @staticmethod
    def key(mesh, stack: SubstrateStack, ctx: WaveContext, options: AssemblyOptions) -> str:
        text = f"{mesh.digest()}|{stack.eps_r!r}|{stack.h!r}|{ctx.f!r}|{options.key()}"
        return hashlib.sha256(text.encode()).hexdigest()[:24]

    def get(self, basis, stack, ctx, options) -> OperatorSet:
        k = self.key(basis.mesh, stack, ctx, options)
        with self._guard:
            lock = self._locks.setdefault(k, threading.Lock())
        with lock:
            ops = self._mem.get(k)
            path = self.directory / f"{k}.pbop" if self.directory else None
            if ops is not None:
                self.hits += 1
                log.info("operator cache hit %s; assembly skipped", k)
            elif path is not None and path.exists():
                ops = opfile.load(path)
                self.hits += 1
                log.info("operator cache hit %s (disk); assembly skipped", k)
            else:
                self.misses += 1
                ops = assemble_operators(basis, stack, ctx, 0.0, options)
                if path is not None:
                    tmp = path.with_suffix(f".{threading.get_ident()}.tmp")
                    opfile.dump(ops, tmp)
                    tmp.replace(path)
            with self._guard:
                self._pending[k] -= 1
                if self._pending[k] > 0:
                    self._mem[k] = ops
                else:
                    self._mem.pop(k, None)
                    del self._pending[k]
            return ops


def _with_ohmic(ops: OperatorSet, basis, R_s: float) -> OperatorSet:
    if R_s == 0:
        return ops
    meta = dict(ops.metadata, R_s=repr(float(R_s)))
    return replace(ops, R_ohm=ohmic_gram(basis, R_s), metadata=meta)


def point_setup(pt: SweepPoint, cfg: SweepConfig):
    """``(basis, stack, ctx)`` of a grid point."""
    stack = SubstrateStack.from_loss_tangent(cfg.eps_r, pt.tan_delta, pt.h)
    ctx = WaveContext.for_stack(pt.frequency, stack)
    basis = build_basis(build_mesh(DesignRegion(pt.lx, pt.ly, cfg.shape), pt.nx, pt.ny))
    return basis, stack, ctx


def evaluate_point(pt: SweepPoint, cfg: SweepConfig, cache: OperatorCache | None = None) -> dict:
    """Bounds at one grid point as a CSV row dict (values unformatted)."""
    cache = cache or OperatorCache()
    t0 = time.perf_counter()
    basis, stack, ctx = point_setup(pt, cfg)
    ops = _with_ohmic(cache.get(basis, stack, ctx, cfg.options), basis, pt.R_s)
    if cfg.operator_dir:
        d = Path(cfg.operator_dir)
        d.mkdir(parents=True, exist_ok=True)
        opfile.dump(ops, d / f"point{pt.index:04d}.pbop")

    row = {
        "index": pt.index, "shape": cfg.shape_name, "lx_over_lambda": pt.lx / ctx.lam,
        "lx_over_lambda_eps": pt.lx / ctx.lambda_eps, "frequency_hz": pt.frequency,
        "lx_m": pt.lx, "ly_m": pt.ly, "h_m": pt.h, "eps_r_real": cfg.eps_r,
        "tan_delta": pt.tan_delta, "R_s": pt.R_s, "nx": pt.nx, "ny": pt.ny, "N": basis.N,
    }
    primary = None
    if cfg.nonresonant or not cfg.resonant:
        nr = efficiency_ub_nonresonant(ops.R_r, ops.R_total)
        row["eta_ub_nonresonant"] = nr.value
        primary = nr
    if cfg.resonant:
        primary = efficiency_ub_resonant(ops.R_r, ops.R_total, ops.X, ops.F_s, subspace=cfg.subspace)
    row["eta_ub"] = primary.value
    if cfg.gain:
        F = farfield_row(basis, stack, ctx, math.radians(cfg.theta), math.radians(cfg.phi))
        g = gain_ub(F, ops.R_total, ops.X, ops.R_r, resonant=cfg.resonant)
        row["G_ub"], row["D"] = g.value, g.directivity
    delta = 1 / primary.value - 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dsw = delta_sw(cfg.eps_r, ctx.k * pt.h)
    row.update(delta=delta, delta_sw=dsw, delta_rho=delta - dsw)
    if pt.R_s > 0:
        row["delta_rho_Z0_over_Rs"] = (delta - dsw) * Z0 / pt.R_s
    if pt.tan_delta > 0 and pt.R_s == 0:
        row["delta_minus_sw_over_tand"] = (delta - dsw) / pt.tan_delta
    row.update(
        nu_star=primary.nu_star, gap=primary.gap.relative_gap, resonance_residual=primary.resonance_residual,
        power_residual=primary.power_residual, certified=primary.certified,
    )
    if cfg.timing:
        row["wall_time_s"] = time.perf_counter() - t0
    return row


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".8e")
    return str(v).replace(",", ";").replace("\n", " ")


def render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}\n")
    buf.write(",".join(COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(fmt(r.get(c)) for c in COLUMNS) + "\n")
    return buf.getvalue()


@dataclass
class SweepResult:
    rows: list[dict]
    failed: int

    @property
    def exit_code(self) -> int:
        if self.failed == 0:
            return 0
        return 2 if self.failed == len(self.rows) else 3

    def csv(self) -> str:
        return render_csv(self.rows)


def run_sweep(cfg: SweepConfig, threads: int = 1, cache: OperatorCache | None = None, out=None) -> SweepResult:
    """Evaluate every grid point; rows come back in grid order whatever the completion order."""
    cache = cache or OperatorCache()
    pts = expand(cfg)
    for pt in pts:
        try:
            basis, stack, ctx = point_setup(pt, cfg)
        except Exception:  # noqa: BLE001 - reported when the point runs
            continue
        cache.reserve(cache.key(basis.mesh, stack, ctx, cfg.options))

    def work(pt):
        try:
            return evaluate_point(pt, cfg, cache), False
        except Exception as e:  # noqa: BLE001 - recorded per point
            log.warning("point %d failed: %s", pt.index, e)
            row = {"index": pt.index, "shape": cfg.shape_name, "frequency_hz": pt.frequency, "lx_m": pt.lx,
                   "ly_m": pt.ly, "h_m": pt.h, "eps_r_real": cfg.eps_r, "tan_delta": pt.tan_delta,
                   "R_s": pt.R_s, "nx": pt.nx, "ny": pt.ny, "error": f"{type(e).__name__}: {e}"}
            return row, True

    if threads <= 1:
        results = [work(p) for p in pts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, pts))
    rows = [r for r, _ in results]
    res = SweepResult(rows, sum(bad for _, bad in results))
    target = out or cfg.csv
    if target:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(res.csv())
    return res
