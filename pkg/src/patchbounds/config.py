"""INI sweep configuration.

Example::

    [geometry]
    lx_over_lambda_eps = 0.25:0.6:20      ; start:stop:count, or a comma list
    ly_over_lx = 0.77
    h_over_lx = 0.05
    shape = full

    [substrate]
    eps_r = 4
    tan_delta = 0.001, 0.01, 0.1

    [solve]
    resonant = true

See ``docs/config.md`` for every key.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import ShapeMask
from .semianalytic import parse_scaling
from .spectral import AssemblyOptions


class ConfigError(ValueError):
    def __init__(self, message, path=None, section=None, key=None, line=None):
        where = []
        if path:
            where.append(str(path) + (f":{line}" if line else ""))
        if section:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        super().__init__(f"{' '.join(where)}: {message}" if where else message)
        self.line = line


SIZE_KEYS = ("lx_over_lambda_eps", "lx_over_lambda", "lx")
SECTIONS = {
    "geometry": {"lx_over_lambda_eps", "lx_over_lambda", "lx", "ly", "ly_over_lx", "h", "h_over_lx", "shape",
                 "slot_x", "slot_y", "notch_x", "waist_y", "mask_file", "nx", "ny", "min_cells", "cells_per_lambda_eps"},
    "substrate": {"eps_r", "tan_delta"},
    "frequency": {"f", "reference"},
    "ohmic": {"r_s"},
    "solve": {"resonant", "nonresonant", "gain", "theta", "phi", "loss_grid", "n_theta", "n_phi", "truncation",
              "contour_points", "alpha_points", "points_per_panel", "tail_tolerance", "backend", "subspace"},
    "output": {"csv", "operator_dir", "timing"},
    "semianalytic": {"eps_r", "h_over_lambda", "kh"},
    "pipeline": {"q", "eps_r", "tan_delta", "h", "f1", "f2", "scaling"},
}
SWEEP_SECTIONS = {"geometry", "substrate", "frequency", "ohmic", "solve", "output"}


def parse_values(text: str) -> list[float]:
    """``a:b:n`` (inclusive linspace) or a comma/space separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:count, got {text!r}")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError("range count must be >= 1")
        if b < a:
            raise ValueError(f"range {text!r} is not ordered")
        return [float(v) for v in np.linspace(a, b, n)] if n > 1 else [a]
    vals = [float(v) for v in re.split(r"[,\s]+", text) if v]
    if not vals:
        raise ValueError("empty list")
    return vals


def _pair(text):
    vals = parse_values(text)
    if len(vals) != 2:
        raise ValueError(f"expected two fractions, got {text!r}")
    return tuple(vals)


@dataclass(frozen=True)
class SweepConfig:
    size_kind: str  # one of SIZE_KEYS
    sizes: tuple[float, ...]
    frequencies: tuple[float, ...]
    eps_r: float
    tan_deltas: tuple[float, ...] = (0.0,)
    R_s: tuple[float, ...] = (0.0,)
    loss_grid: str = "product"
    ly_over_lx: float = 0.77
    ly: float | None = None
    h_over_lx: float | None = 0.05
    h: float | None = None
    shape: ShapeMask = field(default_factory=ShapeMask.full)
    shape_name: str = "full"
    nx: int | None = None
    ny: int | None = None
    min_cells: int = 16
    cells_per_lambda_eps: float = 20.0
    resonant: bool = True
    nonresonant: bool = True
    gain: bool = False
    theta: float = 0.0
    phi: float = 0.0
    subspace: bool | None = None
    options: AssemblyOptions = field(default_factory=AssemblyOptions)
    csv: str | None = None
    operator_dir: str | None = None
    timing: bool = False
    source: str | None = None

    def loss_cases(self) -> list[tuple[float, float]]:
        if self.loss_grid == "separate":
            cases = [(td, 0.0) for td in self.tan_deltas] + [(0.0, rs) for rs in self.R_s]
            return list(dict.fromkeys(cases))
        return [(td, rs) for td in self.tan_deltas for rs in self.R_s]


def _locate(path, section, key):
    if not path:
        return None
    sec = None
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            sec = m.group(1).strip().lower()
        elif sec == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
            return n
    return None


class _Section:
    def __init__(self, cp, name, path):
        self.cp, self.name, self.path = cp, name, path
        self.sec = cp[name] if cp.has_section(name) else {}

    def err(self, key, msg):
        return ConfigError(msg, self.path, self.name, key, _locate(self.path, self.name, key))

    def get(self, key, conv, default=None):
        if key not in self.sec:
            return default
        raw = self.sec[key]
        try:
            return conv(raw)
        except (ValueError, TypeError) as e:
            raise self.err(key, f"bad value {raw!r}: {e}") from None


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    if t == "auto":
        return None
    raise ValueError("expected true/false")


def _positive(conv):
    def f(text):
        v = conv(text)
        if not v > 0:
            raise ValueError("must be positive")
        return v

    return f


def _nonneg_list(text):
    vals = parse_values(text)
    if any(v < 0 for v in vals):
        raise ValueError("values must be >= 0")
    return tuple(vals)


def _positive_list(text):
    vals = parse_values(text)
    if any(v <= 0 for v in vals):
        raise ValueError("values must be > 0")
    return tuple(vals)


def _shape(g: _Section, base: Path | None):
    name = g.get("shape", lambda s: s.strip().lower(), "full")
    if name == "full":
        return name, ShapeMask.full()
    if name in ("slot", "slot_loaded"):
        kw = {k: g.get(k, _pair) for k in ("slot_x", "slot_y")}
        return "slot", ShapeMask.slot_loaded(**{k: v for k, v in kw.items() if v is not None})
    if name in ("h", "h_shaped"):
        kw = {k: g.get(k, _pair) for k in ("notch_x", "waist_y")}
        return "h", ShapeMask.h_shaped(**{k: v for k, v in kw.items() if v is not None})
    if name == "custom":
        mf = g.get("mask_file", str)
        if mf is None:
            raise g.err("mask_file", "custom shape needs mask_file")
        p = Path(mf)
        if not p.is_absolute() and base is not None:
            p = base / p
        try:
            return "custom", ShapeMask.from_text(p.read_text())
        except (OSError, ValueError) as e:
            raise g.err("mask_file", str(e)) from None
    raise g.err("shape", f"unknown shape {name!r} (full, slot, h, custom)")


def _validate(cp, path):
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section (expected one of {sorted(SECTIONS)})", path, sec)
        for key in cp[sec]:
            if key not in SECTIONS[sec]:
                raise ConfigError("unknown key", path, sec, key, _locate(path, sec, key))


def from_parser(cp: configparser.ConfigParser, path=None) -> SweepConfig:
    _validate(cp, path)
    base = Path(path).parent if path else None
    g = _Section(cp, "geometry", path)
    present = [k for k in SIZE_KEYS if k in g.sec]
    if len(present) != 1:
        raise ConfigError(f"give exactly one of {', '.join(SIZE_KEYS)}", path, "geometry")
    size_kind = present[0]
    sizes = g.get(size_kind, _positive_list)
    shape_name, shape = _shape(g, base)

    s = _Section(cp, "substrate", path)
    eps = s.get("eps_r", float)
    if eps is None:
        raise ConfigError("eps_r is required", path, "substrate")
    if eps < 1:
        raise s.err("eps_r", "real permittivity must be >= 1")
    tds = s.get("tan_delta", _nonneg_list, (0.0,))

    fq = _Section(cp, "frequency", path)
    if size_kind == "lx":
        freqs = fq.get("f", _positive_list)
        if freqs is None:
            raise ConfigError("absolute lx needs [frequency] f", path, "frequency")
    else:
        freqs = (fq.get("reference", _positive(float), 1e9),)
        if "f" in fq.sec:
            raise fq.err("f", "frequency lists only apply with absolute lx; use reference")

    h = g.get("h", _positive(float))
    h_over = g.get("h_over_lx", _positive(float))
    if h is not None and h_over is not None:
        raise g.err("h", "give h or h_over_lx, not both")
    if h is None and h_over is None:
        h_over = 0.05
    ly = g.get("ly", _positive(float))
    if ly is not None and size_kind != "lx":
        raise g.err("ly", "absolute ly needs absolute lx")

    o = _Section(cp, "ohmic", path)
    rs = o.get("r_s", _nonneg_list, (0.0,))

    v = _Section(cp, "solve", path)
    loss_grid = v.get("loss_grid", lambda t: t.strip().lower(), "product")
    if loss_grid not in ("product", "separate"):
        raise v.err("loss_grid", "expected product or separate")
    defaults = AssemblyOptions()
    opt = AssemblyOptions(
        contour_points=v.get("contour_points", _positive(int), defaults.contour_points),
        alpha_points=v.get("alpha_points", _positive(int), defaults.alpha_points),
        truncation=v.get("truncation", _positive(float), defaults.truncation),
        points_per_panel=v.get("points_per_panel", _positive(int), defaults.points_per_panel),
        tail_tolerance=v.get("tail_tolerance", _positive(float), defaults.tail_tolerance),
        n_theta=v.get("n_theta", _positive(int), defaults.n_theta),
        n_phi=v.get("n_phi", _positive(int), defaults.n_phi),
        backend=v.get("backend", lambda t: t.strip()),
    )
    if opt.n_theta < 2 or opt.n_phi < 2:
        raise ConfigError("quadrature orders must be >= 2", path, "solve")

    out = _Section(cp, "output", path)
    nx, ny = g.get("nx", int), g.get("ny", int)
    if (nx is None) != (ny is None):
        raise g.err("nx", "give both nx and ny or neither")
    if nx is not None and (nx < 2 or ny < 2):
        raise g.err("nx", "nx and ny must be >= 2")
    return SweepConfig(
        size_kind=size_kind,
        sizes=tuple(sizes),
        frequencies=tuple(freqs),
        eps_r=eps,
        tan_deltas=tds,
        R_s=rs,
        loss_grid=loss_grid,
        ly_over_lx=g.get("ly_over_lx", _positive(float), 0.77),
        ly=ly,
        h_over_lx=h_over,
        h=h,
        shape=shape,
        shape_name=shape_name,
        nx=nx,
        ny=ny,
        min_cells=g.get("min_cells", _positive(int), 16),
        cells_per_lambda_eps=g.get("cells_per_lambda_eps", _positive(float), 20.0),
        resonant=v.get("resonant", _bool, True),
        nonresonant=v.get("nonresonant", _bool, True),
        gain=v.get("gain", _bool, False),
        theta=v.get("theta", float, 0.0),
        phi=v.get("phi", float, 0.0),
        subspace=v.get("subspace", _bool),
        options=opt,
        csv=out.get("csv", str),
        operator_dir=out.get("operator_dir", str),
        timing=out.get("timing", _bool, False),
        source=str(path) if path else None,
    )


@dataclass(frozen=True)
class SemiConfig:
    """Surface-wave ratio table over permittivity and electrical thickness."""

    eps_r: tuple[float, ...]
    kh: tuple[float, ...]
    h_over_lambda: tuple[float, ...] | None = None


@dataclass(frozen=True)
class PipelineConfig:
    Q: float
    eps_r: float
    tan_delta: float
    h: float
    f1: float
    f2: float
    scaling: str = "power_law"


@dataclass(frozen=True)
class ConfigFile:
    sweep: SweepConfig | None
    semianalytic: SemiConfig | None
    pipeline: PipelineConfig | None
    path: str | None = None


def _semi(cp, path):
    s = _Section(cp, "semianalytic", path)
    eps = s.get("eps_r", _positive_list)
    if eps is None:
        raise ConfigError("eps_r is required", path, "semianalytic")
    if any(e < 1 for e in eps):
        raise s.err("eps_r", "permittivity must be >= 1")
    hol, kh = s.get("h_over_lambda", _positive_list), s.get("kh", _positive_list)
    if (hol is None) == (kh is None):
        raise ConfigError("give exactly one of h_over_lambda, kh", path, "semianalytic")
    if hol is not None:
        kh = tuple(2 * np.pi * v for v in hol)
    return SemiConfig(tuple(eps), tuple(kh), None if hol is None else tuple(hol))


def _pipeline(cp, path):
    s = _Section(cp, "pipeline", path)
    vals = {}
    for key in ("q", "eps_r", "h", "f1", "f2"):
        v = s.get(key, _positive(float))
        if v is None:
            raise ConfigError(f"{key} is required", path, "pipeline")
        vals[key] = v
    td = s.get("tan_delta", float, 0.0)
    if td < 0:
        raise s.err("tan_delta", "must be >= 0")
    if vals["f2"] > vals["f1"]:
        raise s.err("f2", "target frequency must not exceed f1")
    scaling = s.get("scaling", str, "power_law")
    try:
        parse_scaling(scaling)
    except ValueError as e:
        raise s.err("scaling", str(e)) from None
    return PipelineConfig(vals["q"], vals["eps_r"], td, vals["h"], vals["f1"], vals["f2"], scaling)


def parse(cp: configparser.ConfigParser, path=None) -> ConfigFile:
    """Every study described by a config file."""
    _validate(cp, path)
    secs = set(cp.sections())
    sweep = from_parser(cp, path) if secs & SWEEP_SECTIONS else None
    semi = _semi(cp, path) if "semianalytic" in secs else None
    pipe = _pipeline(cp, path) if "pipeline" in secs else None
    if sweep is None and semi is None and pipe is None:
        raise ConfigError("config describes no study", path)
    return ConfigFile(sweep, semi, pipe, str(path) if path else None)


def _read(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except configparser.Error as e:
        raise ConfigError(f"parse error: {e}", path) from None
    return cp


def load_file(path) -> ConfigFile:
    return parse(_read(path), path)


def load(path) -> SweepConfig:
    cf = load_file(path)
    if cf.sweep is None:
        raise ConfigError("config has no sweep ([geometry] missing)", path)
    return cf.sweep


def loads(text: str, path=None) -> SweepConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"parse error: {e}") from None
    return from_parser(cp, path)


def points_in(cfg: SweepConfig) -> int:
    return len(cfg.sizes) * len(cfg.frequencies) * len(cfg.loss_cases())
