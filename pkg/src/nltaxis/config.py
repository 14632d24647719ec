"""Experiment configuration files: strict TOML parsing and run manifests.

A config is a flat sectioned file; unknown sections or keys are hard errors,
and every applied default is materialized into the resolved dictionary that
the emitted manifest records.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import ConfigurationError
from .grid import Grid1D, make_grid
from .models import CoefficientSet, build_custom, build_preset
from .operators import constant_kernel, exponential_kernel
from .solver import FORMULATION_KINDS, LOCAL, Formulation, SolverConfig, initial_conditions

_MODEL_PARAMS = {
    "minimal_linear": ("a", "s_cc", "s_cv", "mu"),
    "saturating": ("b", "s_cc", "s_cv", "mu_c", "k_c", "eta_c", "mu_v", "k_v", "lambda_v"),
    "crowding": ("a", "b", "s_cc", "s_cv", "mu_c", "k_c", "eta_c", "mu_v", "k_v", "lambda_v"),
    "custom": ("d_c", "chi", "g", "f_c", "f_v", "dg_dc", "dg_dv", "d_v", "kernel"),
}


def _section(doc: dict, name: str, required: bool = True) -> Optional[dict]:
    if name not in doc:
        if required:
            raise ConfigurationError(f"missing [{name}] section")
        return None
    if not isinstance(doc[name], dict):
        raise ConfigurationError(f"[{name}] must be a section")
    return doc[name]


class _Keys:
    """Accessor that tracks consumed keys and rejects leftovers."""

    def __init__(self, name: str, data: dict):
        self.name = name
        self.data = dict(data)

    def take(self, key, kind, default=...):
        if key not in self.data:
            if default is ...:
                raise ConfigurationError(f"[{self.name}] is missing required key {key!r}")
            return default
        val = self.data.pop(key)
        if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
            return float(val)
        if kind is int and isinstance(val, int) and not isinstance(val, bool):
            return int(val)
        if kind is str and isinstance(val, str):
            return val
        if kind is list and isinstance(val, list):
            return val
        raise ConfigurationError(f"[{self.name}].{key} has the wrong type (expected {kind.__name__})")

    def finish(self) -> None:
        if self.data:
            raise ConfigurationError(f"unknown keys in [{self.name}]: {sorted(self.data)}")


@dataclass
class ExperimentConfig:
    source: Optional[Path]
    grid_length: float
    grid_cells: int
    model_preset: str
    model_params: dict
    formulation_kind: str
    radius: Optional[float]
    epsilon: float
    quad_points: int
    alpha: float
    center: float
    v_const: float
    t_end: float
    rel_tol: float
    abs_tol: float
    max_step: float
    sample_times: tuple
    out_dir: str
    formats: tuple
    sweep_radii: Optional[tuple]
    compare_kinds: Optional[tuple]

    def resolved(self) -> dict:
        """Every value that affects the numerics, defaults materialized."""
        return {
            "grid": {"length": self.grid_length, "n_cells": self.grid_cells},
            "model": {"preset": self.model_preset, **self.model_params},
            "formulation": {
                "kind": self.formulation_kind,
                "radius": self.radius,
                "epsilon": self.epsilon,
                "quad_points": self.quad_points,
            },
            "initial": {"alpha": self.alpha, "center": self.center, "v_const": self.v_const},
            "time": {
                "t_end": self.t_end,
                "rel_tol": self.rel_tol,
                "abs_tol": self.abs_tol,
                "max_step": self.max_step,
                "sample_times": list(self.sample_times),
            },
            "output": {"directory": self.out_dir, "formats": list(self.formats)},
            "sweep": {"radii": list(self.sweep_radii)} if self.sweep_radii else None,
            "compare": (
                {"first": self.compare_kinds[0], "second": self.compare_kinds[1]}
                if self.compare_kinds
                else None
            ),
        }


def parse_config(doc: dict, source: Optional[Path] = None) -> ExperimentConfig:
    known = {"grid", "model", "formulation", "initial", "time", "output", "sweep", "compare"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")

    g = _Keys("grid", _section(doc, "grid"))
    grid_length = g.take("length", float)
    grid_cells = g.take("n_cells", int)
    g.finish()

    m = _Keys("model", _section(doc, "model"))
    preset = m.take("preset", str)
    if preset not in _MODEL_PARAMS:
        raise ConfigurationError(f"unknown model preset {preset!r}")
    params = {}
    for key in _MODEL_PARAMS[preset]:
        if key in m.data:
            if preset == "custom" and key not in ("d_v",):
                params[key] = m.take(key, str)
            else:
                params[key] = m.take(key, float)
    m.finish()

    f = _Keys("formulation", _section(doc, "formulation"))
    kind = f.take("kind", str)
    if kind not in FORMULATION_KINDS:
        raise ConfigurationError(f"unknown formulation kind {kind!r}")
    radius = f.take("radius", float, None if kind == LOCAL else ...)
    epsilon = f.take("epsilon", float, 0.0)
    quad_points = f.take("quad_points", int, 8)
    f.finish()

    i = _Keys("initial", _section(doc, "initial"))
    alpha = i.take("alpha", float)
    center = i.take("center", float)
    v_const = i.take("v_const", float, 1.0)
    i.finish()

    t = _Keys("time", _section(doc, "time"))
    t_end = t.take("t_end", float)
    rel_tol = t.take("rel_tol", float, 1e-6)
    abs_tol = t.take("abs_tol", float, 1e-6)
    max_step = t.take("max_step", float, 0.0)
    samples = t.take("sample_times", list, [t_end])
    t.finish()
    try:
        sample_times = tuple(float(x) for x in samples)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"[time].sample_times must be numbers: {exc}") from exc

    out = _section(doc, "output", required=False) or {}
    o = _Keys("output", out)
    out_dir = o.take("directory", str, "out")
    formats = tuple(o.take("formats", list, ["csv"]))
    o.finish()
    for fmt in formats:
        if fmt not in ("csv", "svg"):
            raise ConfigurationError(f"unknown output format {fmt!r}")

    sweep_radii = None
    sw = _section(doc, "sweep", required=False)
    if sw is not None:
        s = _Keys("sweep", sw)
        sweep_radii = tuple(float(x) for x in s.take("radii", list))
        s.finish()

    compare_kinds = None
    cp = _section(doc, "compare", required=False)
    if cp is not None:
        c = _Keys("compare", cp)
        first = c.take("first", str)
        second = c.take("second", str)
        c.finish()
        for k in (first, second):
            if k not in FORMULATION_KINDS:
                raise ConfigurationError(f"unknown compare formulation {k!r}")
        compare_kinds = (first, second)

    return ExperimentConfig(
        source=source,
        grid_length=grid_length,
        grid_cells=grid_cells,
        model_preset=preset,
        model_params=params,
        formulation_kind=kind,
        radius=radius,
        epsilon=epsilon,
        quad_points=quad_points,
        alpha=alpha,
        center=center,
        v_const=v_const,
        t_end=t_end,
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        max_step=max_step,
        sample_times=sample_times,
        out_dir=out_dir,
        formats=formats,
        sweep_radii=sweep_radii,
        compare_kinds=compare_kinds,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid TOML: {exc}") from exc
    return parse_config(doc, source=path)


def coefficient_set(cfg: ExperimentConfig) -> CoefficientSet:
    if cfg.model_preset == "custom":
        params = dict(cfg.model_params)
        kernel_name = params.pop("kernel", "constant")
        if kernel_name == "constant":
            kernel = constant_kernel()
        elif kernel_name == "exponential":
            kernel = exponential_kernel()
        else:
            raise ConfigurationError(f"unknown kernel {kernel_name!r}")
        missing = {"d_c", "chi", "g", "f_c", "f_v"} - set(params)
        if missing:
            raise ConfigurationError(f"custom model is missing {sorted(missing)}")
        return build_custom(kernel=kernel, d_v=float(params.pop("d_v", 0.0)), **params)
    return build_preset(cfg.model_preset, **cfg.model_params)


def formulation_of(cfg: ExperimentConfig, kind: Optional[str] = None, radius: Optional[float] = None) -> Formulation:
    kind = kind or cfg.formulation_kind
    if kind == LOCAL:
        return Formulation(LOCAL, epsilon=cfg.epsilon)
    r = radius if radius is not None else cfg.radius
    if r is None:
        raise ConfigurationError(f"formulation {kind!r} needs a radius")
    return Formulation(kind, radius=r, epsilon=cfg.epsilon, quad_points=cfg.quad_points)


def make_grid_of(cfg: ExperimentConfig) -> Grid1D:
    return make_grid(cfg.grid_length, cfg.grid_cells)


def solver_config(
    cfg: ExperimentConfig,
    kind: Optional[str] = None,
    radius: Optional[float] = None,
    coeffs: Optional[CoefficientSet] = None,
) -> SolverConfig:
    grid = make_grid_of(cfg)
    c0, v0 = initial_conditions(grid, cfg.alpha, cfg.center, cfg.v_const)
    return SolverConfig(
        grid=grid,
        coefficients=coeffs if coeffs is not None else coefficient_set(cfg),
        formulation=formulation_of(cfg, kind=kind, radius=radius),
        t_end=cfg.t_end,
        c0=c0,
        v0=v0,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=np.inf if cfg.max_step <= 0.0 else cfg.max_step,
        sample_times=cfg.sample_times,
    )


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(
    cfg: ExperimentConfig,
    status: str,
    stats: dict,
    outputs: list,
    wall_clock_s: float,
    diagnostics: Optional[dict] = None,
    extra: Optional[dict] = None,
) -> dict:
    manifest = {
        "version": __version__,
        "status": status,
        "resolved_config": cfg.resolved(),
        "integrator": stats,
        "outputs": [{"path": str(p.name), "sha256": file_sha256(p)} for p in outputs],
        "wall_clock_s": wall_clock_s,
        "diagnostics_summary": diagnostics or {},
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
