"""Experiment configuration files.

Configs are TOML documents.  Every table and key is listed in ``SCHEMA``; an
unknown key, a missing required key or a value out of range raises
:class:`ConfigError` naming the offending key path.  A fully annotated example
lives in ``configs/moving_interface.toml``.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .coefficients import (
    CoefficientField,
    InterfaceSpec,
    constant_field,
    moving_interface_field,
    piecewise_constant_in_time,
)
from .fem import BoundaryPartition, Mesh, build_interval_mesh, build_rect_mesh, mark_dirichlet
from .parabolic import TimeGrid, nodal_forcing
from .quasilinear import FixedPointConfig, SigmaFunction

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


# table -> {key: default}; REQUIRED marks keys without a default
REQUIRED = object()
SCHEMA = {
    "mesh": {"kind": REQUIRED, "cells": REQUIRED, "length": None},
    "boundary": {"dirichlet": "all"},
    "coefficient": {
        "kind": "constant", "matrix": 1.0, "matrices": None, "breakpoints": [],
        "shape": "interval", "size": 0.1, "center": None, "velocity": None,
        "inside": 1.0, "outside": 2.0,
    },
    "time": {"T": REQUIRED, "steps": REQUIRED, "extra_nodes": []},
    "forcing": {"profile": "smooth", "amplitude": 1.0, "exponent": -0.2, "seed": 0},
    "exponents": {"r": 2.0, "q": 2.0},
    "solver": {"shift": 1.0},
    "estimate": {"operator": "reference", "probes": 16, "seed": 0, "s": 4.0},
    "fixed_point": {
        "sigma_center": 1.5, "sigma_amplitude": 0.5, "tolerance": 1e-10,
        "max_iterations": 50, "damping": 1.0,
    },
    "output": {"dir": "out"},
}
OPTIONAL_TABLES = {"fixed_point", "estimate", "output", "exponents", "solver", "forcing", "boundary", "coefficient"}

_SIDES = {
    "left": lambda x, lo, hi: x[0] <= lo[0],
    "right": lambda x, lo, hi: x[0] >= hi[0],
    "bottom": lambda x, lo, hi: len(x) > 1 and x[1] <= lo[1],
    "top": lambda x, lo, hi: len(x) > 1 and x[1] >= hi[1],
}


@dataclass
class RunConfig:
    raw: dict
    mesh: Mesh
    partition: BoundaryPartition
    field: CoefficientField
    grid: TimeGrid
    forcing: np.ndarray
    r: float
    q: float
    shift: float
    probes: int
    seed: int
    estimate_operator: str
    s: float
    fixed_point: Optional[FixedPointConfig]
    sigma: Optional[SigmaFunction]
    out_dir: Path


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw)


def _fill(raw: dict) -> dict:
    unknown = set(raw) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown table [{sorted(unknown)[0]}]")
    out = {}
    for table, keys in SCHEMA.items():
        given = raw.get(table)
        if given is None:
            if table not in OPTIONAL_TABLES:
                raise ConfigError(f"missing table [{table}]")
            given = {}
        if not isinstance(given, dict):
            raise ConfigError(f"[{table}] must be a table")
        extra = set(given) - set(keys)
        if extra:
            raise ConfigError(f"unknown key {table}.{sorted(extra)[0]}")
        filled = {}
        for key, default in keys.items():
            if key in given:
                filled[key] = given[key]
            elif default is REQUIRED:
                raise ConfigError(f"missing key {table}.{key}")
            else:
                filled[key] = default
        out[table] = filled
    out["_has_fixed_point"] = "fixed_point" in raw
    return out


def _positive(value, key, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0
    if integer:
        ok = ok and int(value) == value
    if not ok:
        kind = "positive integer" if integer else "positive number"
        raise ConfigError(f"{key} must be a {kind}, got {value!r}")
    return int(value) if integer else float(value)


def _build_mesh(c):
    kind = c["kind"]
    cells = c["cells"]
    if kind == "interval":
        n = _positive(cells[0] if isinstance(cells, list) else cells, "mesh.cells", integer=True)
        length = c["length"] if c["length"] is not None else 1.0
        length = _positive(length[0] if isinstance(length, list) else length, "mesh.length")
        return build_interval_mesh(n, length)
    if kind == "rect":
        if not (isinstance(cells, list) and len(cells) == 2):
            raise ConfigError("mesh.cells must be [nx, ny] for a rect mesh")
        nx, ny = (_positive(v, "mesh.cells", integer=True) for v in cells)
        length = c["length"] if c["length"] is not None else [1.0, 1.0]
        if not (isinstance(length, list) and len(length) == 2):
            raise ConfigError("mesh.length must be [lx, ly] for a rect mesh")
        lx, ly = (_positive(v, "mesh.length") for v in length)
        return build_rect_mesh(nx, ny, lx, ly)
    raise ConfigError(f"mesh.kind must be 'interval' or 'rect', got {kind!r}")


def _build_partition(mesh, spec):
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    names = [spec] if isinstance(spec, str) else list(spec)
    if names == ["all"]:
        return mark_dirichlet(mesh, lambda x: True)
    if names == ["none"]:
        return mark_dirichlet(mesh, lambda x: False)
    for n in names:
        if n not in _SIDES:
            raise ConfigError(f"boundary.dirichlet: unknown side {n!r}")
    tests = [_SIDES[n] for n in names]
    return mark_dirichlet(mesh, lambda x: any(t(x, lo, hi) for t in tests))


def _matrix(value, d, key):
    A = np.asarray(value, dtype=float)
    if A.ndim == 0:
        A = float(A) * np.eye(d)
    if A.shape != (d, d):
        raise ConfigError(f"{key} must be a scalar or a {d}x{d} matrix")
    return A


def _build_field(mesh, c, T):
    d = mesh.dim
    try:
        if c["kind"] == "constant":
            return constant_field(_matrix(c["matrix"], d, "coefficient.matrix"))
        if c["kind"] == "piecewise":
            mats = c["matrices"]
            if not isinstance(mats, list) or not mats:
                raise ConfigError("coefficient.matrices must be a non-empty list")
            pieces = [constant_field(_matrix(m, d, "coefficient.matrices")) for m in mats]
            for b in c["breakpoints"]:
                if not 0 < b < T:
                    raise ConfigError(f"coefficient.breakpoints: {b} outside (0, T)")
            return piecewise_constant_in_time(pieces, c["breakpoints"], horizon=T)
        if c["kind"] == "moving_interface":
            lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
            center = c["center"] if c["center"] is not None else list(0.5 * (lo + hi))
            spec = InterfaceSpec(
                shape=c["shape"], size=c["size"], center=tuple(np.atleast_1d(center)),
                velocity=None if c["velocity"] is None else tuple(np.atleast_1d(c["velocity"])),
                inside=float(c["inside"]), outside=float(c["outside"]),
                domain=(tuple(lo), tuple(hi)),
            )
            return moving_interface_field(spec, T)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"coefficient: {exc}") from exc
    raise ConfigError(f"coefficient.kind must be constant, piecewise or moving_interface, got {c['kind']!r}")


def _spatial_profile(mesh):
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)

    def phi(x):
        return np.prod(np.sin(np.pi * (x - lo) / (hi - lo)), axis=1)

    return phi


def _build_forcing(c, grid, mesh, partition):
    amp = float(c["amplitude"])
    phi = _spatial_profile(mesh)
    T = grid.horizon
    profile = c["profile"]
    if profile == "zero":
        return np.zeros((len(grid), partition.n_free))
    if profile == "random":
        rng = np.random.default_rng(int(c["seed"]))
        from .fem import p1_space

        F = np.zeros((len(grid), partition.n_free))
        F[1:] = amp * (p1_space(mesh, partition).mass @ rng.standard_normal(partition.n_free))
        return F
    if profile == "power" and not c["exponent"] > -1:
        raise ConfigError("forcing.exponent must be > -1")
    time_profiles = {
        "constant": lambda t: 1.0,
        "smooth": lambda t: np.sin(np.pi * t / T),
        "step": lambda t: float(t <= 0.5 * T),
        "power": lambda t: t ** float(c["exponent"]),
    }
    if profile not in time_profiles:
        raise ConfigError(f"forcing.profile: unknown profile {profile!r}")
    g = time_profiles[profile]
    return nodal_forcing(lambda t, x: amp * g(t) * phi(x), grid, mesh, partition)


def parse_config(raw: dict) -> RunConfig:
    c = _fill(raw)
    mesh = _build_mesh(c["mesh"])
    partition = _build_partition(mesh, c["boundary"]["dirichlet"])
    T = _positive(c["time"]["T"], "time.T")
    steps = _positive(c["time"]["steps"], "time.steps", integer=True)
    field = _build_field(mesh, c["coefficient"], T)
    try:
        grid = TimeGrid.uniform(T, steps, list(c["time"]["extra_nodes"]) + list(field.jump_times))
    except ValueError as exc:
        raise ConfigError(f"time.extra_nodes: {exc}") from exc
    forcing = _build_forcing(c["forcing"], grid, mesh, partition)
    r = float(c["exponents"]["r"])
    q = float(c["exponents"]["q"])
    for key, v in (("exponents.r", r), ("exponents.q", q)):
        if not 1 < v < np.inf:
            raise ConfigError(f"{key} must lie in (1, inf), got {v}")
    shift = float(c["solver"]["shift"])
    if not shift > 0:
        raise ConfigError(f"solver.shift must be positive, got {shift}")
    est = c["estimate"]
    if est["operator"] not in ("reference", "field"):
        raise ConfigError("estimate.operator must be 'reference' or 'field'")
    s = float(est["s"])
    if not s > 2:
        raise ConfigError("estimate.s must be > 2")
    fp = sigma = None
    if c["_has_fixed_point"]:
        f = c["fixed_point"]
        amp = float(f["sigma_amplitude"])
        center = float(f["sigma_center"])
        if not center - abs(amp) > 0:
            raise ConfigError("fixed_point: sigma_center - |sigma_amplitude| must be positive")
        sigma = SigmaFunction(lambda x: center + amp * np.tanh(x), center - abs(amp), center + abs(amp))
        try:
            fp = FixedPointConfig(float(f["tolerance"]), int(f["max_iterations"]), float(f["damping"]))
        except ValueError as exc:
            raise ConfigError(f"fixed_point: {exc}") from exc
    return RunConfig(
        raw=raw, mesh=mesh, partition=partition, field=field, grid=grid, forcing=forcing,
        r=r, q=q, shift=shift, probes=_positive(est["probes"], "estimate.probes", integer=True),
        seed=int(est["seed"]), estimate_operator=est["operator"], s=s,
        fixed_point=fp, sigma=sigma, out_dir=Path(c["output"]["dir"]),
    )

