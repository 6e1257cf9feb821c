"""Command-line sweep harness.

``adiabus <experiment> --config cfg.json [--out dir] [--workers n] [--seed n]``
runs every grid point of a JSON experiment configuration, writes one CSV
(fixed per-experiment schema, 12 significant digits), a manifest JSON with
per-point statuses, and a gnuplot script for the matching figure type.
Points are independent tasks; any worker count produces byte-identical CSV
because results are assembled in grid order and each point is computed by
the same sequential deterministic code.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .anneal import SearchSettings, fidelity, find_anneal_time, transport_qubit
from .basis import SectorSpec, enumerate_sector
from .errors import AdiabusError, ParseError, SchemaMismatch, ValidationError
from .model import (
    BlochVector,
    Bond,
    ChainModel,
    ProtocolSpec,
    dynamic_j2_protocol,
    evaluate_protocol,
    ising_chain,
    j1j2_chain,
    join_protocol,
    protocol_from_dict,
    reverse_protocol,
    simultaneous_protocol,
    xxz_chain,
    xyz_chain,
    xyz_couplings,
)
from .solver import (
    PropagatorConfig,
    build_sector_operator,
    lowest_eigenpairs,
    sector_gap,
)

EXPERIMENTS = (
    "spectrum",
    "gap-scan",
    "fidelity-curve",
    "anneal-time",
    "transport",
    "degeneracy-check",
)
MODELS = ("j1j2", "xxz", "xyz", "ising", "custom")
PROTOCOLS = ("join", "unjoin", "dynamic-j2", "unjoin-dynamic", "simultaneous")
PARAM_KEY = {"j1j2": "J2", "ising": "J2", "custom": "J2", "xxz": "ratio", "xyz": "delta"}
SECTOR_NAMES = ("auto", "floor", "ceil", "full", "parity-even", "parity-odd")

HEADERS = {
    "anneal-time": ("N", "param", "tau_star", "fidelity", "status"),
    "gap-scan": ("s", "param", "gap"),
    "fidelity-curve": ("tau", "fidelity"),
    "transport": (
        "bx_in", "by_in", "bz_in", "tau", "bx_out", "by_out", "bz_out", "qubit_fidelity",
    ),
    "degeneracy-check": ("level", "energy", "pair_split"),
    "spectrum": ("N", "param", "level", "energy"),
}

_CARDINALS = (
    (0.0, 0.0, 1.0),
    (0.0, 0.0, -1.0),
    (1.0, 0.0, 0.0),
    (-1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, -1.0, 0.0),
)


@dataclass
class ExperimentConfig:
    experiment: str
    model: str = "j1j2"
    protocol: str | None = None
    protocol_spec: dict | None = None
    n_values: tuple[int, ...] = ()
    param_values: tuple[float, ...] = ()
    j1: float = 1.0
    xxz_j2: float = 0.0
    bonds: tuple[tuple[float, ...], ...] | None = None
    s: float = 1.0
    s_values: tuple[float, ...] = ()
    tau_values: tuple[float, ...] = ()
    target: float = 0.9
    search: SearchSettings = field(default_factory=SearchSettings)
    sector: str | int = "auto"
    levels: int = 6
    bloch: tuple[tuple[float, float, float], ...] = _CARDINALS
    two_sector: bool = False
    solver: PropagatorConfig = field(default_factory=PropagatorConfig)
    workers: int = 1
    out_prefix: str | None = None

    @property
    def param_key(self) -> str:
        return PARAM_KEY[self.model]

    def to_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "model": self.model,
            "N": list(self.n_values),
            self.param_key: list(self.param_values),
            "J1": self.j1,
            "s": self.s,
            "target": self.target,
            "tau0": self.search.tau0,
            "growth": self.search.growth,
            "tau_cap": self.search.tau_cap,
            "rel_width": self.search.rel_width,
            "sector": self.sector,
            "levels": self.levels,
            "workers": self.workers,
            "solver": {
                "step_count": self.solver.step_count,
                "dt": self.solver.dt,
                "krylov_dim": self.solver.krylov_dim,
                "step_tol": self.solver.step_tol,
                "refine_tol": self.solver.refine_tol,
                "max_doublings": self.solver.max_doublings,
            },
        }
        if self.protocol is not None:
            out["protocol"] = self.protocol
        if self.protocol_spec is not None:
            out["protocol_spec"] = self.protocol_spec
        if self.xxz_j2:
            out["xxz_j2"] = self.xxz_j2
        if self.bonds is not None:
            out["bonds"] = [list(b) for b in self.bonds]
        if self.s_values:
            out["s_grid"] = list(self.s_values)
        if self.tau_values:
            out["tau"] = list(self.tau_values)
        out["bloch"] = [list(b) for b in self.bloch]
        if self.two_sector:
            out["two_sector"] = True
        if self.out_prefix is not None:
            out["out_prefix"] = self.out_prefix
        return out


def _as_float_tuple(value, name: str) -> tuple[float, ...]:
    if value is None:
        return ()
    if np.isscalar(value):
        value = [value]
    try:
        vals = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ValidationError(name, f"{name} must be numeric") from None
    return vals


def parse_config(text: str, default_experiment: str | None = None) -> ExperimentConfig:
    """JSON text -> validated ExperimentConfig with defaults filled in."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError("configuration must be a JSON object")
    if default_experiment is not None:
        raw.setdefault("experiment", default_experiment)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ValidationError("experiment", f"unknown experiment {experiment!r}")
    model = raw.get("model", "j1j2")
    if model not in MODELS:
        raise ValidationError("model", f"unknown model {model!r}")
    protocol = raw.get("protocol")
    protocol_spec = raw.get("protocol_spec")
    needs_protocol = experiment in ("anneal-time", "fidelity-curve", "transport", "gap-scan")
    if protocol is not None and protocol not in PROTOCOLS:
        raise ValidationError("protocol", f"unknown protocol {protocol!r}")
    if needs_protocol and protocol is None and protocol_spec is None:
        raise ValidationError("protocol", f"{experiment} needs a protocol")
    if protocol in ("dynamic-j2", "unjoin-dynamic") and model != "j1j2":
        raise ValidationError("protocol", "dynamic J2 schedules are defined for the j1j2 model")
    if model == "custom" and protocol is not None and protocol_spec is None:
        raise ValidationError("protocol", "custom models need an explicit protocol_spec")
    if protocol_spec is not None:
        try:
            protocol_from_dict(protocol_spec)
        except Exception as e:
            raise ValidationError("protocol_spec", str(e)) from None

    n_raw = raw.get("N", [])
    if isinstance(n_raw, (int, float)):
        n_raw = [n_raw]
    n_values = tuple(int(n) for n in n_raw)
    if protocol_spec is None and model != "custom":
        if not n_values:
            raise ValidationError("N", "N grid must be nonempty")
        min_n = 2 if protocol is None else (4 if protocol == "simultaneous" else 3)
        if any(n < min_n for n in n_values):
            raise ValidationError("N", f"N values must be >= {min_n}")

    param_key = PARAM_KEY[model]
    param_values = _as_float_tuple(raw.get(param_key), param_key)
    if not param_values:
        if model == "custom" or protocol_spec is not None:
            param_values = (0.0,)
        else:
            raise ValidationError(param_key, f"{param_key} grid must be nonempty")

    if experiment in ("gap-scan", "fidelity-curve", "transport", "degeneracy-check"):
        if protocol_spec is None and model != "custom" and len(n_values) != 1:
            raise ValidationError("N", f"{experiment} sweeps a single N")
    if experiment in ("fidelity-curve", "transport") and len(param_values) != 1:
        raise ValidationError(param_key, f"{experiment} uses a single {param_key}")

    s_values = _as_float_tuple(raw.get("s_grid"), "s_grid")
    if experiment == "gap-scan" and not s_values:
        s_values = tuple(np.round(np.linspace(0.0, 1.0, 51), 10))
    tau_values = _as_float_tuple(raw.get("tau"), "tau")
    if experiment in ("fidelity-curve", "transport") and not tau_values:
        raise ValidationError("tau", f"{experiment} needs a tau grid")

    target = float(raw.get("target", 0.9))
    if not 0.0 < target < 1.0:
        raise ValidationError("target", "target fidelity must lie in (0, 1)")
    try:
        search = SearchSettings(
            tau0=float(raw.get("tau0", 1.0)),
            growth=float(raw.get("growth", math.sqrt(2.0))),
            tau_cap=float(raw.get("tau_cap", 1e5)),
            rel_width=float(raw.get("rel_width", 0.05)),
        )
    except ValueError as e:
        raise ValidationError("search", str(e)) from None

    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ValidationError("solver", "solver settings must be an object")
    try:
        solver = PropagatorConfig(
            step_count=solver_raw.get("step_count"),
            dt=solver_raw.get("dt"),
            krylov_dim=int(solver_raw.get("krylov_dim", 30)),
            step_tol=float(solver_raw.get("step_tol", 1e-10)),
            refine_tol=float(solver_raw.get("refine_tol", 1e-8)),
            max_doublings=int(solver_raw.get("max_doublings", 10)),
        )
    except ValueError as e:
        raise ValidationError("solver", str(e)) from None

    sector = raw.get("sector", "auto")
    if not (isinstance(sector, int) or sector in SECTOR_NAMES):
        raise ValidationError("sector", f"unknown sector {sector!r}")
    if model == "xyz" and sector in ("floor", "ceil") or (
        model == "xyz" and isinstance(sector, int)
    ):
        raise ValidationError("sector", "xyz couplings do not conserve magnetization")

    bloch_raw = raw.get("bloch")
    if bloch_raw is None:
        bloch = _CARDINALS
    else:
        try:
            bloch = tuple(tuple(float(x) for x in b) for b in bloch_raw)
            for b in bloch:
                BlochVector(*b)
        except (TypeError, ValueError) as e:
            raise ValidationError("bloch", str(e)) from None
        if not bloch:
            raise ValidationError("bloch", "bloch grid must be nonempty")

    bonds = None
    if model == "custom":
        bonds_raw = raw.get("bonds")
        if protocol_spec is None:
            if not bonds_raw:
                raise ValidationError("bonds", "custom models need a bond list")
            try:
                bonds = tuple(tuple(float(x) for x in row) for row in bonds_raw)
                n_from_bonds = int(max(max(r[0], r[1]) for r in bonds))
                if not n_values:
                    n_values = (n_from_bonds,)
                _custom_model(bonds, n_values[0])
            except ValidationError:
                raise
            except Exception as e:
                raise ValidationError("bonds", str(e)) from None
        elif bonds_raw is not None:
            bonds = tuple(tuple(float(x) for x in row) for row in bonds_raw)
    if protocol_spec is not None and not n_values:
        n_values = (int(protocol_spec["n_spins"]),)

    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ValidationError("workers", "workers must be >= 1")
    levels = int(raw.get("levels", 6))
    if levels < 1:
        raise ValidationError("levels", "levels must be >= 1")

    return ExperimentConfig(
        experiment=experiment,
        model=model,
        protocol=protocol,
        protocol_spec=protocol_spec,
        n_values=n_values,
        param_values=param_values,
        j1=float(raw.get("J1", 1.0)),
        xxz_j2=float(raw.get("xxz_j2", 0.0)),
        bonds=bonds,
        s=float(raw.get("s", 1.0)),
        s_values=s_values,
        tau_values=tau_values,
        target=target,
        search=search,
        sector=sector,
        levels=levels,
        bloch=bloch,
        two_sector=bool(raw.get("two_sector", False)),
        solver=solver,
        workers=workers,
        out_prefix=raw.get("out_prefix"),
    )


def _custom_model(bonds, n_spins: int) -> ChainModel:
    rows = tuple(Bond(int(r[0]), int(r[1]), r[2], r[3], r[4]) for r in bonds)
    return ChainModel(n_spins, rows)


def _family_couplings(cfg: ExperimentConfig, param: float):
    if cfg.model == "xxz":
        nn = (1.0, 1.0, param)
        nnn = (cfg.xxz_j2, cfg.xxz_j2, cfg.xxz_j2 * param) if cfg.xxz_j2 else 0.0
    elif cfg.model == "xyz":
        nn, nnn = xyz_couplings(param), 0.0
    elif cfg.model == "ising":
        nn, nnn = (0.0, 0.0, cfg.j1), (0.0, 0.0, param)
    else:
        nn, nnn = cfg.j1, param
    return nn, nnn


def build_protocol(cfg: ExperimentConfig, n: int, param: float) -> ProtocolSpec:
    if cfg.protocol_spec is not None:
        return protocol_from_dict(cfg.protocol_spec)
    nn, nnn = _family_couplings(cfg, param)
    kind = cfg.protocol
    if kind == "join":
        return join_protocol(n, nn, nnn)
    if kind == "unjoin":
        return reverse_protocol(join_protocol(n, nn, nnn))
    if kind == "dynamic-j2":
        return dynamic_j2_protocol(n, cfg.j1, param)
    if kind == "unjoin-dynamic":
        return reverse_protocol(dynamic_j2_protocol(n, cfg.j1, param))
    if kind == "simultaneous":
        return simultaneous_protocol(n, nn, nnn)
    raise ValidationError("protocol", f"unknown protocol {kind!r}")


def build_static_model(cfg: ExperimentConfig, n: int, param: float) -> ChainModel:
    if cfg.model == "custom":
        return _custom_model(cfg.bonds, n)
    if cfg.protocol is not None or cfg.protocol_spec is not None:
        return evaluate_protocol(build_protocol(cfg, n, param), cfg.s)
    if cfg.model == "xxz":
        return xxz_chain(n, param)
    if cfg.model == "xyz":
        return xyz_chain(n, param)
    if cfg.model == "ising":
        return ising_chain(n, cfg.j1, param)
    return j1j2_chain(n, cfg.j1, param)


def resolve_sector(cfg: ExperimentConfig, n: int, conserving: bool) -> SectorSpec:
    sec = cfg.sector
    if isinstance(sec, int):
        return SectorSpec.magnetization(n, sec)
    if sec == "auto":
        return SectorSpec.magnetization(n, n // 2) if conserving else SectorSpec.parity(n, "even")
    if sec == "floor":
        return SectorSpec.magnetization(n, n // 2)
    if sec == "ceil":
        return SectorSpec.magnetization(n, (n + 1) // 2)
    if sec == "full":
        return SectorSpec.full(n)
    return SectorSpec.parity(n, sec.split("-", 1)[1])


def _sector_pair(cfg: ExperimentConfig, n: int, conserving: bool):
    spec = resolve_sector(cfg, n, conserving)
    if spec.kind == "magnetization" and spec.k != n - spec.k:
        return spec, SectorSpec.magnetization(n, n - spec.k)
    if spec.kind == "parity":
        other = "odd" if spec.parity == "even" else "even"
        return spec, SectorSpec.parity(n, other)
    return (spec,)


# ----------------------------------------------------------------- points

def _point_anneal_time(cfg, n, param):
    p = build_protocol(cfg, n, param)
    sec = resolve_sector(cfg, p.n_spins, p.conserves_magnetization())
    r = find_anneal_time(p, sec, cfg.target, cfg.search, cfg.solver)
    row = {
        "N": p.n_spins,
        "param": param,
        "tau_star": r.tau_star,
        "fidelity": r.fidelity_at_tau_star,
        "status": r.status,
    }
    return [row], r.status


def _point_gap_column(cfg, n, param):
    p = build_protocol(cfg, n, param)
    sec = resolve_sector(cfg, p.n_spins, p.conserves_magnetization())
    rows = []
    for s in cfg.s_values:
        model = evaluate_protocol(p, float(s))
        try:
            gap = sector_gap(model, sec)
        except AdiabusError:
            gap = math.nan
        rows.append({"s": s, "param": param, "gap": gap})
    return rows, "ok"


def _point_fidelity(cfg, n, param, tau):
    p = build_protocol(cfg, n, param)
    sec = resolve_sector(cfg, p.n_spins, p.conserves_magnetization())
    f = fidelity(p, tau, sec, cfg.solver)
    return [{"tau": tau, "fidelity": f}], "ok"


def _point_transport(cfg, n, param, bloch, tau):
    p = build_protocol(cfg, n, param)
    r = transport_qubit(p, BlochVector(*bloch), tau, cfg.solver, two_sector=cfg.two_sector)
    row = {
        "bx_in": bloch[0],
        "by_in": bloch[1],
        "bz_in": bloch[2],
        "tau": tau,
        "bx_out": r.bloch_out.x,
        "by_out": r.bloch_out.y,
        "bz_out": r.bloch_out.z,
        "qubit_fidelity": r.qubit_fidelity,
    }
    return [row], "ok"


def _union_levels(cfg, model, n, conserving):
    energies = []
    for spec in _sector_pair(cfg, n, conserving):
        basis = enumerate_sector(spec)
        m = min(cfg.levels, basis.dimension)
        res = lowest_eigenpairs(build_sector_operator(model, basis), m)
        energies.extend(float(e) for e in res.eigenvalues)
    energies.sort()
    return energies[: cfg.levels]


def _point_spectrum(cfg, n, param):
    model = build_static_model(cfg, n, param)
    energies = _union_levels(cfg, model, model.n_spins, model.conserves_magnetization())
    rows = [
        {"N": model.n_spins, "param": param, "level": k, "energy": e}
        for k, e in enumerate(energies)
    ]
    return rows, "ok"


def _point_degeneracy(cfg, n, param):
    model = build_static_model(cfg, n, param)
    energies = _union_levels(cfg, model, model.n_spins, model.conserves_magnetization())
    rows = []
    for k, e in enumerate(energies):
        partner = k ^ 1
        split = abs(energies[partner] - e) if partner < len(energies) else math.nan
        rows.append({"level": k, "energy": e, "pair_split": split})
    return rows, "ok"


_POINT_FUNCS = {
    "anneal-time": _point_anneal_time,
    "gap-scan": _point_gap_column,
    "fidelity-curve": _point_fidelity,
    "transport": _point_transport,
    "spectrum": _point_spectrum,
    "degeneracy-check": _point_degeneracy,
}


def _grid_points(cfg: ExperimentConfig) -> list[dict]:
    n0 = cfg.n_values[0] if cfg.n_values else 0
    p0 = cfg.param_values[0]
    if cfg.experiment in ("anneal-time", "spectrum"):
        return [
            {"n": n, "param": p} for n in cfg.n_values for p in cfg.param_values
        ]
    if cfg.experiment == "gap-scan":
        return [{"n": n0, "param": p} for p in cfg.param_values]
    if cfg.experiment == "fidelity-curve":
        return [{"n": n0, "param": p0, "tau": t} for t in cfg.tau_values]
    if cfg.experiment == "transport":
        return [
            {"n": n0, "param": p0, "bloch": b, "tau": t}
            for b in cfg.bloch
            for t in cfg.tau_values
        ]
    return [{"n": n0, "param": p0}]  # degeneracy-check


def _run_point(payload):
    cfg, index, params = payload
    t0 = time.perf_counter()
    try:
        rows, status = _POINT_FUNCS[cfg.experiment](cfg, **params)
    except AdiabusError as e:
        rows, status = [], f"failed:{type(e).__name__}"
    return index, rows, status, time.perf_counter() - t0


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return format(v, ".12g")


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path = ".",
    workers: int | None = None,
    seed: int | None = None,
) -> dict:
    """Execute all grid points and write CSV + manifest + plot script.

    Per-point failures are recorded in the manifest and leave blank cells;
    they never abort sibling points.  Returns the manifest dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = int(os.environ.get("ADIABUS_WORKERS", cfg.workers))
    points = _grid_points(cfg)
    payloads = [(cfg, i, p) for i, p in enumerate(points)]
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, payloads))
    else:
        results = [_run_point(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    header = HEADERS[cfg.experiment]
    all_rows: list[dict] = []
    if cfg.experiment == "gap-scan":
        # tasks are parameter columns; emit rows s-major to mirror the grid
        by_param = [rows for _, rows, _, _ in results]
        for js in range(len(cfg.s_values)):
            for col in by_param:
                if js < len(col):
                    all_rows.append(col[js])
    else:
        for _, rows, _, _ in results:
            all_rows.extend(rows)

    prefix = cfg.out_prefix or cfg.experiment
    csv_path = out / f"{prefix}.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in all_rows:
            fh.write(",".join(_fmt(row.get(col)) for col in header) + "\n")

    manifest = {
        "tool": "adiabus",
        "version": __version__,
        "seed": seed,
        "workers": workers,
        "config": cfg.to_dict(),
        "points": [
            {
                "index": i,
                "params": _jsonable(points[i]),
                "status": status,
                "seconds": seconds,
            }
            for i, _, status, seconds in results
        ],
    }
    with open(out / f"{prefix}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)

    template = cfg.experiment if cfg.experiment in PLOT_TEMPLATES else None
    if template:
        script = emit_plot_script(csv_path, template)
        (out / f"{prefix}.gp").write_text(script)
    return manifest


def _jsonable(params: dict) -> dict:
    return {
        k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()
    }


# ------------------------------------------------------------------ plots

def _read_header(csv_path) -> tuple[list[str], list[list[str]]]:
    lines = Path(csv_path).read_text().strip().splitlines()
    if not lines:
        raise SchemaMismatch(f"{csv_path} is empty")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


def _series_values(rows, col):
    seen = []
    for r in rows:
        if r[col] and r[col] not in seen:
            seen.append(r[col])
    return seen


def emit_plot_script(csv_path, template: str) -> str:
    """Gnuplot script text reproducing the named figure type from a CSV."""
    if template not in PLOT_TEMPLATES:
        raise SchemaMismatch(f"unknown plot template {template!r}")
    expected = PLOT_TEMPLATES[template]
    header, rows = _read_header(csv_path)
    if tuple(header) != expected:
        raise SchemaMismatch(
            f"{csv_path} header {header} does not match template {template!r}"
        )
    name = Path(csv_path).name
    lines = [
        "set datafile separator ','",
        f"set output '{Path(csv_path).stem}.png'",
        "set terminal pngcairo size 900,600",
    ]
    if template == "anneal-time":
        lines += [
            "set xlabel 'coupling parameter'",
            "set ylabel 'annealing time to target fidelity'",
            "set logscale y",
            "set key top left",
        ]
        series = _series_values(rows, 0)
        plots = [
            f"'{name}' using (column(1)=={n} ? $2 : 1/0):3 "
            f"with linespoints title 'N={n}'"
            for n in series
        ]
        lines.append("plot \\\n  " + ", \\\n  ".join(plots))
    elif template == "time-scaling":
        lines += [
            "set xlabel 'chain length N'",
            "set ylabel 'annealing time to target fidelity'",
            "set logscale xy",
            "set key top left",
        ]
        series = _series_values(rows, 1)
        plots = [
            f"'{name}' using (column(2)=={p} ? $1 : 1/0):3 "
            f"with linespoints title 'param={p}'"
            for p in series
        ]
        lines.append("plot \\\n  " + ", \\\n  ".join(plots))
    elif template == "gap-scan":
        lines += [
            "set xlabel 'coupling parameter'",
            "set ylabel 'schedule point s'",
            "set cblabel 'sector gap'",
            "set logscale cb",  # gaps span decades near crossings
            "set view map",
            f"splot '{name}' using 2:1:3 with image notitle",
        ]
    elif template == "fidelity-curve":
        lines += [
            "set xlabel 'annealing time'",
            "set ylabel 'final ground-space fidelity'",
            f"plot '{name}' using 1:2 with linespoints notitle",
        ]
    else:  # transport
        lines += [
            "set xlabel 'annealing time'",
            "set ylabel 'qubit fidelity'",
            "set key bottom right",
        ]
        dirs = []
        for r in rows:
            key = (r[0], r[1], r[2])
            if key not in dirs:
                dirs.append(key)
        plots = [
            f"'{name}' using "
            f"(column(1)=={bx} && column(2)=={by} && column(3)=={bz} ? $4 : 1/0):8 "
            f"with linespoints title '({bx},{by},{bz})'"
            for bx, by, bz in dirs
        ]
        lines.append("plot \\\n  " + ", \\\n  ".join(plots))
    return "\n".join(lines) + "\n"


PLOT_TEMPLATES = {
    "anneal-time": HEADERS["anneal-time"],
    "time-scaling": HEADERS["anneal-time"],
    "gap-scan": HEADERS["gap-scan"],
    "fidelity-curve": HEADERS["fidelity-curve"],
    "transport": HEADERS["transport"],
}


# ------------------------------------------------------------------- main

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adiabus",
        description="Adiabatic spin-chain data-bus experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS:
        p = sub.add_parser(kind, help=f"run a {kind} sweep")
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
    pp = sub.add_parser("plot", help="emit a gnuplot script for an existing CSV")
    pp.add_argument("--csv", required=True)
    pp.add_argument("--template", required=True, choices=sorted(PLOT_TEMPLATES))
    pp.add_argument("--out", default=None, help="script path (default: beside the CSV)")

    args = parser.parse_args(argv)
    try:
        if args.command == "plot":
            script = emit_plot_script(args.csv, args.template)
            target = Path(args.out) if args.out else Path(args.csv).with_suffix(".gp")
            target.write_text(script)
            print(f"wrote {target}")
            return 0
        text = Path(args.config).read_text()
        cfg = parse_config(text, default_experiment=args.command)
        if cfg.experiment != args.command:
            raise ValidationError(
                "experiment",
                f"config experiment {cfg.experiment!r} does not match "
                f"subcommand {args.command!r}",
            )
        manifest = run_experiment(cfg, args.out, args.workers, args.seed)
        failed = [p for p in manifest["points"] if p["status"].startswith("failed")]
        print(
            f"{len(manifest['points'])} points done, {len(failed)} failed; "
            f"outputs under {args.out}"
        )
        return 0
    except (ParseError, ValidationError, SchemaMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
