"""Configuration parsing, experiment orchestration and CSV output.

Usage::

    piezobeam simulate --config run.yaml --out results/
    piezobeam spectrum --mode constraint --law off --n 60

The output directory is taken from ``--out``, then the ``PIEZOBEAM_OUT``
environment variable, then the ``out`` field of the config, then ``out``.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import controller as ctl
from .config import DEFAULT_COMPOSITE, RawMaterialConstants, derive_coefficients
from .errors import ParseError, PiezoBeamError, ResolutionTooSmall, ValidationError
from .grid import MIN_RESOLUTION, build_grid
from .model import SchemeOptions, assemble, normalize_mode, bump_initial_state
from .sigma import SigmaOperators
from .spectral import assemble_generator, spectral_abscissa, spectrum
from .time_march import IntegratorConfig, fit_decay_rate, run

OUT_ENV = "PIEZOBEAM_OUT"
KINDS = ("simulate", "spectrum", "convergence", "oracle_suite", "sweep")
LAW_ALIASES = {"analytic": "analytic_feed", "sec4": "discrete_sec4", "off": "off"}
FMT = "%.17g"

DEFAULTS: Dict[str, Any] = {
    "kind": "simulate",
    "beam": {},
    "coefficients": {},
    "grid": {"N": 60},
    "mode": "constraint",
    "kappa": None,
    "controller": {
        "law": "analytic_feed",
        "k1": 1.0e8,
        "trace_method": "p_sigma_direct",
        "feedback_sign": -1.0,
    },
    "integrator": {"scheme": "implicit_midpoint", "dt": 1.0e-3, "t_end": None, "snapshot_stride": 0},
    "initial": {"amplitude": 1.0e-4, "exponent_sign": -1.0},
    "scheme": {"coupling_sign": 1.0, "tip_stencil": "consistent", "viscosity_denominator": 2.0},
    "spectrum": {"closed_loop": True},
    # ςC̃ for the operator checks; null means the beam's own value
    "convergence": {"N": [50, 100, 200], "sigma_C": 4.0},
    "oracle": {"sigma_C": 4.0},
    "sweep": {"gains": [1.0e7, 1.0e8, 1.0e9], "N": [30, 60]},
    "seed": 0,
    "out": None,
}


@dataclass
class ExperimentSpec:
    kind: str
    raw: RawMaterialConstants
    coefficient_overrides: Dict[str, float]
    N: int
    mode: str
    kappa: Optional[float]
    controller: ctl.ControllerConfig
    integrator: IntegratorConfig
    initial: Dict[str, float]
    scheme: SchemeOptions
    closed_loop_spectrum: bool
    convergence_N: List[int]
    convergence_sigma_C: Optional[float]
    oracle_sigma_C: Optional[float]
    sweep_gains: List[float]
    sweep_N: List[int]
    seed: int
    out_dir: Path
    resolved: Dict[str, Any] = field(repr=False, default_factory=dict)

    def coefficients(self):
        return derive_coefficients(self.raw, self.coefficient_overrides)

    def system(self, N: Optional[int] = None, controller: Optional[ctl.ControllerConfig] = None):
        return assemble(
            build_grid(N or self.N, self.raw.L),
            self.coefficients(),
            self.mode,
            controller or self.controller,
            self.kappa,
            self.scheme,
        )


def _merge(base: dict, upd: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in upd.items():
        path = f"{where}{key}"
        if key not in base:
            raise ValidationError(f"unknown field '{path}'")
        if isinstance(base[key], dict) and key not in ("beam", "coefficients"):
            if not isinstance(value, dict):
                raise ValidationError(f"field '{path}' must be a mapping")
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def load_config_text(text: str, source: str = "<string>") -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "unknown line"
        problem = getattr(exc, "problem", None) or str(exc).splitlines()[0]
        raise ParseError(f"{source}: {where}: {problem}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be a mapping")
    return data


def resolve(data: dict, overrides: Optional[dict] = None) -> dict:
    """Merge user data and CLI overrides onto the defaults."""
    merged = _merge(DEFAULTS, data)
    return _merge(merged, overrides or {})


def _number(value, name, kind=float):
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"field '{name}' must be a {kind.__name__}, got {value!r}") from None


def build_spec(cfg: dict) -> ExperimentSpec:
    """Validate a resolved config mapping and build the spec."""
    kind = str(cfg["kind"]).replace("-", "_")
    if kind not in KINDS:
        raise ValidationError(f"unknown experiment kind {cfg['kind']!r}")
    raw_fields = {f.name for f in fields(RawMaterialConstants)}
    for key in cfg["beam"]:
        if key not in raw_fields:
            raise ValidationError(f"unknown field 'beam.{key}'")
    raw = RawMaterialConstants(**{k: _number(v, f"beam.{k}") for k, v in cfg["beam"].items()})
    known = set(DEFAULT_COMPOSITE) | {"m", "A", "sigma", "A_tilde", "B_tilde", "C_tilde", "kappa"} | raw_fields
    for key in cfg["coefficients"]:
        if key not in known:
            raise ValidationError(f"unknown field 'coefficients.{key}'")
    overrides = {k: _number(v, f"coefficients.{k}") for k, v in cfg["coefficients"].items()}

    N = _number(cfg["grid"]["N"], "grid.N", int)
    if N < MIN_RESOLUTION:
        raise ValidationError(f"ResolutionTooSmall: grid.N={N} < {MIN_RESOLUTION}")
    try:
        mode = normalize_mode(str(cfg["mode"]))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    kappa = None if cfg["kappa"] is None else _number(cfg["kappa"], "kappa")
    if kappa is not None and kappa < 0:
        raise ValidationError("kappa >= 0 required")

    c = cfg["controller"]
    law = LAW_ALIASES.get(str(c["law"]), str(c["law"]))
    controller = ctl.ControllerConfig(
        law=law,
        k1=_number(c["k1"], "controller.k1"),
        trace_method=str(c["trace_method"]),
        feedback_sign=_number(c["feedback_sign"], "controller.feedback_sign"),
    )
    if mode == "constraint" and law == "discrete_sec4":
        raise ValidationError("law discrete_sec4 requires mode viscous")

    i = cfg["integrator"]
    integrator = IntegratorConfig(
        scheme=str(i["scheme"]),
        dt=_number(i["dt"], "integrator.dt"),
        t_end=None if i["t_end"] is None else _number(i["t_end"], "integrator.t_end"),
        snapshot_stride=_number(i["snapshot_stride"], "integrator.snapshot_stride", int),
    )
    s = cfg["scheme"]
    if s["tip_stencil"] not in ("consistent", "printed"):
        raise ValidationError(f"unknown tip stencil {s['tip_stencil']!r}")
    scheme = SchemeOptions(
        coupling_sign=_number(s["coupling_sign"], "scheme.coupling_sign"),
        tip_stencil=str(s["tip_stencil"]),
        viscosity_denominator=_number(s["viscosity_denominator"], "scheme.viscosity_denominator"),
    )
    initial = {k: _number(v, f"initial.{k}") for k, v in cfg["initial"].items()}
    conv_N = [_number(n, "convergence.N", int) for n in cfg["convergence"]["N"]]
    sweep_N = [_number(n, "sweep.N", int) for n in cfg["sweep"]["N"]]
    for n in conv_N + sweep_N:
        if n < MIN_RESOLUTION:
            raise ValidationError(f"ResolutionTooSmall: N={n} < {MIN_RESOLUTION}")
    gains = [_number(g, "sweep.gains") for g in cfg["sweep"]["gains"]]
    out = cfg["out"] if cfg["out"] is not None else "out"
    spec = ExperimentSpec(
        kind=kind,
        raw=raw,
        coefficient_overrides=overrides,
        N=N,
        mode=mode,
        kappa=kappa,
        controller=controller,
        integrator=integrator,
        initial=initial,
        scheme=scheme,
        closed_loop_spectrum=bool(cfg["spectrum"]["closed_loop"]),
        convergence_N=conv_N,
        convergence_sigma_C=None
        if cfg["convergence"]["sigma_C"] is None
        else _number(cfg["convergence"]["sigma_C"], "convergence.sigma_C"),
        oracle_sigma_C=None
        if cfg["oracle"]["sigma_C"] is None
        else _number(cfg["oracle"]["sigma_C"], "oracle.sigma_C"),
        sweep_gains=gains,
        sweep_N=sweep_N,
        seed=_number(cfg["seed"], "seed", int),
        out_dir=Path(out),
    )
    try:
        coeffs = spec.coefficients()
    except PiezoBeamError as exc:
        raise ValidationError(f"{type(exc).__name__}: {exc}") from None
    resolved = copy.deepcopy(cfg)
    resolved["kind"] = kind
    resolved["mode"] = mode
    resolved["controller"]["law"] = law
    resolved["out"] = str(spec.out_dir)
    resolved["resolved_coefficients"] = {k: v for k, v in coeffs.as_dict().items() if v is not None}
    resolved["resolved_coefficients"]["A1"] = coeffs.A1
    resolved["kappa_effective"] = kappa if kappa is not None else (
        coeffs.kappa if coeffs.kappa is not None else raw.L / N / 5
    )
    resolved["t_end_effective"] = integrator.horizon(coeffs.A1)
    spec.resolved = resolved
    return spec


def parse_config(path, overrides: Optional[dict] = None) -> ExperimentSpec:
    """Read a YAML config file; omitted fields take the default values."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    return build_spec(resolve(load_config_text(text, str(path)), overrides))


# ---------------------------------------------------------------- writing
def header_lines(spec: ExperimentSpec, extra: Optional[dict] = None) -> List[str]:
    """The resolved spec as '#' comments.  The output directory is left out so
    that identical experiments written to different places are bit-identical."""
    body = {k: v for k, v in spec.resolved.items() if k != "out"}
    if extra:
        body.update(extra)
    text = yaml.safe_dump(_plain(body), sort_keys=True, default_flow_style=False)
    return ["# " + line for line in text.rstrip("\n").splitlines()]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(repr(float(obj))) if np.isfinite(obj) else str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_csv(path: Path, columns: Dict[str, Any], header: List[str]):
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    with open(path, "w", newline="\n") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return FMT % float(v)


# ---------------------------------------------------------- experiments
def run_simulate(spec: ExperimentSpec) -> dict:
    sys_ = spec.system()
    state = bump_initial_state(sys_, spec.initial["amplitude"], spec.initial["exponent_sign"])
    trace = run(state, sys_, integrator=spec.integrator)
    out = spec.out_dir
    write_csv(out / "trace.csv", trace.arrays(), header_lines(spec))
    x = sys_.grid.nodes
    for k, st in trace.snapshots:
        write_csv(
            out / "snapshots" / f"snapshot_{k:07d}.csv",
            {"x": x, "w": st.w, "phi2": st.phi2},
            header_lines(spec, {"snapshot_step": k, "snapshot_t_star": st.time}),
        )
    E = np.asarray(trace.energies)
    return {"steps": len(E) - 1, "E_final_over_E0": float(E[-1] / E[0])}


def run_spectrum(spec: ExperimentSpec) -> dict:
    controller = spec.controller if spec.closed_loop_spectrum else ctl.OFF
    gen = assemble_generator(spec.system(controller=controller))
    ev = spectrum(gen)
    write_csv(spec.out_dir / "eigenvalues.csv", {"re": ev.real, "im": ev.imag}, header_lines(spec))
    return {"abscissa": float(ev.real.max()), "count": int(ev.size)}


def manufactured_P_error(N: int, L: float, sigma_C: float, bc: str, route: str) -> float:
    """Relative L² error of P applied to a manufactured right-hand side.

    ``dn``: s = x - x³/(3L²); ``nn``: s = cos(πx/L).  Both satisfy the
    boundary conditions exactly, and f = (ςC̃ - d²/dx²) s in closed form.
    """
    grid = build_grid(N, L)
    x = grid.nodes
    if bc == "dn":
        s = x - x**3 / (3 * L**2)
        f = sigma_C * s + 2 * x / L**2
    else:
        k = np.pi / L
        s = np.cos(k * x)
        f = (sigma_C + k**2) * s
    ops = SigmaOperators(grid, sigma_C, bc)
    approx = ops.apply_P_solve(f) if route == "solve" else ops.apply_P_kernel(f)
    return grid.norm(approx - s) / grid.norm(s)


def run_convergence(spec: ExperimentSpec) -> dict:
    sigma_C = spec.convergence_sigma_C or spec.coefficients().sigma_C
    rows = {"bc": [], "route": [], "N": [], "error": [], "observed_order": []}
    orders = []
    for bc in ("dn", "nn"):
        for route in ("solve", "kernel"):
            prev = None
            for N in spec.convergence_N:
                err = manufactured_P_error(N, spec.raw.L, sigma_C, bc, route)
                order = np.nan if prev is None else np.log(prev[1] / err) / np.log(N / prev[0])
                if prev is not None:
                    orders.append(order)
                rows["bc"].append(bc)
                rows["route"].append(route)
                rows["N"].append(N)
                rows["error"].append(err)
                rows["observed_order"].append(order)
                prev = (N, err)
    write_csv(spec.out_dir / "convergence.csv", rows, header_lines(spec, {"convergence_sigma_C": sigma_C}))
    return {"min_order": float(np.min(orders)) if orders else None}


def run_oracle_suite(spec: ExperimentSpec) -> dict:
    from .oracles import sigma_oracle_suite

    sigma_C = spec.oracle_sigma_C or spec.coefficients().sigma_C
    rows = sigma_oracle_suite(sigma_C, spec.raw.L, seed=spec.seed)
    cols = {
        "check": [r["check"] for r in rows],
        "bc": [r["bc"] for r in rows],
        "value": [r["value"] for r in rows],
        "threshold": [r["threshold"] for r in rows],
        "passed": [int(r["passed"]) for r in rows],
    }
    write_csv(spec.out_dir / "oracle_suite.csv", cols, header_lines(spec, {"oracle_sigma_C": sigma_C}))
    return {"passed": int(sum(cols["passed"])), "total": len(rows)}


def run_sweep(spec: ExperimentSpec) -> dict:
    rows = {"gain": [], "N": [], "omega": [], "abscissa": [], "E_final_over_E0": []}
    for gain in spec.sweep_gains:
        controller = ctl.ControllerConfig(
            spec.controller.law, gain, spec.controller.trace_method, spec.controller.feedback_sign
        )
        for N in spec.sweep_N:
            sys_ = spec.system(N, controller)
            state = bump_initial_state(sys_, spec.initial["amplitude"], spec.initial["exponent_sign"])
            trace = run(state, sys_, integrator=spec.integrator)
            fit = fit_decay_rate(trace, (1.0, trace.times[-1]))
            rows["gain"].append(gain)
            rows["N"].append(N)
            rows["omega"].append(fit.omega)
            rows["abscissa"].append(spectral_abscissa(assemble_generator(sys_)))
            rows["E_final_over_E0"].append(trace.energies[-1] / trace.energies[0])
    write_csv(spec.out_dir / "sweep.csv", rows, header_lines(spec))
    return {"cells": len(rows["gain"])}


RUNNERS = {
    "simulate": run_simulate,
    "spectrum": run_spectrum,
    "convergence": run_convergence,
    "oracle_suite": run_oracle_suite,
    "sweep": run_sweep,
}


def run_experiment(spec: ExperimentSpec) -> dict:
    try:
        spec.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"output directory not writable: {spec.out_dir} ({exc.strerror})") from None
    if not os.access(spec.out_dir, os.W_OK):
        raise ValidationError(f"output directory not writable: {spec.out_dir}")
    return RUNNERS[spec.kind](spec)


# ------------------------------------------------------------------ main
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="piezobeam", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["simulate", "spectrum", "convergence", "oracle-suite", "sweep"])
    p.add_argument("--config", type=Path, help="YAML config file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--law", choices=sorted(LAW_ALIASES))
    p.add_argument("--mode", choices=["viscous", "constraint"])
    p.add_argument("--n", type=int, help="number of grid intervals N")
    p.add_argument("--gain", type=float, help="feedback gain k1")
    return p


def cli_overrides(args) -> dict:
    o: dict = {"kind": args.command.replace("-", "_")}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.mode is not None:
        o["mode"] = args.mode
    if args.n is not None:
        o["grid"] = {"N": args.n}
    ctrl = {}
    if args.law is not None:
        ctrl["law"] = args.law
    if args.gain is not None:
        ctrl["k1"] = args.gain
    if ctrl:
        o["controller"] = ctrl
    env = os.environ.get(OUT_ENV)
    if args.out is not None:
        o["out"] = str(args.out)
    elif env:
        o["out"] = env
    return o


def error_line(exc: BaseException) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc).strip("'\"")}, ensure_ascii=False)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = cli_overrides(args)
        if args.config is not None:
            spec = parse_config(args.config, overrides)
        else:
            spec = build_spec(resolve({}, overrides))
        summary = run_experiment(spec)
    except (PiezoBeamError, ValueError, ArithmeticError, OSError) as exc:
        print(error_line(exc), file=sys.stderr)
        return 2 if isinstance(exc, (ParseError, ValidationError)) else 1
    print(json.dumps({"kind": spec.kind, "out": str(spec.out_dir), **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
