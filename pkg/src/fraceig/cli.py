"""Command-line front end: ``fraceig CONFIG.json [--output PATH] [--threads N] [--quiet]``.

The config is a JSON object with keys ``domain``, ``weight``, ``cutoff``,
``quadrature``, ``task``, ``params``, ``output`` and ``seed``; unknown keys
are rejected.  Results are CSV (``#`` metadata lines, then a header row) or,
for ``conditions``, pretty-printed JSON.  Exit codes: 0 success, 2 invalid
input, 3 solver failure.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .analysis import Certificate, check_conditions, critical_d, default_s_grid, sweep_s
from .basis import Boundary, BoxDomain, enumerate_modes
from .design import BangBangParams, default_design_grid, optimize_weight
from .dynamics import SimConfig, simulate, steady_state_residual
from .environment import Ball, Box, Weight, assemble_weight_matrix
from .errors import CertificateRejected, FracEigError, NotInClassM, UnknownPreset, ValidationError
from .pencil import solve
from .quadrature import QuadSpec, default_spec, quadrature_grid

THREADS_ENV = "FRACEIG_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

TASKS = ("solve", "sweep-s", "sweep-d", "conditions", "optimize-weight", "simulate")
TOP_KEYS = {"domain", "weight", "cutoff", "quadrature", "task", "params", "output", "seed"}
PRESET_DOMAIN = {"lengths": [math.pi, math.pi], "boundary": "neumann"}

# accepted task parameters and their defaults (None: no default)
TASK_PARAMS = {
    "solve": {"d": 1.0, "s": 1.0},
    "sweep-s": {"d": [1.0], "s_grid": None},
    "sweep-d": {"d": [1.0], "s_grid": None},
    "conditions": {"certificate": None, "s_grid": None},
    "optimize-weight": {"m_bar": None, "m_under": None, "m0": None, "d": 1.0, "s": 1.0,
                        "tol": 1e-10, "max_iter": 50},
    "simulate": {"d": 1.0, "s": 1.0, "dt": 0.05, "T": 100.0, "initial": 1.0,
                 "survival_floor": None, "sample_every": 10},
}


def preset_weight(name: str) -> Weight:
    """Quarter-disk environments on ``(0, pi)^2``: ``m1`` (8 / -1) and ``m2`` (1 / -1)."""
    inside = {"m1": 8.0, "m2": 1.0}
    if name not in inside:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {sorted(inside)}")
    return Weight(-1.0, ((Ball((0.0, 0.0), 1.0), inside[name]),), label=name)


# -- config parsing ---------------------------------------------------------

def _strict(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ValidationError(f"{where} must be an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ValidationError(f"unknown field(s) in {where}: {sorted(extra)}")


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(f"{where} must be a finite number")
    return float(v)


def _num_list(v, where):
    if not isinstance(v, list) or not v:
        raise ValidationError(f"{where} must be a non-empty list of numbers")
    return [_num(x, where) for x in v]


def _parse_domain(raw):
    _strict(raw, {"lengths", "boundary"}, "domain")
    if "lengths" not in raw:
        raise ValidationError("domain.lengths is required")
    lengths = _num_list(raw["lengths"], "domain.lengths")
    try:
        boundary = Boundary(raw.get("boundary", "neumann"))
    except ValueError:
        raise ValidationError(f"unknown boundary {raw.get('boundary')!r}") from None
    return {"lengths": lengths, "boundary": boundary.value}


def _parse_shape(raw, i):
    where = f"weight.shapes[{i}]"
    kind = raw.get("type") if isinstance(raw, dict) else None
    if kind == "ball":
        _strict(raw, {"type", "center", "radius", "value"}, where)
        return {"type": "ball", "center": _num_list(raw.get("center"), where + ".center"),
                "radius": _num(raw.get("radius"), where + ".radius"), "value": _num(raw.get("value"), where + ".value")}
    if kind == "box":
        _strict(raw, {"type", "lower", "upper", "value"}, where)
        return {"type": "box", "lower": _num_list(raw.get("lower"), where + ".lower"),
                "upper": _num_list(raw.get("upper"), where + ".upper"), "value": _num(raw.get("value"), where + ".value")}
    raise ValidationError(f"{where}.type must be 'ball' or 'box'")


def _parse_weight(raw):
    if not isinstance(raw, dict):
        raise ValidationError("weight must be an object")
    if "preset" in raw:
        _strict(raw, {"preset"}, "weight")
        return {"preset": raw["preset"]}
    if "grid" in raw:
        _strict(raw, {"grid"}, "weight")
        g = raw["grid"]
        _strict(g, {"panels", "order", "values"}, "weight.grid")
        return {"grid": {"panels": int(_num(g.get("panels"), "weight.grid.panels")),
                         "order": int(_num(g.get("order", 2), "weight.grid.order")),
                         "values": _num_list(g.get("values"), "weight.grid.values")}}
    _strict(raw, {"background", "shapes"}, "weight")
    shapes = raw.get("shapes", [])
    if not isinstance(shapes, list):
        raise ValidationError("weight.shapes must be a list")
    return {"background": _num(raw.get("background", 0.0), "weight.background"),
            "shapes": [_parse_shape(s, i) for i, s in enumerate(shapes)]}


def _parse_params(task, raw):
    allowed = TASK_PARAMS[task]
    raw = {} if raw is None else raw
    _strict(raw, set(allowed), "params")
    out = {}
    for key, default in allowed.items():
        v = raw.get(key, default)
        if v is None:
            out[key] = None
        elif key in ("d",) and task in ("sweep-s", "sweep-d"):
            out[key] = _num_list(v if isinstance(v, list) else [v], "params.d")
        elif key == "s_grid":
            out[key] = _num_list(v, "params.s_grid")
        elif key == "certificate":
            _strict(v, {"x0", "rho", "delta", "M"}, "params.certificate")
            out[key] = {"x0": _num_list(v.get("x0"), "certificate.x0"),
                        **{k: _num(v.get(k), f"certificate.{k}") for k in ("rho", "delta", "M")}}
        elif key == "initial":
            out[key] = _num(v, "params.initial") if not isinstance(v, list) else _num_list(v, "params.initial")
        elif key in ("max_iter", "sample_every"):
            n = _num(v, f"params.{key}")
            if n != int(n) or n < 1:
                raise ValidationError(f"params.{key} must be a positive integer")
            out[key] = int(n)
        else:
            out[key] = _num(v, f"params.{key}")
    if task == "conditions" and out["certificate"] is None:
        raise ValidationError("task 'conditions' needs params.certificate")
    if task == "optimize-weight":
        missing = [k for k in ("m_bar", "m_under") if out[k] is None]
        if missing:
            raise ValidationError(f"task 'optimize-weight' needs params {missing}")
    return out


def parse_config(raw: dict) -> dict:
    """Validate and normalize a raw config; defaults are filled in explicitly."""
    _strict(raw, TOP_KEYS, "config")
    task = raw.get("task")
    if task not in TASKS:
        raise ValidationError(f"task must be one of {list(TASKS)}, got {task!r}")
    if "weight" not in raw:
        raise ValidationError("weight is required")
    weight = _parse_weight(raw["weight"])
    if "domain" in raw:
        domain = _parse_domain(raw["domain"])
    elif "preset" in weight:
        domain = dict(PRESET_DOMAIN)
    else:
        raise ValidationError("domain is required")
    if "preset" in weight:
        preset_weight(weight["preset"])
        same = (domain["boundary"] == "neumann" and len(domain["lengths"]) == 2
                and all(abs(l - math.pi) <= 1e-12 * math.pi for l in domain["lengths"]))
        if not same:
            raise ValidationError("presets are defined on the Neumann square (0, pi)^2 only")
    cutoff = _num(raw.get("cutoff", 16), "cutoff")
    if cutoff != int(cutoff) or cutoff < 1:
        raise ValidationError("cutoff must be an integer >= 1")
    quad = raw.get("quadrature")
    if quad is not None:
        _strict(quad, {"panels", "order"}, "quadrature")
        quad = {"panels": int(_num(quad.get("panels"), "quadrature.panels")),
                "order": int(_num(quad.get("order", 20), "quadrature.order"))}
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ValidationError("output must be a path string")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError("seed must be an integer")
    return {"domain": domain, "weight": weight, "cutoff": int(cutoff), "quadrature": quad, "task": task,
            "params": _parse_params(task, raw.get("params")), "output": output, "seed": seed}


def config_hash(cfg: dict) -> str:
    """SHA-256 of the normalized config, excluding where the output goes."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# -- building objects -------------------------------------------------------

def build_domain(cfg) -> BoxDomain:
    return BoxDomain(tuple(cfg["domain"]["lengths"]), Boundary(cfg["domain"]["boundary"]))


def build_weight(cfg, domain: BoxDomain) -> Weight:
    w = cfg["weight"]
    if "preset" in w:
        return preset_weight(w["preset"])
    if "grid" in w:
        g = w["grid"]
        return Weight.from_samples(quadrature_grid(domain, QuadSpec(g["panels"], g["order"])), g["values"])
    shapes = []
    for s in w["shapes"]:
        if s["type"] == "ball":
            if len(s["center"]) != domain.dim:
                raise ValidationError("ball center dimension does not match the domain")
            shapes.append((Ball(tuple(s["center"]), s["radius"]), s["value"]))
        else:
            if len(s["lower"]) != domain.dim or len(s["upper"]) != domain.dim:
                raise ValidationError("box corners must match the domain dimension")
            shapes.append((Box(tuple(s["lower"]), tuple(s["upper"])), s["value"]))
    return Weight(w["background"], tuple(shapes))


def _quad_spec(cfg, domain):
    q = cfg["quadrature"]
    return default_spec(domain, cfg["cutoff"]) if q is None else QuadSpec(q["panels"], q["order"])


# -- output -----------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return format(float(x), ".17g")


class ResultTable:
    def __init__(self, header, rows, meta):
        self.header = list(header)
        self.rows = [list(r) for r in rows]
        self.meta = dict(meta)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}: {v}\n")
        buf.write(",".join(self.header) + "\n")
        for r in self.rows:
            buf.write(",".join(fmt(x) for x in r) + "\n")
        return buf.getvalue()


def write_atomic(path: str, text: str):
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".fraceig-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- tasks ------------------------------------------------------------------

def _meta(cfg, system=None):
    meta = {"fraceig": __version__, "config_hash": config_hash(cfg), "task": cfg["task"],
            "cutoff": cfg["cutoff"]}
    if system is not None:
        q = system.quadrature
        meta["quadrature"] = f"{q.get('rule')} order={q.get('order')} panels={q.get('panels')} nodes={q.get('nodes')}"
    return meta


def _s_grid(params):
    return default_s_grid() if params.get("s_grid") is None else np.asarray(params["s_grid"])


def _system(cfg, threads):
    domain = build_domain(cfg)
    weight = build_weight(cfg, domain)
    basis = enumerate_modes(domain, cfg["cutoff"])
    return domain, weight, basis, assemble_weight_matrix(weight, basis, _quad_spec(cfg, domain))


def task_solve(cfg, threads):
    p = cfg["params"]
    _, _, _, system = _system(cfg, threads)
    sl = solve(system, p["d"], p["s"], vectors=False, require_minus1=False)
    meta = _meta(cfg, system)
    return ResultTable(["d", "s", "lambda1", "lambda_minus1"],
                       [[p["d"], p["s"], sl.lambda1, sl.lambda_minus1]], meta), f"lambda1 = {sl.lambda1:.12g}"


def task_sweep_s(cfg, threads):
    p = cfg["params"]
    _, _, _, system = _system(cfg, threads)
    sw = sweep_s(system, 1.0, _s_grid(p), threads)
    meta = _meta(cfg, system)
    meta["lambda1_at_0"] = fmt(sw.lambda1_at_0)
    header = ["s", "lambda1", "neg_lambda_minus1"]
    cols = []
    shapes = []
    for d in p["d"]:
        sd = sw.at_motility(d)
        header.append(f"d_s_lambda1[d={d!r}]")
        cols.append(sd.lambda1)
        meta[f"classification[d={d!r}]"] = sd.classification.value
        shapes.append(f"d={d:g}: {sd.classification.value}")
    rows = [[s, l, n, *[c[i] for c in cols]]
            for i, (s, l, n) in enumerate(zip(sw.s_grid, sw.lambda1_unit, sw.neg_lambda_minus1))]
    return ResultTable(header, rows, meta), "; ".join(shapes)


def task_sweep_d(cfg, threads):
    p = cfg["params"]
    _, _, _, system = _system(cfg, threads)
    sw = sweep_s(system, 1.0, _s_grid(p), threads)
    crit = critical_d(system)
    meta = _meta(cfg, system)
    meta["d_star"] = fmt(crit.d_star)
    meta["lambda1_at_0"] = fmt(crit.lambda1_s0)
    rows = []
    for d in p["d"]:
        sd = sw.at_motility(d)
        i = int(np.argmin(sd.lambda1))
        inf_val, inf_s = crit.infimum(d)
        rows.append([d, sd.classification.value, sd.lambda1[i], sd.s_grid[i], d * crit.lambda1_s1,
                     crit.lambda1_s0, inf_val, inf_s])
    header = ["d", "classification", "min_lambda1", "argmin_s", "lambda1_s1", "lambda1_s0",
              "inf_lambda1", "inf_s"]
    return ResultTable(header, rows, meta), f"d* = {crit.d_star:.12g}"


def task_conditions(cfg, threads):
    p = cfg["params"]
    domain, weight, _, system = _system(cfg, threads)
    cert = Certificate(**p["certificate"])
    rep = check_conditions(weight, domain, system, cert, _s_grid(p), threads)
    doc = {"meta": _meta(cfg, system), "report": rep.to_dict()}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n", (
        f"abstract condition holds at every s: {rep.abstract_holds_everywhere}")


def task_optimize(cfg, threads):
    p = cfg["params"]
    domain = build_domain(cfg)
    basis = enumerate_modes(domain, cfg["cutoff"])
    m0 = p["m0"]
    if m0 is None:
        weight = build_weight(cfg, domain)
        m0 = assemble_weight_matrix(weight, basis, _quad_spec(cfg, domain)).report.average
    params = BangBangParams.for_domain(domain, p["m_bar"], p["m_under"], m0)
    grid = default_design_grid(domain, cfg["cutoff"])
    trace = optimize_weight(domain, params, basis, p["d"], p["s"], p["tol"], p["max_iter"], grid=grid)
    meta = _meta(cfg)
    meta.update({"converged": trace.converged, "target_measure": fmt(params.target_measure),
                 "final_D_mass": fmt(trace.final_D_mass), "grid_nodes": len(grid)})
    rows = [[i, lam, grid.weights[mask].sum()] for i, ((_, lam), mask) in enumerate(zip(trace.iterates, trace.masks))]
    table = ResultTable(["iteration", "lambda1", "D_mass"], rows, meta)
    coords = [f"x{i}" for i in range(domain.dim)]
    mask_rows = [[*x, v] for x, v in zip(grid.nodes, trace.final_weight.samples.values)]
    mask_table = ResultTable([*coords, "m"], mask_rows, meta)
    return (table, mask_table), f"final lambda1 = {trace.lambdas[-1]:.12g} (converged: {trace.converged})"


def task_simulate(cfg, threads):
    p = cfg["params"]
    _, _, _, system = _system(cfg, threads)
    sim = SimConfig(p["d"], p["s"], p["dt"], p["T"], np.asarray(p["initial"]), p["survival_floor"],
                    p["sample_every"])
    traj = simulate(system, sim)
    meta = _meta(cfg, system)
    meta["verdict"] = traj.verdict.value
    meta["clipped_mass"] = fmt(traj.clipped_mass)
    meta["steady_state_residual"] = fmt(steady_state_residual(traj.final_state, system, p["d"], p["s"]))
    rows = list(zip(traj.times, traj.masses))
    return ResultTable(["t", "mass"], rows, meta), f"verdict: {traj.verdict.value}"


DISPATCH = {
    "solve": task_solve,
    "sweep-s": task_sweep_s,
    "sweep-d": task_sweep_d,
    "conditions": task_conditions,
    "optimize-weight": task_optimize,
    "simulate": task_simulate,
}


def mask_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.mask{ext or '.csv'}"


def run(cfg: dict, output: str | None = None, threads: int | None = None) -> tuple[object, str]:
    """Execute a parsed config; writes to ``output`` (if any) and returns (result, summary)."""
    result, summary = DISPATCH[cfg["task"]](cfg, threads)
    if output is not None:
        written = []
        try:
            if isinstance(result, tuple):
                write_atomic(output, result[0].to_csv())
                written.append(output)
                write_atomic(mask_path(output), result[1].to_csv())
            else:
                write_atomic(output, result if isinstance(result, str) else result.to_csv())
        except BaseException:
            for f in written:
                os.unlink(f)
            raise
    return result, summary


def _render(result) -> str:
    if isinstance(result, str):
        return result
    if isinstance(result, tuple):
        return result[0].to_csv()
    return result.to_csv()


def _threads(flag):
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fraceig", description=__doc__.split("\n")[0])
    ap.add_argument("config", help="JSON experiment description")
    ap.add_argument("--output", help="result path (overrides the config's output field)")
    ap.add_argument("--threads", type=int, help=f"worker threads for sweeps (default: ${THREADS_ENV} or 1)")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary line")
    args = ap.parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = parse_config(raw)
        threads = _threads(args.threads)
        if threads < 1:
            raise ValidationError("--threads must be at least 1")
        output = args.output if args.output is not None else cfg["output"]
        result, summary = run(cfg, output, threads)
    except (ValidationError, UnknownPreset, NotInClassM, CertificateRejected, json.JSONDecodeError, OSError) as exc:
        print(f"fraceig: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FracEigError as exc:
        print(f"fraceig: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if output is None:
        sys.stdout.write(_render(result))
    if not args.quiet:
        print(summary, file=sys.stderr if output is None else sys.stdout)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
