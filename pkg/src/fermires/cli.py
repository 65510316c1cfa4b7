"""Command-line front end.

Every subcommand prints one JSON document (or CSV with ``--output csv``) that
embeds the resolved configuration and the library version. Settings come from
defaults, then an optional flat ``key = value`` config file, then flags.
``FERMIRES_OUTPUT_DIR`` overrides ``output_dir``; when an output directory is
set the report is also written there.

Exit codes: 0 success, 1 invalid input (error JSON on stderr), 2 a numerical
budget ran out (partial results are still emitted and flagged).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BudgetExceeded, FermiresError
from .geometry import (
    curvature_closed_form,
    graph_curvature,
    make_patch,
    transversality_check,
    zero_curvature_locus,
)
from .newton import newton_polyhedron
from .oscillatory import CutoffSpec, decay_scan
from .resolvent import (
    finite_section_norm,
    holder_equivalence_test,
    holder_r,
    kernel,
    threshold_scan,
    uniformity_grid,
)
from .taylor import classify_normal_form, taylor_expand
from .torus import TWO_PI, EnergyLevel, TorusPoint, critical_points, h0

COMMANDS = ("curvature-scan", "degenerate-locus", "taylor", "newton", "decay",
            "resolvent-scan", "thresholds", "holder-test")

PRESETS = {"band-i": 2.0, "band-iii": 5.0, "umbilic": 6.0, "near-threshold": 4.1}

DEFAULT_TOLERANCES = {
    "zero_tol": 1e-10,   # Taylor coefficients below this are outside the Newton support
    "norm_tol": 1e-8,    # relative stopping tolerance of the p -> p' power iteration
}

ENV_OUTPUT_DIR = "FERMIRES_OUTPUT_DIR"


@dataclass
class RunConfig:
    command: str
    lam: float = 6.0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_dir: str | None = None
    seed: int = 0
    budget: int = 250_000_000
    output: str = "json"
    threads: int = 1
    at: str = "umbilic"
    samples: int = 1000
    grid: int = 256
    degree: int = 5
    directions: int = 64
    r_min: float = 16.0
    r_max: float = 4096.0
    cutoff_fraction: float = 0.9
    p: float = 1.25
    section_radius: int = 8
    scan: str = "uniformity"
    eps: str = "0.4,0.2,0.1,0.05"
    matrices: int = 50
    size: int = 8
    trials: int = 20

    def validate(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not 0.0 <= self.lam <= 12.0:
            raise ValueError("lambda must lie in [0, 12]")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerances: {sorted(unknown)}")
        if self.output not in ("json", "csv"):
            raise ValueError("output must be json or csv")
        if not 1.0 <= self.p <= 2.0:
            raise ValueError("p must lie in [1, 2]")
        if self.scan not in ("uniformity", "threshold"):
            raise ValueError("scan must be uniformity or threshold")
        if self.threads < 1 or self.budget < 1:
            raise ValueError("threads and budget must be positive")


_FIELD_TYPES = {"lam": float, "seed": int, "budget": int, "threads": int, "samples": int, "grid": int,
                "degree": int, "directions": int, "r_min": float, "r_max": float,
                "cutoff_fraction": float, "p": float, "section_radius": int, "matrices": int,
                "size": int, "trials": int, "output": str, "output_dir": str, "at": str,
                "scan": str, "eps": str}
_ALIASES = {"lambda": "lam"}


def read_config_file(path: str) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _coerce(settings: dict) -> dict:
    out, tols = {}, {}
    for k, v in settings.items():
        k = _ALIASES.get(k, k)
        if k in DEFAULT_TOLERANCES:
            tols[k] = float(v)
        elif k == "preset":
            if v not in PRESETS:
                raise ValueError(f"unknown preset {v!r}")
            out["lam"] = PRESETS[v]
        elif k in _FIELD_TYPES:
            out[k] = _FIELD_TYPES[k](v)
        else:
            raise ValueError(f"unknown config key {k!r}")
    if tols:
        out["tolerances"] = {**DEFAULT_TOLERANCES, **tols}
    return out


# ---------------------------------------------------------------------------
# point selection


def select_point(cfg: RunConfig) -> tuple[TorusPoint, int | None]:
    """Resolve ``--at`` to a surface point and, if forced, the solved axis."""
    E = EnergyLevel(cfg.lam)
    if cfg.at == "umbilic":
        if cfg.lam != 6.0:
            raise ValueError("umbilic points exist only at lambda = 6")
        return TorusPoint.at((0.25, 0.25, 0.25)), None
    if cfg.at == "special-axis":
        if not -1.0 < E.E < 1.0:
            raise ValueError("the axis point needs lambda in (4, 8)")
        return TorusPoint.at((0.25, math.acos(E.E) / TWO_PI, 0.25)), 2
    if cfg.at == "generic":
        locus = zero_curvature_locus(E, cfg.grid)
        if not locus:
            raise ValueError(f"no zero-curvature points at lambda = {cfg.lam}")
        best = max(locus, key=lambda d: (round(min(abs(a) for a in d.point.a), 12), [-x for x in d.point.xi]))
        return best.point, None
    try:
        xi = [float(s) for s in cfg.at.split(",")]
    except ValueError:
        raise ValueError(f"--at expects umbilic, special-axis, generic or x,y,z; got {cfg.at!r}") from None
    p = TorusPoint.at(xi)
    if abs(h0(p) - cfg.lam) > 1e-10:
        raise ValueError(f"h0 at {xi} is {h0(p):.12g}, not lambda = {cfg.lam}")
    return p, None


# ---------------------------------------------------------------------------
# commands; each returns (result, rows for csv, budget_hit)


def _frac(x):
    return str(x) if isinstance(x, Fraction) else x


def cmd_thresholds(cfg):
    rows = [{"xi": list(t.point.xi), "energy": t.energy, "kind": t.kind.value} for t in critical_points()]
    return {"critical_points": rows}, rows, False


def cmd_curvature_scan(cfg):
    rng = np.random.default_rng(cfg.seed)
    E = EnergyLevel(cfg.lam)
    rows, worst = [], 0.0
    while len(rows) < cfg.samples:
        free = rng.random(2)
        axis = int(rng.integers(3))
        a_s = E.E - np.cos(TWO_PI * free).sum()
        if abs(a_s) >= 1.0 - 1e-6:
            continue
        xs = math.acos(a_s) / TWO_PI * (1 if rng.random() < 0.5 else -1)
        xi = np.insert(free, axis, xs)
        p = TorusPoint.at(xi)
        try:
            patch = make_patch(p, E)
        except FermiresError:
            continue
        K, _ = curvature_closed_form(patch.base)
        Kg = graph_curvature(patch, patch.base_free)
        rel = abs(K - Kg) / max(abs(K), 1e-300)
        worst = max(worst, rel)
        rows.append({"xi": list(patch.base.xi), "K_closed": K, "K_graph": Kg, "rel_err": rel})
    return {"lambda": cfg.lam, "samples": len(rows), "max_rel_err": worst}, rows, False


def cmd_degenerate_locus(cfg):
    pts = zero_curvature_locus(EnergyLevel(cfg.lam), cfg.grid)
    rows = []
    for d in pts:
        cross, _ = transversality_check(d)
        rows.append({"xi": list(d.point.xi), "a": list(d.point.a), "umbilic": d.umbilic,
                     "transversal": d.transversal, "cross_norm": float(np.linalg.norm(cross))})
    return {"lambda": cfg.lam, "count": len(rows), "umbilic_count": sum(r["umbilic"] for r in rows),
            "points": rows}, rows, False


def _model(cfg):
    p, axis = select_point(cfg)
    E = EnergyLevel(cfg.lam)
    patch = make_patch(p, E, axis=axis)
    rotate = cfg.at != "umbilic"
    return patch, taylor_expand(patch, patch.base_free, cfg.degree, rotate=rotate)


def cmd_taylor(cfg):
    patch, m = _model(cfg)
    case = classify_normal_form(m, EnergyLevel(cfg.lam)) if cfg.degree >= 4 else None
    rows = [{"j1": i, "j2": j, "coefficient": v} for (i, j), v in sorted(m.coeffs.items())]
    res = {
        "point": list(patch.base.xi), "solved_axis": patch.axis, "rotation": m.rotation.tolist(),
        "coefficients": rows,
        "alpha": {k: m.alpha(k) for k in ("1", "2", "12", "21", "111", "112", "122", "222", "1111")},
        "case": None if case is None else {
            "tag": case.case_tag.value, "constraints": case.verified_constraints,
            "nonzero": case.nonzero, "notes": case.notes},
    }
    return res, rows, False


def cmd_newton(cfg):
    patch, m = _model(cfg)
    nd = newton_polyhedron(m, cfg.tolerances["zero_tol"])
    face = nd.principal_face
    res = {
        "point": list(patch.base.xi),
        "support": sorted(list(k) for k in nd.taylor_support),
        "vertices": [[str(a), str(b)] for a, b in nd.polyhedron_vertices],
        "d": _frac(nd.newton_distance),
        "principal_face": {"kind": face.kind, "start": [str(c) for c in face.start],
                           "end": None if face.end is None else [str(c) for c in face.end]},
        "principal_part": {f"{i},{j}": v for (i, j), v in sorted(nd.principal_part.coeffs.items())},
        "vanishing_order": nd.vanishing_order,
        "height": _frac(nd.height),
        "varchenko_exponent": nd.varchenko_exponent,
        "exponent": _frac(nd.predicted_exponent),
    }
    return res, [res], False


def cmd_decay(cfg):
    p, axis = select_point(cfg)
    E = EnergyLevel(cfg.lam)
    patch = make_patch(p, E, axis=axis)
    cutoff = CutoffSpec(tuple(patch.base_free), cfg.cutoff_fraction * patch.radius)
    scan = decay_scan(patch, cutoff, cfg.directions, cfg.r_min, cfg.r_max, max_nodes=cfg.budget)
    rows, budget_hit = [], False
    for f in scan.fits:
        for R, v, e in zip(f.radii, f.values, f.errors):
            budget_hit |= math.isinf(e)
            rows.append({"direction_x": f.direction[0], "direction_y": f.direction[1],
                         "direction_z": f.direction[2], "R": R,
                         "abs_value": abs(v) if v == v else float("nan"),
                         "quad_error": e, "tainted": f.tainted})
    res = {
        "point": list(patch.base.xi), "cutoff_radius": cutoff.radius,
        "min_exponent": scan.min_exponent, "argmin_direction": scan.fits[scan.argmin].direction.tolist(),
        "normal_exponent": scan.normal_fit.fitted_exponent, "tainted_fits": scan.tainted_fits,
        "exponents": [f.fitted_exponent for f in scan.fits],
    }
    return res, rows, budget_hit


def cmd_resolvent_scan(cfg):
    r = holder_r(cfg.p)
    rows = []
    if cfg.scan == "uniformity":
        R = cfg.section_radius
        for z in uniformity_grid():
            g = kernel(z, box_radius=4 * R)
            for sr in (R, 2 * R):
                est = finite_section_norm(g, cfg.p, sr, seed=cfg.seed, tol=cfg.tolerances["norm_tol"])
                rows.append({"z_re": z.real, "z_im": z.imag, "p": cfg.p, "r": r, "section_radius": sr,
                             "norm": est.value, "flag": "" if est.converged else "not-converged"})
        growth = [rows[i + 1]["norm"] / rows[i]["norm"] - 1.0 for i in range(0, len(rows), 2)]
        res = {"max_norm": max(x["norm"] for x in rows), "max_growth": max(growth)}
    else:
        eps = [float(e) for e in cfg.eps.split(",")]
        rep = threshold_scan(cfg.p, None, eps, section_radius=cfg.section_radius)
        for z, n, fl in zip(rep.z_samples, rep.norms, rep.flags):
            rows.append({"z_re": z.real, "z_im": z.imag, "p": cfg.p, "r": r,
                         "section_radius": cfg.section_radius, "norm": n, "flag": fl})
        res = {"max_norm": rep.max_norm, "slope": rep.near_threshold_slope,
               "slopes_by_threshold": {str(k): v for k, v in rep.slopes_by_threshold.items()}}
    res["rows"] = rows
    return res, rows, any(x["flag"] for x in rows)


def cmd_holder_test(cfg):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for k in range(cfg.matrices):
        m, n = (int(v) for v in rng.integers(1, cfg.size + 1, 2))
        A = rng.standard_normal((m, n))
        cd, cw = holder_equivalence_test(A, cfg.p, cfg.trials, seed=cfg.seed + k)
        rows.append({"index": k, "rows": m, "cols": n, "c_direct": cd, "c_weighted": cw, "gap": cd - cw})
    res = {"p": cfg.p, "r": holder_r(cfg.p), "max_excess": max(r["c_weighted"] - r["c_direct"] for r in rows),
           "max_gap": max(r["gap"] for r in rows), "rows": rows}
    return res, rows, False


HANDLERS = {
    "thresholds": cmd_thresholds, "curvature-scan": cmd_curvature_scan,
    "degenerate-locus": cmd_degenerate_locus, "taylor": cmd_taylor, "newton": cmd_newton,
    "decay": cmd_decay, "resolvent-scan": cmd_resolvent_scan, "holder-test": cmd_holder_test,
}


# ---------------------------------------------------------------------------


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return _jsonable(o)


def render(cfg: RunConfig, result: dict, rows: list) -> str:
    if cfg.output == "csv":
        buf = io.StringIO()
        flat = [{k: json.dumps(_clean(v)) if isinstance(v, (list, dict)) else _clean(v)
                 for k, v in r.items()} for r in rows]
        if flat:
            w = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(flat)
        return buf.getvalue()
    doc = {"version": __version__, "config": asdict(cfg), "result": result}
    return json.dumps(_clean(doc), sort_keys=True, indent=1) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fermires", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--output", choices=("json", "csv"))
    common.add_argument("--output-dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int, help="quadrature node cap per sample")
    common.add_argument("--threads", type=int)
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    sub = ap.add_subparsers(dest="command", required=True)
    specs = {
        "thresholds": [],
        "curvature-scan": [("--samples", int)],
        "degenerate-locus": [("--grid", int)],
        "taylor": [("--at", str), ("--degree", int), ("--grid", int)],
        "newton": [("--at", str), ("--degree", int), ("--grid", int)],
        "decay": [("--at", str), ("--directions", int), ("--r-min", float), ("--r-max", float),
                  ("--cutoff-fraction", float), ("--grid", int)],
        "resolvent-scan": [("--p", float), ("--section-radius", int), ("--scan", str), ("--eps", str)],
        "holder-test": [("--p", float), ("--matrices", int), ("--size", int), ("--trials", int)],
    }
    for name, opts in specs.items():
        sp = sub.add_parser(name, parents=[common])
        for flag, typ in opts:
            sp.add_argument(flag, type=typ)
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    settings: dict = {}
    if args.config:
        settings.update(read_config_file(args.config))
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("config", "command", "tol", "preset")}
    if args.preset:
        settings["preset"] = args.preset
    for item in args.tol:
        k, _, v = item.partition("=")
        settings[k.strip()] = v
    merged = _coerce(settings)
    merged.update(flags)
    env = os.environ.get(ENV_OUTPUT_DIR)
    if env:
        merged["output_dir"] = env
    cfg = RunConfig(command=args.command, **merged)
    cfg.validate()
    return cfg


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError, TypeError) as e:
        return _fail("ValidationError", str(e), 1)
    try:
        result, rows, budget_hit = HANDLERS[cfg.command](cfg)
    except BudgetExceeded as e:
        return _fail("BudgetExceeded", str(e), 2)
    except (FermiresError, ValueError) as e:
        return _fail(type(e).__name__, str(e), 1)
    result["budget_exhausted"] = budget_hit
    text = render(cfg, result, rows)
    sys.stdout.write(text)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cfg.command}.{cfg.output}").write_text(text)
    return 2 if budget_hit else 0


if __name__ == "__main__":
    sys.exit(main())
