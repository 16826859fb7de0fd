"""Command-line front end.

One executable, six subcommands:

  find        locate a closed geodesic (minimize / sweepout / newton)
  spectrum    index, nullity, return map, and circle samples of a geodesic
  iterates    indices and nullities of iterates, twisted-sum vs direct
  series      loop-space rational-cohomology series coefficients
  types       type-number table of an iterated geodesic
  check-morse alternating-inequality verifier for (M_k, B_k) data

Options come from flags or from a JSON config file (flags win).  Every run
writes its artifacts plus a manifest (config echo, versions, seed, wall time)
into the output directory, prints the main result JSON to stdout, and exits
0 on success, 2 on input errors, 3 on numeric failures, 4 when two routes to
the same quantity disagree.  Floating-point output carries 17 significant
digits so files round-trip bit-faithfully.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConsistencyError, GeodLabError, InputError, NumericError
from .finder import (
    Collapsed,
    FinderOptions,
    class_seed_polygon,
    minimize_in_class,
    refine_newton,
    resolution_for_bound,
    sweepout_minimax,
)
from .loopspace import (
    closed_geodesic,
    geodesic_to_json,
    length,
    polygon_from_json,
    polygon_to_json,
)
from .manifold import make_manifold
from .morse import (
    MorseCheckInput,
    RATIONAL,
    TypeNumberQuery,
    morse_check,
    poincare_series,
    type_numbers,
)
from .schemas import CONFIG_SCHEMAS, GEODESIC_SCHEMA, POLYGON_SCHEMA
from .spectral import iterated_index, primality_hint, spectral_data, spectral_to_json


# ---------------------------------------------------------------------------
# JSON with fixed-width floats


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise NumericError("cannot serialize a non-finite number")
    return format(float(x), ".17g")


def dumps17(obj, indent: int = 2) -> str:
    """JSON text with every float at 17 significant digits."""

    def emit(o, level):
        pad = " " * (indent * level)
        pad_in = " " * (indent * (level + 1))
        if isinstance(o, dict):
            if not o:
                return "{}"
            rows = [f'{pad_in}{json.dumps(str(k))}: {emit(v, level + 1)}'
                    for k, v in o.items()]
            return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
        if isinstance(o, (list, tuple)):
            seq = list(o)
            if not seq:
                return "[]"
            rows = [f"{pad_in}{emit(v, level + 1)}" for v in seq]
            return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _format_float(float(o))
        if isinstance(o, str):
            return json.dumps(o)
        raise InputError(f"cannot serialize object of type {type(o).__name__}")

    return emit(obj, 0) + "\n"


def _write_json(path: Path, obj):
    path.write_text(dumps17(obj))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_format_float(v) if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------------------
# config plumbing


def _merge_config(args: argparse.Namespace, command: str) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
    for key, val in vars(args).items():
        if key in ("command", "config", "func"):
            continue
        if val is not None:
            cfg[key.replace("__", "-")] = val
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise InputError(f"config rejected: {exc.message}") from None
    return cfg


def _manifold_from_config(cfg: dict):
    return make_manifold(cfg["manifold"], cfg["params"], delta=cfg.get("delta"))


def _load_geodesic(path: str):
    with open(path) as fh:
        obj = json.load(fh)
    if "polygon" in obj:
        jsonschema.validate(obj, GEODESIC_SCHEMA)
        poly_obj = obj["polygon"]
    else:
        jsonschema.validate(obj, POLYGON_SCHEMA)
        poly_obj = obj
    p = polygon_from_json(poly_obj)
    return closed_geodesic(p)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_find(cfg: dict, outdir: Path) -> dict:
    m = _manifold_from_config(cfg)
    opts = FinderOptions(
        N=cfg.get("n"),
        max_iters=cfg.get("max_iters", 10000),
        grad_tol=cfg.get("grad_tol", 1e-10),
        family_size=cfg.get("family_size", 64),
        seed=cfg.get("seed", 0),
    )
    method = cfg["method"]
    if method == "sweepout":
        result = sweepout_minimax(m, opts, threads=cfg.get("threads", 1))
    else:
        if cfg.get("seed_polygon"):
            with open(cfg["seed_polygon"]) as fh:
                seed_poly = polygon_from_json(json.load(fh), m)
        elif cfg.get("class") is not None:
            N = opts.N
            if N is None:
                bound = cfg.get("length_bound")
                if bound is None:
                    raise InputError("give n or length_bound to size the polygon")
                N = resolution_for_bound(bound, m.delta)
            seed_poly = class_seed_polygon(m, cfg["class"], N)
        else:
            raise InputError(f"method {method} needs seed_polygon or class")
        if method == "minimize":
            result = minimize_in_class(m, seed_poly, opts)
        else:
            result = refine_newton(seed_poly, opts)

    if isinstance(result, Collapsed):
        out = {"collapsed": True, "final_length": result.final_length}
        _write_json(outdir / "geodesic.json", out)
        _write_csv(outdir / "trace.csv", ["iteration", "max_length", "grad_norm"],
                   result.trace)
        return out
    out = geodesic_to_json(result)
    _write_json(outdir / "geodesic.json", out)
    if result.trace:
        _write_csv(outdir / "trace.csv", ["iteration", "max_length", "grad_norm"],
                   result.trace)
    return out


def _cmd_spectrum(cfg: dict, outdir: Path) -> dict:
    g = _load_geodesic(cfg["input"])
    if not g.converged:
        raise InputError("input polygon is not a converged closed geodesic")
    sd = spectral_data(g, grid=cfg.get("grid", 16))
    out = spectral_to_json(sd)
    _write_json(outdir / "spectral.json", out)
    _write_csv(outdir / "bott.csv", ["z_arg", "lambda", "n"],
               [(s["z_arg"], s["lambda"], s["n"]) for s in out["bott_samples"]])
    return out


def _cmd_iterates(cfg: dict, outdir: Path) -> dict:
    g = _load_geodesic(cfg["input"])
    if not g.converged:
        raise InputError("input polygon is not a converged closed geodesic")
    n_max = cfg.get("n_max", 4)
    mode = cfg.get("mode", "both")
    if cfg.get("prime", True):
        hint = primality_hint(g.polygon)
        if hint != 1:
            print(f"note: polygon looks like an iterate of multiplicity {hint} "
                  "(advisory heuristic)", file=sys.stderr)
    rows = []
    agree = True
    for n in range(1, n_max + 1):
        if mode == "both":
            ib, nub = iterated_index(g, n, mode="bott")
            idn, nud = iterated_index(g, n, mode="direct")
            ok = (ib, nub) == (idn, nud)
            agree = agree and ok
            rows.append({"n": n, "i_bott": ib, "nu_bott": nub,
                         "i_direct": idn, "nu_direct": nud, "agree": ok})
        else:
            i, nu = iterated_index(g, n, mode=mode)
            rows.append({"n": n, "i": i, "nu": nu})
    out = {"mode": mode, "rows": rows, "agree": agree}
    _write_json(outdir / "iterates.json", out)
    if mode == "both" and not agree:
        raise ConsistencyError("twisted-sum and direct iterate data disagree",
                               report=out)
    return out


def _cmd_series(cfg: dict, outdir: Path) -> dict:
    e = poincare_series(cfg["space"], cfg["n"], cfg["degree"])
    out = {"space": e.space, "n": e.n, "degree": e.degree,
           "coefficients": list(e.coefficients)}
    _write_json(outdir / "series.json", out)
    return out


def _cmd_types(cfg: dict, outdir: Path) -> dict:
    index_fn = {int(k): int(v) for k, v in cfg["index"].items()}
    p = cfg.get("p", RATIONAL)
    q = TypeNumberQuery(s=cfg["s"], p=p, index_fn=index_fn)
    table = type_numbers(q)
    out = {"coefficients": table.coefficients,
           "entries": {str(k): v for k, v in sorted(table.entries.items()) if v}}
    _write_json(outdir / "types.json", out)
    return out


def _cmd_check_morse(cfg: dict, outdir: Path) -> dict:
    M, B = [], []
    with open(cfg["input"]) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [h.strip().lower() for h in header]
        if cols[:2] != ["m", "b"]:
            raise InputError("morse CSV needs a header row 'M,B'")
        for row in reader:
            if not row or not row[0].strip():
                continue
            M.append(int(row[0]))
            B.append(int(row[1]))
    verdict = morse_check(MorseCheckInput(tuple(M), tuple(B), cfg.get("r_star")))
    out = {
        "passed": verdict.passed,
        "failed_rank": verdict.failed_rank,
        "failed_kind": verdict.failed_kind,
        "per_k_dominance": list(verdict.per_k_dominance),
    }
    _write_json(outdir / "verdict.json", out)
    return out


_COMMANDS = {
    "find": _cmd_find,
    "spectrum": _cmd_spectrum,
    "iterates": _cmd_iterates,
    "series": _cmd_series,
    "types": _cmd_types,
    "check-morse": _cmd_check_morse,
}


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str):
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geodlab",
                                 description="closed-geodesic laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--output", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="seed for randomized restarts")
        p.add_argument("--threads", type=int,
                       default=None, help="worker cap (default: env GEODLAB_THREADS or 1)")

    p = sub.add_parser("find", help="locate a closed geodesic")
    common(p)
    p.add_argument("--manifold", help="round_sphere | ellipsoid | flat_torus | torus_of_revolution")
    p.add_argument("--params", type=_float_list, help="comma-separated manifold parameters")
    p.add_argument("--delta", type=float, help="safe connection radius override")
    p.add_argument("--method", choices=["minimize", "sweepout", "newton"])
    p.add_argument("--n", type=int, help="polygon size")
    p.add_argument("--family-size", dest="family_size", type=int)
    p.add_argument("--grad-tol", dest="grad_tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--class", dest="klass", type=_int_list,
                   help="free homotopy class, e.g. 3,4 (chart manifolds)")
    p.add_argument("--seed-polygon", dest="seed_polygon", help="polygon JSON path")
    p.add_argument("--length-bound", dest="length_bound", type=float,
                   help="upper length bound a; sets N = floor(a/delta) + 1")

    p = sub.add_parser("spectrum", help="spectral data of a geodesic")
    common(p)
    p.add_argument("--input", help="geodesic or polygon JSON")
    p.add_argument("--grid", type=int, help="circle sample count (>= 8)")

    p = sub.add_parser("iterates", help="iterated indices and nullities")
    common(p)
    p.add_argument("--input", help="geodesic or polygon JSON")
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--mode", choices=["bott", "direct", "both"])
    p.add_argument("--prime", action="store_const", const=True,
                   help="caller asserts the geodesic is prime")

    p = sub.add_parser("series", help="loop-space series coefficients")
    common(p)
    p.add_argument("--space", help="omega+rel | omega_rel | omega+abs | omega_abs")
    p.add_argument("--n", type=int, help="sphere dimension")
    p.add_argument("--degree", type=int, help="truncation degree")

    p = sub.add_parser("types", help="type-number table")
    common(p)
    p.add_argument("--s", type=int, help="iterate order")
    p.add_argument("--p", type=lambda v: v if v == "rational" else int(v),
                   help="prime or 'rational' (default rational)")
    p.add_argument("--index", action="append", metavar="D=I",
                   help="index value i(D)=I; repeatable")

    p = sub.add_parser("check-morse", help="alternating inequality verifier")
    common(p)
    p.add_argument("--input", help="two-column CSV with header M,B")
    p.add_argument("--r-star", dest="r_star", type=int,
                   help="rank from which the sums must be equalities")

    return ap


def _namespace_to_cfg(args: argparse.Namespace) -> dict:
    command = args.command
    ns = argparse.Namespace(**vars(args))
    if hasattr(ns, "klass"):
        ns.__dict__["class"] = ns.klass
        del ns.__dict__["klass"]
    if getattr(ns, "index", None) is not None:
        pairs = {}
        for item in ns.index:
            try:
                d, v = item.split("=")
                pairs[str(int(d))] = int(v)
            except ValueError:
                raise InputError(f"bad --index entry {item!r}; expected D=I") from None
        ns.index = pairs
    return _merge_config(ns, command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    t0 = time.time()
    try:
        cfg = _namespace_to_cfg(args)
        if cfg.get("threads") is None:
            cfg["threads"] = int(os.environ.get("GEODLAB_THREADS", "1"))
        outdir = Path(cfg.get("output", "out"))
        outdir.mkdir(parents=True, exist_ok=True)
        result = _COMMANDS[command](cfg, outdir)
    except GeodLabError as exc:
        kind = ("consistency" if isinstance(exc, ConsistencyError)
                else "numeric" if isinstance(exc, NumericError)
                else "input")
        err = {"error": {"kind": kind, "message": str(exc)}}
        if isinstance(exc, ConsistencyError) and exc.report:
            err["error"]["report"] = exc.report
        print(dumps17(err), end="")
        try:
            _write_json(Path(cfg.get("output", "out")) / "error.json", err)
        except Exception:
            pass
        return {"input": 2, "numeric": 3, "consistency": 4}[kind]
    except (OSError, json.JSONDecodeError) as exc:
        print(dumps17({"error": {"kind": "input", "message": str(exc)}}), end="")
        return 2

    manifest = {
        "command": command,
        "config": cfg,
        "versions": {
            "geodlab": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "seed": cfg.get("seed", 0),
        "wall_time_s": time.time() - t0,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _write_json(outdir / "manifest.json", manifest)
    print(dumps17(result), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
