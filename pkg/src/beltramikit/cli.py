"""Command-line interface.

Subcommands ``analyze``, ``laminate``, ``solve`` and ``verify`` print a JSON
(or CSV) result on stdout. With ``--out DIR`` they also write their data
files and a ``manifest.json`` into ``DIR``; ``replay`` re-runs a manifest and
reproduces those files byte for byte.

Exit codes: 0 success, 2 bad input, 3 domain or ellipticity error,
4 internal invariant failure, 5 solver failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, fieldlab, laminate, milton
from .ellipticity import ellipticity_report, p_exponent
from .errors import (
    BudgetExhausted,
    DomainError,
    InvariantViolation,
    NumericalError,
    SolverFailure,
)
from .kmin import (
    TwoPhase,
    classify_critical,
    kmin_explicit,
    kmin_normalized,
    kmin_numeric_oracle,
)
from .sampling import random_pairs

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN, EXIT_INVARIANT, EXIT_SOLVER = 0, 2, 3, 4, 5
MANIFEST = "manifest.json"
ORACLE_TOL = 1e-6
ROUTE_TOL = 1e-10


class InputError(Exception):
    """Malformed command-line or file input."""


# --- value helpers ---------------------------------------------------------


def _num(x) -> float:
    if isinstance(x, bool):
        raise InputError(f"expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(x.strip())
        except ValueError:
            raise InputError(f"not a decimal number: {x!r}") from None
    raise InputError(f"expected a number, got {x!r}")


def parse_matrix(obj) -> np.ndarray:
    """A 2x2 matrix from nested lists, four flat entries, or ``"a,b,c,d"``."""
    if isinstance(obj, str):
        obj = [s for s in obj.replace(";", ",").split(",") if s.strip()]
    try:
        flat = [_num(x) for row in obj for x in (row if isinstance(row, list) else [row])]
    except TypeError:
        raise InputError(f"cannot read a 2x2 matrix from {obj!r}") from None
    if len(flat) != 4:
        raise InputError(f"a 2x2 matrix needs 4 entries, got {len(flat)}")
    m = np.array(flat).reshape(2, 2)
    if not np.all(np.isfinite(m)):
        raise InputError("matrix entries must be finite")
    return m


def jsonable(x):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(x, "value") and isinstance(x.value, str):
        return x.value
    return x


def dumps(doc) -> str:
    return json.dumps(jsonable(doc), indent=2) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None


def _threads() -> int:
    raw = os.environ.get("BELTRAMIKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"BELTRAMIKIT_THREADS must be an integer, got {raw!r}") from None


# --- analyze -----------------------------------------------------------------


def _pair_from(ns, doc) -> tuple[np.ndarray, np.ndarray]:
    if doc is not None:
        if not isinstance(doc, dict) or "sigma1" not in doc or "sigma2" not in doc:
            raise InputError('input must be an object with "sigma1" and "sigma2"')
        return parse_matrix(doc["sigma1"]), parse_matrix(doc["sigma2"])
    if ns.sigma1 is None or ns.sigma2 is None:
        raise InputError("give --input or both --sigma1 and --sigma2")
    return parse_matrix(ns.sigma1), parse_matrix(ns.sigma2)


def analyze_pair(s1, s2, budget: int) -> dict:
    tp = TwoPhase(s1, s2)
    rep = classify_critical(s1, s2)
    k_norm = float(kmin_normalized(tp))
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always", BudgetExhausted)
        orc = kmin_numeric_oracle(tp, budget=budget)
    km = rep.Kmin
    sym = milton.symmetrize(tp)
    return {
        "phase1": ellipticity_report(s1).to_dict(),
        "phase2": ellipticity_report(s2).to_dict(),
        "pair": rep.to_dict(),
        "kminRoutes": {
            "explicit": km,
            "normalized": k_norm,
            "oracle": orc.value,
            "oracleConverged": orc.converged,
            "oracleEvaluations": orc.evaluations,
            "normalizedAgrees": abs(k_norm - km) <= ROUTE_TOL * km,
            "oracleAgrees": abs(orc.value - km) <= ORACLE_TOL * km,
        },
        "symmetrization": {
            "A": sym.A,
            "sigma1": sym.sigma1,
            "sigma2": sym.sigma2,
            "KminAfter": kmin_explicit(sym.sigma1, sym.sigma2)[0],
        },
    }


def cmd_analyze(ns, doc) -> tuple[dict, dict[str, str]]:
    s1, s2 = _pair_from(ns, doc)
    res = analyze_pair(s1, s2, ns.budget)
    return res, {"report.json": dumps(res)}


# --- laminate ----------------------------------------------------------------


def _checkpoints(n: int) -> list[int]:
    pts = {0, n}
    k = 1
    while k < n:
        pts.add(k)
        k *= 2
    return sorted(pts)


def moment_table(lam: laminate.Laminate, K: float, n: int) -> tuple[list[float], list[list[float]]]:
    pK = p_exponent(K)
    ps = [2.0, pK - 0.5, pK - 0.2, pK]
    P = laminate.prologue_steps(K)
    curves = [laminate.chain_curves(lam, p)[0] for p in ps]
    rows = [[float(j)] + [float(c[P + j]) for c in curves] for j in _checkpoints(n)]
    return ps, rows


def cmd_laminate(ns, doc) -> tuple[dict, dict[str, str]]:
    K, n, eps = float(ns.K), int(ns.n), float(ns.eps)
    lam = laminate.staircase(K, n, eps)
    try:
        lam.validate()
    except DomainError as exc:
        raise InvariantViolation(f"staircase failed its own checks: {exc}") from exc
    w, M = lam.atoms()
    ps, rows = moment_table(lam, K, n)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["n"] + [f"M_p={float(p)!r}" for p in ps])
    for r in rows:
        wr.writerow([int(r[0])] + [_fmt(x) for x in r[1:]])
    res = {
        "K": K,
        "pK": p_exponent(K),
        "steps": n,
        "epsilon": eps,
        "prologueSteps": laminate.prologue_steps(K),
        "atoms": int(len(w)),
        "weightSum": math.fsum(w),
        "barycenter": laminate.barycenter(lam),
        "moments": {repr(float(p)): rows[-1][i + 1] for i, p in enumerate(ps)},
    }
    files = {
        "atoms.csv": lam.atoms_csv(),
        "laminate.json": lam.to_json() + "\n",
        "moments.csv": buf.getvalue(),
        "summary.json": dumps(res),
    }
    return res, files


# --- solve -------------------------------------------------------------------


def _solve_config(doc) -> dict:
    if not isinstance(doc, dict):
        raise InputError("solve needs a JSON object config via --input")
    cfg = {
        "geometry": doc.get("geometry", "checkerboard"),
        "sigma1": parse_matrix(doc.get("sigma1", [[1, 0], [0, 1]])),
        "v": [_num(x) for x in doc.get("v", [1, 0])],
        "n": [int(x) for x in doc.get("n", [32, 64])],
        "p": [_num(x) for x in doc.get("p", [2, 4])],
        "params": dict(doc.get("params", {})),
        "fields": bool(doc.get("fields", False)),
    }
    cfg["sigma2"] = parse_matrix(doc["sigma2"]) if "sigma2" in doc else cfg["sigma1"]
    if len(cfg["v"]) != 2:
        raise InputError("v must have two entries")
    if cfg["geometry"] not in ("single", *fieldlab.GEOMETRIES):
        raise InputError(f"unknown geometry {cfg['geometry']!r}")
    return cfg


def cmd_solve(ns, doc) -> tuple[dict, dict[str, str]]:
    cfg = _solve_config(doc)
    pair = TwoPhase(cfg["sigma1"], cfg["sigma2"])
    params = dict(cfg["params"])
    if cfg["geometry"] == "random":
        params.setdefault("seed", ns.seed)
    study = fieldlab.refinement_study(
        cfg["geometry"], pair, cfg["v"], cfg["n"], cfg["p"], keep=cfg["fields"], **params
    )
    res = study.to_dict()
    files = {"norms.csv": study.to_csv(), "study.json": dumps(res)}
    for sol in study.solutions:
        files[f"field_n{sol.n}.csv"] = sol.to_csv()
    return res, files


# --- verify ------------------------------------------------------------------


def _verify_one(args) -> list:
    s1, s2, budget = args
    tp = TwoPhase(s1, s2)
    km, m, n = kmin_explicit(s1, s2)
    kn = float(kmin_normalized(tp))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetExhausted)
        orc = kmin_numeric_oracle(tp, budget=budget)
    return [km, kn, orc.value, abs(kn - km) / km, abs(orc.value - km) / km, orc.converged, orc.evaluations]


def _verify_pairs(ns, doc) -> list[tuple[np.ndarray, np.ndarray]]:
    if doc is not None:
        items = doc.get("pairs") if isinstance(doc, dict) else doc
        if not isinstance(items, list):
            raise InputError('verify input must be a list of pairs or {"pairs": [...]}')
        out = []
        for it in items:
            if isinstance(it, dict):
                out.append((parse_matrix(it["sigma1"]), parse_matrix(it["sigma2"])))
            else:
                out.append((parse_matrix(it[0]), parse_matrix(it[1])))
        return out
    pr = random_pairs(np.random.default_rng(ns.seed), ns.count)
    return [(p[0], p[1]) for p in pr]


VERIFY_COLUMNS = (
    "index",
    "kmin_explicit",
    "kmin_normalized",
    "kmin_oracle",
    "rel_gap_normalized",
    "rel_gap_oracle",
    "oracle_converged",
    "oracle_evaluations",
)


def cmd_verify(ns, doc) -> tuple[dict, dict[str, str]]:
    pairs = _verify_pairs(ns, doc)
    jobs = [(s1, s2, ns.budget) for s1, s2 in pairs]
    threads = _threads()
    if threads > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_verify_one, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        rows = [_verify_one(j) for j in jobs]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(VERIFY_COLUMNS)
    for i, r in enumerate(rows):
        wr.writerow([i] + [_fmt(x) for x in r[:5]] + [int(r[5]), r[6]])
    gap_n = max((r[3] for r in rows), default=0.0)
    gap_o = max((r[4] for r in rows), default=0.0)
    res = {
        "pairs": len(rows),
        "maxRelGapNormalized": gap_n,
        "maxRelGapOracle": gap_o,
        "normalizedWithinTolerance": gap_n <= ROUTE_TOL,
        "oracleWithinTolerance": gap_o <= ORACLE_TOL,
        "unconverged": sum(1 for r in rows if not r[5]),
    }
    return res, {"verify.csv": buf.getvalue(), "summary.json": dumps(res)}


# --- schema ------------------------------------------------------------------

SCHEMA = {
    "analyze.input": {"sigma1": "[[r, r], [r, r]]", "sigma2": "[[r, r], [r, r]]", "note": "numbers or decimal strings"},
    "solve.input": {
        "geometry": "single | checkerboard | layered | random",
        "sigma1": "[[r, r], [r, r]]",
        "sigma2": "[[r, r], [r, r]] (defaults to sigma1)",
        "v": "[v1, v2] affine boundary data",
        "n": "list of cells per side, each >= 8",
        "p": "list of exponents for gradient norms",
        "params": "geometry options: tiles | normal, fraction, layers | seed, fraction, tiles",
        "fields": "bool, also write per-cell field CSVs",
    },
    "verify.input": {"pairs": "[[sigma1, sigma2], ...] or [{sigma1, sigma2}, ...]"},
    "csv": {
        "atoms.csv": list(laminate.CSV_COLUMNS),
        "moments.csv": ["n", "M_p=<p> for p in 2, pK-0.5, pK-0.2, pK"],
        "norms.csv": ["n", "Lp_<p>...", "residual", "curl_residual"],
        "field_n<N>.csv": ["x", "y", "u", "ux", "uy", "phase"],
        "verify.csv": list(VERIFY_COLUMNS),
    },
    "floats": "17 significant digits in CSV; shortest round-trip repr in JSON; infinity as \"inf\"",
    "exitCodes": {"0": "success", "2": "input", "3": "domain/ellipticity", "4": "internal invariant", "5": "solver failure"},
}


# --- driver ------------------------------------------------------------------

COMMANDS = {
    "analyze": cmd_analyze,
    "laminate": cmd_laminate,
    "solve": cmd_solve,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-i", "--input", help="JSON input file")
    common.add_argument("-o", "--out", help="directory for data files and manifest")
    common.add_argument("--seed", type=int, default=0, help="seed for random inputs (default 0)")
    common.add_argument("--budget", type=int, default=60_000, help="oracle evaluation budget")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    common.add_argument("--timings", action="store_true", help="record wall time in the manifest")

    p = argparse.ArgumentParser(prog="beltramikit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--schema", action="store_true", help="print input and output schemas and exit")
    sub = p.add_subparsers(dest="command")

    a = sub.add_parser("analyze", parents=[common], help="distortion constants of a two-phase pair")
    a.add_argument("--sigma1", help='phase 1 as "a,b,c,d" (row major)')
    a.add_argument("--sigma2", help='phase 2 as "a,b,c,d" (row major)')

    lm = sub.add_parser("laminate", parents=[common], help="staircase laminate and its moments")
    lm.add_argument("--K", type=float, default=2.0, help="cone opening (default 2)")
    lm.add_argument("-n", "--n", type=int, default=100, help="main staircase steps")
    lm.add_argument("--eps", type=float, default=0.0, help="interior shift in [0, 1)")

    sub.add_parser("solve", parents=[common], help="finite element refinement study")

    v = sub.add_parser("verify", parents=[common], help="oracle-versus-formula comparison")
    v.add_argument("--count", type=int, default=100, help="number of random pairs without --input")

    r = sub.add_parser("replay", help="re-run a manifest")
    r.add_argument("manifest")
    r.add_argument("-o", "--out", help="output directory (default: the manifest's directory)")
    return p


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _write_outputs(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8", newline="")


def _recorded_args(ns) -> list[str]:
    skip = {"command", "input", "out", "schema", "manifest", "timings"}
    argv = [ns.command]
    for k, v in sorted(vars(ns).items()):
        if k in skip or v is None:
            continue
        argv.append(f"--{k}={v}")
    return argv


def run_command(ns, doc, out: str | None) -> tuple[dict, dict[str, str]]:
    t0 = time.perf_counter()
    res, files = COMMANDS[ns.command](ns, doc)
    if out is not None:
        manifest = {
            "tool": "beltramikit",
            "version": __version__,
            "command": ns.command,
            "args": _recorded_args(ns),
            "input": doc,
            "results": res,
            "outputs": {name: _sha256(text) for name, text in sorted(files.items())},
        }
        if getattr(ns, "timings", False):
            manifest["wallTimeSeconds"] = time.perf_counter() - t0
        _write_outputs(Path(out), {**files, MANIFEST: dumps(manifest)})
    return res, files


def _replay(ns, parser) -> tuple[str, dict, dict[str, str]]:
    man = _read_json(ns.manifest)
    if not isinstance(man, dict) or man.get("tool") != "beltramikit" or "args" not in man:
        raise InputError(f"{ns.manifest} is not a beltramikit manifest")
    inner = parser.parse_args(man["args"])
    out = ns.out or str(Path(ns.manifest).parent)
    res, files = run_command(inner, man.get("input"), out)
    return inner.format, res, files


def _emit(fmt: str, res: dict, files: dict[str, str]) -> None:
    if fmt == "csv":
        csvs = [t for name, t in files.items() if name.endswith(".csv") and not name.startswith("field_")]
        if csvs:
            sys.stdout.write(csvs[0])
            return
    sys.stdout.write(dumps(res))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if ns.schema:
        sys.stdout.write(dumps(SCHEMA))
        return EXIT_OK
    if ns.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        if ns.command == "replay":
            fmt, res, files = _replay(ns, parser)
        else:
            doc = _read_json(ns.input) if ns.input else None
            res, files = run_command(ns, doc, ns.out)
            fmt = ns.format
        _emit(fmt, res, files)
        return EXIT_OK
    except InputError as exc:
        return _fail(EXIT_INPUT, "input error", exc)
    except InvariantViolation as exc:
        return _fail(EXIT_INVARIANT, "invariant violated", exc)
    except SolverFailure as exc:
        return _fail(EXIT_SOLVER, "solver failure", exc)
    except DomainError as exc:
        return _fail(EXIT_DOMAIN, type(exc).__name__, exc)
    except NumericalError as exc:
        return _fail(EXIT_INVARIANT, "numerical invariant violated", exc)


def _fail(code: int, what: str, exc: Exception) -> int:
    print(f"beltramikit: {what}: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
