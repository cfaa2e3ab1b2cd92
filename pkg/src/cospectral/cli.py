"""Command-line entry point: ``cospectral <command> --config cfg.json``.

Every run writes a JSON envelope (config echo, build id, wall time, status,
payload, errors).  With ``--format csv`` the command's table goes to
``--out`` and the envelope to ``<out>.envelope.json``.  Exit codes: 0
success, 1 validation error (or a failed ``verify``), 2 computational
non-convergence; artifacts are written in every case.
"""

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from importlib import resources

import numpy as np

from . import battery, finrel
from .config import COMMANDS, build_group, build_nu, build_subgroup, load_config, validate
from .environments import monotone_coupled_envs, u_infinity_rate
from .errors import ComputationError, CospectralError, ValidationError
from .groups import FreeAbelianGroup, FreeGroup
from .spectral import (
    interval_folner_sets,
    mean_ergodic_average,
    norm_sweep,
    radial_oracle_free,
    rotation_average_bound,
    rotation_matrix,
)
from .walks import (
    PercolationTarget,
    SmallPiecesTarget,
    SubgroupTarget,
    coupled_series,
    default_window,
    fit_decay,
    sample_return_series,
)

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION = 0, 1, 2


def build_id():
    """Content hash of the installed package sources (12 hex digits)."""
    h = hashlib.sha1()
    root = resources.files("cospectral")
    stack = [root]
    files = []
    while stack:
        d = stack.pop()
        for entry in d.iterdir():
            if entry.is_dir():
                if entry.name != "__pycache__":
                    stack.append(entry)
            elif entry.name.endswith((".py", ".json")):
                files.append(entry)
    for f in sorted(files, key=lambda e: str(e)):
        h.update(str(f.name).encode())
        h.update(f.read_bytes())
    return h.hexdigest()[:12]


def _error(e):
    return {"type": type(e).__name__, "message": str(e)}


def _table(rows, columns):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({c: repr(v) if isinstance(v, float) else v for c, v in row.items()})
    return buf.getvalue()


class Outcome:
    """What a command produced: payload, CSV table, exit code and any errors."""

    def __init__(self, payload, table="", code=EXIT_OK, errors=()):
        self.payload = payload
        self.table = table
        self.code = code
        self.errors = list(errors)


def _fit(k, p, window, model, seed=None):
    try:
        return fit_decay(k, p, window, model, seed).to_dict(), None
    except ValidationError as e:
        return None, e


def cmd_walk_radius(cfg, workers):
    group = build_group(cfg["group"])
    sub = build_subgroup(group, cfg.get("subgroup"))
    nu = build_nu(group, cfg.get("nu"), cfg.get("lazy", False))
    window = tuple(cfg["window"]) if "window" in cfg else None
    model = cfg.get("model", "loglinear-polycorrected")
    series = sample_return_series(group, SubgroupTarget(sub), nu, cfg["K"], cfg["N"], cfg["seed"], workers)
    est, err = _fit(series.k, series.p_hat, window, model, cfg["seed"])
    payload = {"series": series.to_dict(), "estimate": est}
    if err:
        return Outcome(payload, series.to_csv(), EXIT_COMPUTATION, [err])
    return Outcome(payload, series.to_csv())


def cmd_spectral_radius(cfg, workers):
    group = build_group(cfg["group"])
    sub = build_subgroup(group, cfg.get("subgroup"))
    nu = build_nu(group, cfg.get("nu"), cfg.get("lazy", False))
    sweep = norm_sweep(
        group,
        sub,
        nu,
        cfg["radii"],
        max_states=cfg.get("max_states", 5_000_000),
        tol=cfg.get("tol", 1e-12),
        max_iter=cfg.get("max_iter", 100_000),
    )
    rows = list(sweep.rows())
    payload = {"sweep": rows, "complete": sweep.complete, "converged": sweep.converged}
    errors = []
    if not sweep.complete:
        errors.append({"type": "BallTooLarge", "message": sweep.message})
    if not sweep.converged:
        errors.append({"type": "NoConvergence", "message": "power iteration hit max_iter"})
    if "edge_list" in cfg and sweep.operator is not None:
        with open(cfg["edge_list"], "w") as fh:
            fh.write(sweep.operator.to_edge_csv())
    table = _table(rows, ["radius", "states", "value", "iterations", "residual", "converged"])
    return Outcome(payload, table, EXIT_COMPUTATION if errors else EXIT_OK, errors)


def cmd_finrel(cfg, workers):
    n = cfg["n"]
    R = finrel.build_relation_from_permutations(n, cfg["R_perms"])
    if "S_perms" in cfg:
        S = finrel.build_relation_from_permutations(n, cfg["S_perms"])
    elif "S_classes" in cfg:
        S = finrel.FiniteRelation.from_classes(n, cfg["S_classes"])
    else:
        S = finrel.FiniteRelation.trivial(n)
    if "nu" in cfg:
        nu = [(finrel.FullGroupElement(a["perm"], R), a["prob"]) for a in cfg["nu"]]
    else:
        nu = finrel.uniform_generator_nu(cfg["R_perms"])
    fiber = finrel.fiber_space(R, S)
    E = cfg.get("E", list(range(n)))
    K = cfg.get("K", 20)
    op = finrel.lambda_nu_matrix(fiber, nu)
    mt = finrel.mass_transport_check(R, finrel.random_transport_function(R, np.random.default_rng(cfg["seed"])))
    note = None
    try:
        projection = finrel.fiber_projection(fiber, E)
    except ValidationError as e:
        # zeta_E is still defined; only the compression by 1_E needs saturation
        projection, note = None, str(e)
    series = finrel.restricted_norm_series(op, finrel.zeta_E(fiber, E), K, fiber.weight, projection)
    wit = finrel.tfae_witnesses(fiber, nu, cfg.get("tol", 1e-3), cfg.get("budget", 10_000))
    payload = {
        "R_classes": R.classes,
        "S_classes": S.classes,
        "ergodic_components": finrel.ergodic_components(R),
        "fiber": {
            "pairs": fiber.size,
            "total_weight": str(fiber.total_weight),
            "fiber_sizes": fiber.fiber_sizes(),
        },
        "mass_transport": {"lhs": mt.lhs, "rhs": mt.rhs, "mode": mt.mode},
        "norm_series": [float(x) for x in series.s],
        "moments": [float(x) for x in series.moments],
        "restricted_norm": series.restricted_norm,
        "restricted_norm_note": note,
        "trace_identity_gap": finrel.trace_identity_gap(R, S, nu, K),
        "witnesses": wit.to_dict(),
    }
    rows = [{"k": k + 1, "s_k": float(s), "moment": float(m)} for k, (s, m) in enumerate(zip(series.s, series.moments))]
    return Outcome(payload, _table(rows, ["k", "s_k", "moment"]))


def cmd_percolate(cfg, workers):
    group = build_group(cfg.get("group", {"family": "free", "rank": 2}))
    nu = build_nu(group, cfg.get("nu"), cfg.get("lazy", False))
    levels = cfg["p_levels"]
    monotone_coupled_envs(group, levels, cfg["seed"])  # rejects unsorted levels
    K, N, seed = cfg["K"], cfg["N"], cfg["seed"]
    W = cfg.get("window", 2 * K * nu.max_atom_length())
    uw = cfg.get("uinf_window", max(W, 1))
    model = cfg.get("model", "loglinear-polycorrected")
    series = coupled_series(group, [PercolationTarget(p, W) for p in levels], nu, K, N, seed, workers)
    levels_out, rows, errors = [], [], []
    for p, s in zip(levels, series):
        rate = u_infinity_rate(group, p, uw, N, seed)
        lower, e1 = _fit(s.k, s.p_hat, None, model, seed)
        upper, e2 = _fit(s.k, s.p_hat_upper, None, model, seed)
        errors += [{"p": p, **_error(e)} for e in (e1, e2) if e]
        levels_out.append({
            "p": p,
            "hits_lower": s.hits.tolist(),
            "hits_upper": s.hits_upper.tolist(),
            "samples": s.samples,
            "uinf_proxy_rate": rate,
            "fit_lower": lower,
            "fit_upper": upper,
        })
        for j in range(s.K):
            rows.append({
                "p": p,
                "k": int(s.k[j]),
                "hits_lower": int(s.hits[j]),
                "hits_upper": int(s.hits_upper[j]),
                "samples": s.samples,
                "uinf_proxy_rate": rate,
            })
    payload = {
        "window": W,
        "uinf_window": uw,
        "levels": levels_out,
        "note": "brackets only; no finite-volume certificate of the radius on the infinite clusters",
    }
    table = _table(rows, ["p", "k", "hits_lower", "hits_upper", "samples", "uinf_proxy_rate"])
    return Outcome(payload, table, EXIT_OK, errors)


def cmd_smallpieces(cfg, workers):
    rank = cfg.get("rank", 2)
    group = FreeGroup(rank)
    lazy = cfg.get("lazy", False)
    nu = build_nu(group, None, lazy)
    p, K, N, seed = cfg.get("p", 0.5), cfg["K"], cfg["N"], cfg["seed"]
    window = tuple(cfg["window"]) if "window" in cfg else default_window(K)
    model = cfg.get("model", "loglinear-polycorrected")
    on_e, off_e = coupled_series(
        group, [SmallPiecesTarget(p, "E"), SmallPiecesTarget(p, "Ec")], nu, K, N, seed, workers
    )
    oracle = radial_oracle_free(rank, K, max(2 * K, 10_000), lazy)
    payload, rows, errors = {"oracle_norm": oracle.eigen_bound}, [], []
    for label, s in (("E", on_e), ("Ec", off_e)):
        est, err = _fit(s.k, s.p_hat, window, model, seed)
        if err:
            errors.append({"condition": label, **_error(err)})
        payload[label] = {"series": s.to_dict(), "estimate": est}
        rows += [{"condition": label, **r} for r in s.rows()]
    table = _table(rows, ["condition", "k", "hits", "samples", "p_hat", "ci_lo", "ci_hi"])
    return Outcome(payload, table, EXIT_COMPUTATION if errors else EXIT_OK, errors)


def cmd_mean_ergodic(cfg, workers):
    if "angle" in cfg:
        matrices = [rotation_matrix(cfg["angle"])]
    elif "matrices" in cfg:
        matrices = [np.array(m, dtype=float) for m in cfg["matrices"]]
    else:
        raise ValidationError("config needs either 'angle' or 'matrices'")
    group = FreeAbelianGroup(len(matrices))
    if "folner_sets" in cfg:
        sets = [[tuple(w) for w in F] for F in cfg["folner_sets"]]
    elif len(matrices) == 1:
        sets = interval_folner_sets(cfg.get("n_max", 100))
    else:
        raise ValidationError("interval Folner sets need a single generator; give 'folner_sets'")
    res = mean_ergodic_average(group, matrices, np.array(cfg["xi"], dtype=float), sets)
    rows = []
    for F, norm, dev in zip(sets, res.norms, res.deviations):
        row = {"n": len(F), "norm": norm, "deviation": dev}
        if "angle" in cfg:
            row["bound"] = rotation_average_bound(cfg["angle"], len(F))
        rows.append(row)
    payload = {"projection": res.projection.tolist(), "averages": rows}
    return Outcome(payload, _table(rows, ["n", "norm", "deviation", "bound"]))


def cmd_verify(cfg, workers):
    def report(r):
        print(r.line(), file=sys.stderr, flush=True)

    results = battery.run_battery(cfg.get("criteria"), cfg["seed"], workers, report)
    rows = [r.to_dict() for r in results]
    ok = all(r.passed for r in results)
    table = _table(rows, ["name", "title", "passed", "seconds"])
    return Outcome({"criteria": rows, "all_passed": ok}, table, EXIT_OK if ok else EXIT_VALIDATION)


HANDLERS = {
    "walk-radius": cmd_walk_radius,
    "spectral-radius": cmd_spectral_radius,
    "finrel": cmd_finrel,
    "percolate": cmd_percolate,
    "smallpieces": cmd_smallpieces,
    "mean-ergodic": cmd_mean_ergodic,
    "verify": cmd_verify,
}

DEFAULT_VERIFY = {"seed": 0}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def run(command, config_path=None, out=None, fmt="json", workers=1, timing=True):
    """Run one command end to end; returns the exit code."""
    t0 = time.perf_counter()
    config, outcome = None, None
    status_errors = []
    try:
        if config_path is None:
            if command != "verify":
                raise ValidationError(f"{command} needs --config")
            config = validate(command, dict(DEFAULT_VERIFY))
        else:
            config = load_config(command, config_path)
        outcome = HANDLERS[command](config, workers)
        code = outcome.code
    except ValidationError as e:
        code, status_errors = EXIT_VALIDATION, [_error(e)]
    except ComputationError as e:
        code, status_errors = EXIT_COMPUTATION, [_error(e)]
    errors = status_errors + (outcome.errors if outcome else [])
    errors = [e if isinstance(e, dict) else _error(e) for e in errors]
    status = {EXIT_OK: "ok", EXIT_VALIDATION: "error", EXIT_COMPUTATION: "nonconvergent"}[code]
    if command == "verify" and outcome is not None and code == EXIT_VALIDATION:
        status = "failed"
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "build_id": build_id(),
        "config": config,
        "wall_time": round(time.perf_counter() - t0, 3) if timing else None,
        "status": status,
        "payload": outcome.payload if outcome else None,
        "errors": errors,
    }
    text = json.dumps(_jsonable(envelope), indent=2, sort_keys=True) + "\n"
    table = outcome.table if outcome else ""
    if fmt == "csv":
        if out:
            with open(out, "w") as fh:
                fh.write(table)
            with open(out + ".envelope.json", "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(table)
    elif out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for e in errors:
        print(f"error: {e['message']}", file=sys.stderr)
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(prog="cospectral", description="Cospectral radius experiments.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file (optional for verify)")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--no-timing", action="store_true", help="omit wall time so output is byte-stable")
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return run(args.command, args.config, args.out, args.format, args.workers, not args.no_timing)
    except CospectralError as e:  # pragma: no cover - run() already maps these
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
