"""Command-line front end.

Subcommands: decompose, spacetime, tables, examples, simulate.  Matrices
travel as JSON objects {"rows": n, "cols": m, "data": [[re, im], ...]}
(row-major); multi-matrix inputs as {"matrices": [...]} plus parameters.
Output is JSON (default) or CSV with '.' decimal, ',' separator, LF
endings and 12 significant digits.

Exit codes: 0 success, 2 parse error, 3 the requested decomposition is
infeasible, 4 numerical failure, 5 dimension or precondition problem.
Identical invocations (including --seed) produce byte-identical output.
"""

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import matcore, multicast, spacetime
from . import gtd as gtd_mod
from . import joint as joint_mod
from .errors import (
    DimensionError,
    InfeasibleError,
    JtriError,
    NumericalError,
    ParseError,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_DIMENSION = 5

TABLE_PERCENTS = (33, 37, 50, 60, 67, 75, 80, 90)


def table_fraction(percent):
    """Exact capacity fraction intended by a rounded table percentage
    (the thirds are exact: 33 -> 1/3, 67 -> 2/3)."""
    if percent == 33:
        return Fraction(1, 3)
    if percent == 67:
        return Fraction(2, 3)
    return Fraction(int(percent), 100)


def _fmt(x):
    """CSV number format: 12 significant digits."""
    return "%.12g" % x


def _load_payload(args):
    if (args.input is None) == (args.inline is None):
        raise ParseError("exactly one of --input or --inline is required")
    text = args.inline
    if args.input is not None:
        try:
            with open(args.input, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError("cannot read %s: %s" % (args.input, exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("invalid JSON: %s" % exc) from exc


def _payload_matrices(payload, minimum=1):
    if isinstance(payload, dict) and "matrices" in payload:
        mats = [matcore.matrix_from_json(m) for m in payload["matrices"]]
    elif isinstance(payload, dict) and "rows" in payload:
        mats = [matcore.matrix_from_json(payload)]
    elif isinstance(payload, list):
        mats = [matcore.matrix_from_json(m) for m in payload]
    else:
        raise ParseError("expected a matrix object or {\"matrices\": [...]}")
    if len(mats) < minimum:
        raise ParseError("need at least %d matrices" % minimum)
    return mats, payload if isinstance(payload, dict) else {}


def _emit(args, obj, csv_text=None):
    if args.format == "csv":
        if csv_text is None:
            raise ParseError("this command has no CSV form")
        data = csv_text
    else:
        data = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data)


def _mat_json(a):
    return matcore.matrix_to_json(a)


def _check_tol(args, residuals):
    """Optional --tol gate: fail the run when any residual diagnostic
    exceeds the caller's bound."""
    if args.tol is None:
        return
    worst = max(residuals.values())
    if worst > args.tol:
        raise NumericalError(
            "residual diagnostic %.3g exceeds --tol %.3g" % (worst, args.tol))


def _joint_diagnostics(mats, factors):
    recon = 0.0
    tri = 0.0
    for (u, r), a in zip(factors.users, mats):
        recon = max(recon, float(np.linalg.norm(u @ r @ factors.v.conj().T - a)
                                 / max(np.linalg.norm(a), 1e-300)))
        tri = max(tri, float(np.max(np.abs(np.tril(r, -1)))))
    diag_spread = float(max(
        np.max(np.abs(np.real(np.diag(r)) - factors.diag)) for _, r in factors.users))
    return {"recon_rel": recon, "triangularity": tri, "diag_spread": diag_spread}


def _cmd_decompose(args):
    payload_mats, payload = _payload_matrices(_load_payload(args))
    kind = args.kind
    if kind in ("gtd", "gmd", "block"):
        if len(payload_mats) != 1:
            raise ParseError("%s expects a single matrix" % kind)
        a = payload_mats[0]
        if kind == "gmd":
            fac = gtd_mod.gmd(a)
            extra = {}
        elif kind == "gtd":
            target = payload.get("target") if isinstance(payload, dict) else None
            if args.target:
                target = [float(x) for x in args.target.split(",")]
            if target is None:
                raise ParseError("gtd needs --target r1,r2,... or a 'target' field")
            fac = gtd_mod.gtd(a, target)
            extra = {}
        else:
            sizes = payload.get("block_sizes")
            dets = payload.get("block_dets")
            if args.blocks:
                sizes = [int(x) for x in args.blocks.split(",")]
            if args.dets:
                dets = [complex(x) for x in args.dets.split(",")]
            if sizes is None or dets is None:
                raise ParseError("block needs block_sizes and block_dets")
            fac = gtd_mod.block_gtd(a, gtd_mod.BlockSpec(block_sizes=sizes,
                                                         block_dets=dets))
            extra = {"boundaries": fac.boundaries}
        rec = float(np.linalg.norm(fac.u @ fac.r @ fac.v.conj().T - a)
                    / max(np.linalg.norm(a), 1e-300))
        out = {
            "kind": kind,
            "u": _mat_json(fac.u), "r": _mat_json(fac.r), "v": _mat_json(fac.v),
            "diag": [float(d) for d in fac.diag],
            "residuals": {"recon_rel": rec,
                          "triangularity": float(np.max(np.abs(np.tril(fac.r, -1))))},
        }
        out.update(extra)
        _check_tol(args, out["residuals"])
        _emit(args, out)
        return EXIT_OK
    if kind in ("jet", "kgmd"):
        mats = payload_mats
        if kind == "jet":
            factors = joint_mod.kgmd_to_kjet(mats)
        else:
            try:
                factors = joint_mod.kgmd_exact(mats)
            except joint_mod.NotConstructibleError:
                if len(mats) == 2 and mats[0].shape == (2, 2):
                    s1 = mats[0].conj().T @ mats[0] - np.eye(2)
                    s2 = mats[1].conj().T @ mats[1] - np.eye(2)
                    raise joint_mod.NotConstructibleError(
                        "exact joint unit-diagonal triangularization does not "
                        "exist: F1 = %.6g < 0" % joint_mod.f1(s1, s2)) from None
                raise
        out = {
            "kind": kind,
            "v": _mat_json(factors.v),
            "users": [{"u": _mat_json(u), "r": _mat_json(r)} for u, r in factors.users],
            "diag": [float(d) for d in factors.diag],
            "residuals": _joint_diagnostics(mats, factors),
        }
        _check_tol(args, out["residuals"])
        _emit(args, out)
        return EXIT_OK
    if kind == "upper-lower":
        if len(payload_mats) != 2:
            raise ParseError("upper-lower expects two matrices")
        a1, a2 = payload_mats
        if not joint_mod.exists_upper_lower(a1, a2):
            s1 = a1.conj().T @ a1 - np.eye(2)
            s2 = a2.conj().T @ a2 - np.eye(2)
            raise joint_mod.ConditionViolatedError(
                "mixed-orientation decomposition does not exist: F2 = %.6g < 0"
                % joint_mod.f2(s1, s2))
        v, u1, r1, u2, r2 = joint_mod.construct_upper_lower(a1, a2)
        out = {
            "kind": kind,
            "v": _mat_json(v),
            "users": [{"u": _mat_json(u1), "r": _mat_json(r1)},
                      {"u": _mat_json(u2), "r": _mat_json(r2)}],
            "residuals": {
                "recon_rel": max(
                    float(np.linalg.norm(u1 @ r1 @ v.conj().T - a1) / np.linalg.norm(a1)),
                    float(np.linalg.norm(u2 @ r2 @ v.conj().T - a2) / np.linalg.norm(a2))),
                "triangularity": max(float(abs(r1[1, 0])), float(abs(r2[0, 1]))),
            },
        }
        _check_tol(args, out["residuals"])
        _emit(args, out)
        return EXIT_OK
    raise ParseError("unknown decomposition kind %r" % kind)


def _cmd_spacetime(args):
    mats, _payload = _payload_matrices(_load_payload(args))
    if args.mode == "gmd":
        factors = spacetime.nearly_kgmd(mats, args.extensions)
        exponent = len(mats) - 1
    else:
        factors = spacetime.nearly_kjet(mats, args.extensions)
        exponent = len(mats) - 2
    n = factors.n
    kept = factors.kept_dim
    total = n * factors.n_ext
    out = {
        "mode": args.mode,
        "n": n,
        "users_count": len(factors.users),
        "extensions": factors.n_ext,
        "kept_dim": kept,
        "efficiency": kept / total,
        "min_extensions": n ** exponent,
        "kept_indices": [int(i) for i in factors.kept_indices],
        "v": _mat_json(factors.v),
        "users": [{"u": _mat_json(u), "t": _mat_json(t)} for u, t in factors.users],
        "diag": [float(d) for d in factors.diag],
    }
    _emit(args, out)
    return EXIT_OK


def _cmd_tables(args):
    n, k_users = 2, 3
    lines = ["percent,gmd_extensions,gmd_fraction,jet_extensions,jet_fraction"]
    rows = {"percent": [], "gmd": [], "jet": []}
    for pct in TABLE_PERCENTS:
        frac = table_fraction(pct)
        n_gmd = spacetime.required_extensions(frac, n, k_users, "gmd")
        n_jet = spacetime.required_extensions(frac, n, k_users, "jet")
        f_gmd = (n_gmd - (n ** (k_users - 1) - 1)) / n_gmd
        f_jet = (n_jet - (n ** (k_users - 2) - 1)) / n_jet
        lines.append("%d,%d,%s,%d,%s" % (pct, n_gmd, _fmt(f_gmd), n_jet, _fmt(f_jet)))
        rows["percent"].append(pct)
        rows["gmd"].append(n_gmd)
        rows["jet"].append(n_jet)
    csv_text = "\n".join(lines) + "\n"
    if args.format == "json":
        _emit(args, rows)
    else:
        _emit(args, None, csv_text=csv_text)
    return EXIT_OK


def _cmd_examples(args):
    name = args.name
    if name == "rateless2":
        c = args.rate
        hs = multicast.rateless_channels(2, c)
        cov = np.eye(2, dtype=complex)
        prob = multicast.MulticastProblem(users=hs, cov=cov, power=2.0)
        gs = [multicast.canonical_matrix(h, cov) for h in hs]
        factors = joint_mod.jet2(gs[0], gs[1])
        rates = multicast.scheme_rates(factors.diag)
        out = {
            "name": name, "rate": c,
            "channels": [_mat_json(h) for h in hs],
            "canonical": [_mat_json(g) for g in gs],
            "precoder": _mat_json(factors.v),
            "diag": [float(d) for d in factors.diag],
            "total_rate": rates.total_rate,
            "multicast_rate": multicast.multicast_rate(prob),
        }
    elif name == "rateless3":
        c = args.rate
        a1, a2 = multicast.rateless3_reduce(c)
        feasible = joint_mod.exists_2gmd(a1, a2)
        s1 = a1.conj().T @ a1 - np.eye(2)
        s2 = a2.conj().T @ a2 - np.eye(2)
        critical = 6.0 * np.log2((3.0 + np.sqrt(5.0)) / 2.0)
        out = {
            "name": name, "rate": c,
            "reduced_pair": [_mat_json(a1), _mat_json(a2)],
            "f1": joint_mod.f1(s1, s2),
            "feasible": bool(feasible),
            "critical_rate": critical,
        }
        if feasible:
            factors = joint_mod.construct_2gmd(a1, a2)
            out["precoder"] = _mat_json(factors.v)
            out["witness"] = _mat_json(factors.v[:, :1])
        else:
            out["note"] = "exact construction impossible above the critical rate"
    elif name == "permuted":
        gains = [float(x) for x in args.gains.split(",")] if args.gains else [1.0, 2.0]
        channels = multicast.permuted_channels(gains)
        cov = np.eye(len(gains), dtype=complex)
        prob = multicast.MulticastProblem(users=channels, cov=cov,
                                          power=float(len(gains)))
        out = {
            "name": name, "gains": gains,
            "channels": [_mat_json(h) for h in channels],
            "precoder": _mat_json(multicast.dft_precoder(len(gains))),
            "multicast_rate": multicast.multicast_rate(prob),
        }
    elif name in ("dof2", "dof3"):
        variant = "two_user" if name == "dof2" else "three_user"
        ex = multicast.dof_mismatch_example(args.rate, variant)
        out = {
            "name": name, "rate": args.rate,
            "gains": [float(g) for g in ex.gains],
            "channels": [_mat_json(h) for h in ex.problem.users],
            "canonical": [_mat_json(multicast.canonical_matrix(h, ex.problem.cov))
                          for h in ex.problem.users],
            "precoder": _mat_json(ex.precoder),
            "multicast_rate": multicast.multicast_rate(ex.problem),
        }
        if ex.t_matrices is not None:
            out["t_matrices"] = [_mat_json(t) for t in ex.t_matrices]
    else:
        raise ParseError("unknown example %r" % name)
    _emit(args, out)
    return EXIT_OK


def _cmd_simulate(args):
    payload = _load_payload(args)
    if not isinstance(payload, dict) or "users" not in payload:
        raise ParseError("simulate expects {\"users\": [...], \"cov\": ..., \"power\": ...}")
    users = [matcore.matrix_from_json(h) for h in payload["users"]]
    cov = matcore.matrix_from_json(payload["cov"]) if "cov" in payload else None
    power = float(payload.get("power", 1.0))
    if cov is None:
        n_t = users[0].shape[1]
        cov = np.eye(n_t, dtype=complex) * (power / n_t)
    problem = multicast.MulticastProblem(users=users, cov=cov, power=power)
    gs = [multicast.canonical_matrix(h, problem.cov) for h in problem.users]
    source = args.factors
    if source == "svd":
        if len(gs) != 1:
            raise ParseError("svd factors are single-user only")
        fac = matcore.svd(gs[0])
        factors = joint_mod.JointFactors(
            v=fac.v, users=[(fac.u, np.diag(fac.sigma).astype(complex))],
            diag=fac.sigma.copy())
    elif source == "gmd":
        if len(gs) != 1:
            raise ParseError("gmd factors are single-user only; use jet")
        fac = gtd_mod.gmd(gs[0])
        factors = joint_mod.JointFactors(v=fac.v, users=[(fac.u, fac.r)],
                                         diag=fac.diag)
    elif source == "jet":
        factors = joint_mod.kgmd_to_kjet(gs)
    else:
        raise ParseError("unknown factor source %r" % source)
    reports = multicast.simulate_sic(problem, factors, trials=args.trials,
                                     seed=args.seed)
    rates = multicast.scheme_rates(np.maximum(factors.diag, 1.0))

    def _num(x):
        return None if np.isinf(x) else float(x)

    streams = []
    for user_idx, r in enumerate(reports):
        for j in range(len(r.predicted_snr)):
            streams.append({
                "user": user_idx,
                "stream": j,
                "predicted_snr": _num(r.predicted_snr[j]),
                "measured_snr": _num(r.measured_snr[j]),
                "std_error": _num(r.std_error[j]),
                "rate_bits": float(np.log2(1.0 + max(r.predicted_snr[j], 0.0))),
            })
    out = {
        "seed": int(args.seed),
        "trials": int(args.trials),
        "total_rate": rates.total_rate,
        "streams": streams,
    }
    _emit(args, out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jtri",
        description="Joint unitary triangularization toolkit: single and "
                    "multi-matrix decompositions, time-extension "
                    "constructions, and multicast scheme utilities.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", help="path to a JSON input file")
            p.add_argument("--inline", help="inline JSON input")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=100000)
        p.add_argument("--tol", type=float, default=None,
                       help="report tolerance override (diagnostics only)")

    p = sub.add_parser("decompose", help="single- or multi-matrix decompositions")
    p.add_argument("--kind", required=True,
                   choices=("gtd", "gmd", "jet", "kgmd", "upper-lower", "block"))
    p.add_argument("--target", help="comma-separated diagonal for gtd")
    p.add_argument("--blocks", help="comma-separated block sizes for block")
    p.add_argument("--dets", help="comma-separated block determinants for block")
    add_io(p)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("spacetime", help="time-extension joint triangularization")
    p.add_argument("--mode", choices=("gmd", "jet"), default="gmd")
    p.add_argument("--extensions", type=int, required=True)
    add_io(p)
    p.set_defaults(func=_cmd_spacetime)

    p = sub.add_parser("tables", help="required time extensions per capacity fraction")
    add_io(p, needs_input=False)
    p.set_defaults(func=_cmd_tables)

    p = sub.add_parser("examples", help="worked channel families")
    p.add_argument("--name", required=True,
                   choices=("rateless2", "rateless3", "permuted", "dof2", "dof3"))
    p.add_argument("--rate", type=float, default=4.0)
    p.add_argument("--gains", help="comma-separated gains for permuted")
    add_io(p, needs_input=False)
    p.set_defaults(func=_cmd_examples)

    p = sub.add_parser("simulate", help="successive-cancellation link simulation")
    p.add_argument("--factors", choices=("gmd", "svd", "jet"), default="gmd")
    add_io(p)
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None):
    # single-threaded orchestration; the cap is honored trivially
    os.environ.setdefault("JTRI_THREADS", "1")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print("parse error: %s" % exc, file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL
    except DimensionError as exc:
        print("dimension error: %s" % exc, file=sys.stderr)
        return EXIT_DIMENSION
    except JtriError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
