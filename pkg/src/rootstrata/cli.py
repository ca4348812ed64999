"""Command-line interface: enumeration, classification, flows, retraction,
poset export and verification suites.  Output is deterministic for fixed
arguments and seed; exit code 0 = success, 1 = bad input, 2 = verification
failure."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import configvec as cvm
from . import flow as flowm
from . import sampling
from . import strata as stratam
from .polycore import (
    DegenerateError,
    NotHyperbolicError,
    RootConfiguration,
    gamma_normalize,
)
from .sensitivity import lemma_report, sensitivity_fd, sensitivity_matrix, transversality_jacobian


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(","))


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(","))


def _rc_from_args(args) -> RootConfiguration:
    roots = _parse_floats(args.roots)
    mults = _parse_ints(args.mults) if args.mults else (1,) * len(roots)
    return RootConfiguration(roots, mults)


def _emit(payload: dict, fmt: str):
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        _emit_text(payload)


def _emit_text(payload: dict, indent: int = 0):
    pad = "  " * indent
    for key in sorted(payload):
        val = payload[key]
        if isinstance(val, dict):
            print("%s%s:" % (pad, key))
            _emit_text(val, indent + 1)
        elif isinstance(val, list):
            print("%s%s:" % (pad, key))
            for item in val:
                if isinstance(item, dict):
                    _emit_text(item, indent + 1)
                else:
                    print("%s  %s" % (pad, item))
        else:
            print("%s%s: %s" % (pad, key, val))


def cmd_enumerate(args) -> int:
    cvs = stratam.enumerate_cvs(args.n, args.k, args.dim)
    items = []
    hist: dict[int, int] = {}
    for cv in cvs:
        rep = cvm.dimension(cv)
        hist[rep.conv_dim] = hist.get(rep.conv_dim, 0) + 1
        items.append({"cv": str(cv), "dimension": rep.to_json()})
    payload = {
        "status": "ok",
        "n": args.n,
        "k": args.k,
        "count": len(cvs),
        "dim_histogram": {str(d): c for d, c in sorted(hist.items())},
        "cvs": items,
    }
    _emit(payload, args.format)
    return 0


def cmd_classify(args) -> int:
    rc = _rc_from_args(args)
    cv = cvm.classify(rc, args.k, args.tol)
    rep = cvm.dimension(cv)
    payload = {
        "status": "ok",
        "cv": str(cv),
        "cv_json": cv.to_json(),
        "dimension": rep.to_json(),
    }
    _emit(payload, args.format)
    return 0


def _write_traj(traj, path: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(traj.to_csv())


def cmd_flow(args) -> int:
    rc = gamma_normalize(_rc_from_args(args))
    result = flowm.flow_to_boundary(rc, args.k, args.mover, args.tol)
    payload = {
        "status": "ok",
        "start_cv": str(result.start_cv),
        "sigma0": result.events[0].sigma0,
        "events": [
            {"kind": ev.kind, "participants": list(ev.participants), "sigma0": ev.sigma0}
            for ev in result.events
        ],
        "endpoint_roots": list(result.endpoint.roots),
        "endpoint_mults": list(result.endpoint.mults),
        "endpoint_cv": str(result.endpoint_cv),
    }
    if args.traj:
        path = os.path.join(args.traj, "flow_leg_1.csv")
        _write_traj(result.trajectory, path)
        payload["trajectory_csv"] = path
    _emit(payload, args.format)
    return 0


def cmd_retract(args) -> int:
    rc = gamma_normalize(_rc_from_args(args))
    policy = (
        flowm.rightmost_interior_a
        if args.policy == "rightmost"
        else flowm.leftmost_interior_a
    )
    cv0 = cvm.classify(rc, args.k, args.tol)
    chain = []
    trajs = []
    cur, cv = rc, cv0
    while cvm.dimension(cv).conv_dim > 0:
        result = flowm.flow_to_boundary(cur, args.k, policy(cv), args.tol)
        chain.append(result)
        trajs.append(result.trajectory)
        cur, cv = result.endpoint, result.endpoint_cv
    payload = {
        "status": "ok",
        "chain": [{"cv": str(cv0), "roots": list(rc.roots), "mults": list(rc.mults)}]
        + [
            {
                "cv": str(r.endpoint_cv),
                "roots": list(r.endpoint.roots),
                "mults": list(r.endpoint.mults),
                "sigma0": r.events[0].sigma0,
                "events": [
                    {"kind": ev.kind, "participants": list(ev.participants)}
                    for ev in r.events
                ],
            }
            for r in chain
        ],
    }
    if args.traj:
        paths = []
        for leg, traj in enumerate(trajs):
            path = os.path.join(args.traj, "flow_leg_%d.csv" % (leg + 1))
            _write_traj(traj, path)
            paths.append(path)
        payload["trajectory_csvs"] = paths
    _emit(payload, args.format)
    return 0


def cmd_poset(args) -> int:
    poset = stratam.build_poset(args.n, args.k)
    dot = poset.to_dot()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dot)
        payload = {
            "status": "ok",
            "nodes": len(poset.nodes),
            "edges": len(poset.edges),
            "out": args.out,
        }
        _emit(payload, args.format)
    else:
        sys.stdout.write(dot)
    return 0


def _verify_lemmas(n_max: int, samples: int, rng) -> dict:
    worst = {}
    failures = 0
    for _ in range(samples):
        n = int(rng.integers(3, n_max + 1))
        k = int(rng.integers(1, n))
        rc = sampling.random_strict(rng, n)
        for check in lemma_report(rc, k):
            worst[check.name] = max(worst.get(check.name, 0.0), check.residual)
            if not check.passed:
                failures += 1
    return {"failures": failures, "worst_residuals": worst}


def _verify_transversality(n_max: int, samples: int, rng) -> dict:
    min_margin = float("inf")
    failures = 0
    checked = 0
    for _ in range(samples):
        n = int(rng.integers(4, n_max + 1))
        k = int(rng.integers(2, n))
        rc = gamma_normalize(sampling.random_strict(rng, n))
        chain = flowm.retract(rc, k)
        for cv, point in chain[1:]:
            eqs = []
            bindings = stratam._bound_xi_flat_indices(cv)
            roots_kinds = [e.kind for e in cv.mult_entries()]
            for i, kind in enumerate(roots_kinds):
                if kind == cvm.CLASS_B:
                    eqs.append((i, k, bindings[i]))
            if not eqs:
                continue
            cert = transversality_jacobian(point, eqs)
            checked += 1
            min_margin = min(min_margin, cert.dominance_margin)
            if not cert.valid:
                failures += 1
    return {
        "failures": failures,
        "points_checked": checked,
        "min_margin": None if checked == 0 else min_margin,
    }


def _verify_flows(n_max: int, samples: int, rng) -> dict:
    failures = 0
    details = []
    max_sigma0 = 0.0
    for _ in range(samples):
        n = int(rng.integers(3, n_max + 1))
        k = int(rng.integers(2, n)) if n > 2 else 1
        rc = gamma_normalize(sampling.random_strict(rng, n))
        cv = cvm.classify(rc, k)
        dim = cvm.dimension(cv).conv_dim
        try:
            chain = flowm.retract(rc, k)
        except flowm.FlowError as exc:
            failures += 1
            details.append(str(exc))
            continue
        dims = [cvm.dimension(c).conv_dim for c, _ in chain]
        if any(b >= a for a, b in zip(dims, dims[1:])):
            failures += 1
            details.append("dimension did not strictly decrease: %s" % dims)
        if dims[-1] != 0:
            failures += 1
            details.append("retraction did not reach dimension 0")
    return {"failures": failures, "details": details[:10]}


def _verify_enumeration(n_max: int, samples: int, rng) -> dict:
    failures = 0
    unseen = []
    for n in range(2, n_max + 1):
        for k in range(1, n):
            known = {str(c) for c in stratam.enumerate_cvs(n, k)}
            for _ in range(max(1, samples // max(1, (n_max - 1) ** 2))):
                rc = sampling.random_config(rng, n)
                cv = cvm.classify(rc, k)
                if str(cv) not in known:
                    failures += 1
                    unseen.append({"n": n, "k": k, "cv": str(cv)})
    return {"failures": failures, "unseen": unseen[:10]}


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    suites = {
        "lemmas": _verify_lemmas,
        "transversality": _verify_transversality,
        "flows": _verify_flows,
        "enumeration": _verify_enumeration,
    }
    report = suites[args.suite](args.n_max, args.samples, rng)
    ok = report["failures"] == 0
    payload = {
        "status": "ok" if ok else "verification-failed",
        "suite": args.suite,
        "seed": args.seed,
        "report": report,
    }
    _emit(payload, args.format)
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rootstrata",
        description="Stratification of hyperbolic polynomials by the "
        "arrangement of the roots of P and P^(k).",
    )
    parser.add_argument("--format", choices=("json", "text"), default="json")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=cvm.DEFAULT_CLASSIFY_TOL)
    # The same flags are accepted after the subcommand; SUPPRESS keeps the
    # subparser from clobbering a value given before it.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="list admissible CVs for (n, k)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--dim", type=int, default=None)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("classify", parents=[common], help="CV of a root configuration")
    p.add_argument("--roots", required=True)
    p.add_argument("--mults", default=None)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("flow", parents=[common], help="single flow to the stratum boundary")
    p.add_argument("--roots", required=True)
    p.add_argument("--mults", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mover", type=int, required=True)
    p.add_argument("--traj", default=None)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("retract", parents=[common], help="retract down to the dim-0 stratum")
    p.add_argument("--roots", required=True)
    p.add_argument("--mults", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--policy", choices=("leftmost", "rightmost"), default="leftmost")
    p.add_argument("--traj", default=None)
    p.set_defaults(func=cmd_retract)

    p = sub.add_parser("poset", parents=[common], help="stratum poset as DOT")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_poset)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument(
        "--suite",
        choices=("lemmas", "transversality", "flows", "enumeration"),
        required=True,
    )
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ValueError,
        KeyError,
        NotHyperbolicError,
        DegenerateError,
        cvm.AmbiguousCoincidenceError,
        flowm.FlowError,
    ) as exc:
        print(json.dumps({"status": "error", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
