"""Command-line entry point wiring all modules together.

Every output embeds a run manifest (command, arguments, seed, version,
input digests, timestamp).  Outputs are deterministic: identical manifests
produce identical bytes, Monte Carlo subcommands included, because all
randomness is derived from the seed.  Set SOURCE_DATE_EPOCH to pin the
manifest timestamp.

Exit codes: 0 success, 1 domain error (JSON error body), 2 resource limit,
3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from fractions import Fraction

from . import __version__, backends
from .ahk import (
    check_equivariance,
    estimate_marginal,
    exact_marginal,
    exchangeability_test,
    model_from_json,
    modularity_bound_test,
    projectivity_test,
    sample_world,
)
from .bounds import (
    BoundSpec,
    empirical_deviation,
    search_realizer,
    tail_bound,
    union_bound,
)
from .core import (
    BudgetExceededError,
    InvalidArgumentError,
    ProjrelError,
    Signature,
    World,
    enumerate_cells,
    enumerate_worlds,
    load_json,
)
from .extend import build_polytope, check_extendable, modularity_check, scatter_data
from .rng import substream
from .stats import (
    UNDIRECTED_K3_CLASS_NAMES,
    WorldletDistribution,
    fenstad,
    frequency_ordered,
    frequency_unordered,
    is_exchangeable,
    marginalize,
    table1_rows,
    undirected_k3_worlds,
)

ENV_PREFIX = "PROJREL_"


def _env_default(name: str, fallback=None, cast=int):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return fallback
    return cast(raw)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def make_manifest(args: argparse.Namespace, inputs: list[str]) -> dict:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = int(epoch) if epoch is not None else int(time.time())
    return {
        "command": args.command,
        "argv": sys.argv[1:],
        "seed": args.seed,
        "version": __version__,
        "inputs": {p: _sha256(p) for p in inputs},
        "timestamp": ts,
    }


def _emit(payload: dict, out: str | None):
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_signature(args) -> Signature:
    if getattr(args, "signature", None):
        return Signature.from_json(load_json(args.signature))
    return Signature.single_binary()


def _load_world(path: str, signature: Signature | None) -> World:
    obj = load_json(path)
    if "signature" in obj or signature is not None:
        return World.from_json(obj, signature)
    return World.from_json(obj, Signature.single_binary())


def _load_dist(path: str) -> WorldletDistribution:
    return WorldletDistribution.from_json(load_json(path))


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_enum_worlds(args):
    sig = _load_signature(args)
    manifest = make_manifest(args, [args.signature] if args.signature else [])
    lines = [json.dumps({"manifest": manifest})]
    for w in enumerate_worlds(sig, args.n, args.convention, budget=args.budget_worlds):
        lines.append(json.dumps({"world": w.to_json()}))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_cells(args):
    sig = _load_signature(args)
    manifest = make_manifest(args, [args.signature] if args.signature else [])
    cells = enumerate_cells(sig, args.m)
    _emit(
        {
            "manifest": manifest,
            "m": args.m,
            "cells": [{"id": i, "data": c.to_json()} for i, c in enumerate(cells)],
        },
        args.out,
    )
    return 0


def cmd_freq(args):
    sig = Signature.from_json(load_json(args.signature)) if args.signature else None
    w = _load_world(args.world, sig)
    fv = frequency_unordered(w, args.k) if args.unordered else frequency_ordered(w, args.k)
    manifest = make_manifest(args, [args.world] + ([args.signature] if args.signature else []))
    payload = {"manifest": manifest, "distribution": fv.to_json()}
    payload["source_n"] = fv.source_n
    payload["sampling"] = fv.sampling
    _emit(payload, args.out)
    return 0


def cmd_fenstad(args):
    Q = _load_dist(args.dist)
    out = fenstad(Q, args.k)
    _emit(
        {"manifest": make_manifest(args, [args.dist]), "distribution": out.to_json()},
        args.out,
    )
    return 0


def cmd_marginalize(args):
    Q = _load_dist(args.dist)
    out = marginalize(Q, args.m)
    _emit(
        {"manifest": make_manifest(args, [args.dist]), "distribution": out.to_json()},
        args.out,
    )
    return 0


def cmd_check_exchangeable(args):
    Q = _load_dist(args.dist)
    res = is_exchangeable(Q)
    payload = {
        "manifest": make_manifest(args, [args.dist]),
        "exchangeable": res.exchangeable,
        "witness": None
        if res.witness is None
        else {
            "world_a": res.witness[0].to_json(),
            "world_b": res.witness[1].to_json(),
            "prob_a": str(Q.prob(res.witness[0])),
            "prob_b": str(Q.prob(res.witness[1])),
        },
    }
    _emit(payload, args.out)
    return 0


def cmd_check_extendable(args):
    Q = _load_dist(args.dist)
    if args.convention and args.convention != Q.convention:
        Q = WorldletDistribution.from_json(
            {**Q.to_json(), "convention": args.convention}
        )
    cert = check_extendable(
        Q, args.n, iso_average_first=args.iso_average, budget=args.budget_worlds
    )
    payload = {"manifest": make_manifest(args, [args.dist])}
    payload.update(cert.to_json())
    _emit(payload, args.out)
    return 0


def cmd_check_modularity(args):
    Q = _load_dist(args.dist)
    report = modularity_check(Q)
    payload = {"manifest": make_manifest(args, [args.dist])}
    payload.update(report.to_json())
    _emit(payload, args.out)
    return 0


def _scatter_csv(rows, manifest) -> str:
    import csv
    import io

    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(manifest) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class_id", "multiplicity", "x", "y", "x_float", "y_float"])
    for r in rows:
        cid = json.dumps(
            r.class_id.canonical.to_json()["relations"], separators=(",", ":")
        )
        writer.writerow(
            [cid, r.multiplicity, str(r.x), str(r.y), f"{float(r.x):.10g}", f"{float(r.y):.10g}"]
        )
    return buf.getvalue()


def cmd_scatter(args):
    sig = _load_signature(args)
    axes = tuple(args.axes.split(","))
    if len(axes) != 2:
        raise InvalidArgumentError("--axes needs two comma-separated coordinates")
    rows = scatter_data(sig, args.k, args.n, axes, args.convention)
    manifest = make_manifest(args, [args.signature] if args.signature else [])
    text = _scatter_csv(rows, manifest)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_ahk_sample(args):
    model = model_from_json(load_json(args.model))
    manifest = make_manifest(args, [args.model])
    lines = [json.dumps({"manifest": manifest})]
    for i in range(args.count):
        w = sample_world(model, args.n, substream(args.seed, i))
        lines.append(json.dumps({"index": i, "world": w.to_json()}))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_ahk_verify(args):
    model = model_from_json(load_json(args.model))
    checks = args.checks.split(",")
    payload: dict = {"manifest": make_manifest(args, [args.model])}
    seed = args.seed
    if "equivariance" in checks:
        eq = {}
        for m, f in sorted(model.functions.items()):
            rep = check_equivariance(
                f, m, args.trials, substream(seed, m), model.has_global_latent,
                model.signature,
            )
            eq[str(m)] = {"passed": rep.passed, "trials": rep.trials}
        payload["equivariance"] = eq
    if "projectivity" in checks:
        rep = projectivity_test(model, 2, args.n, args.samples, substream(seed, 101))
        payload["projectivity"] = {
            "passed": rep.passed,
            "coupling_failures": rep.coupling_failures,
            "chi2": rep.chi2,
            "pvalue": rep.pvalue,
        }
    if "exchangeability" in checks:
        rep = exchangeability_test(model, args.k, args.samples, substream(seed, 102))
        payload["exchangeability"] = {
            "passed": rep.passed,
            "classes": [
                {"size": r.class_size, "total": r.total, "pvalue": r.pvalue}
                for r in rep.classes
            ],
        }
    if "modularity" in checks:
        try:
            marg = exact_marginal(model, 2)
            support = [(w, float(p)) for w, p in marg.items()]
        except InvalidArgumentError:
            est = estimate_marginal(model, 2, args.samples, substream(seed, 103))
            support = [(w, c / est.samples) for w, c in est.items()]
        rows = []
        for w, p in support:
            if p <= 0:
                continue
            rep = modularity_bound_test(model, w, args.samples, substream(seed, 104))
            rows.append(
                {
                    "world": w.to_json(),
                    "p_hat": rep.p_hat,
                    "q_hat": rep.q_hat,
                    "passed": rep.passed,
                    "inconclusive": rep.inconclusive,
                }
            )
        payload["modularity"] = {
            "rows": rows,
            "passed": all(r["passed"] for r in rows),
        }
    _emit(payload, args.out)
    return 0


def cmd_bound(args):
    spec = BoundSpec(args.n, args.k, Fraction(args.t))
    worldlets = args.worldlets or (1 << (args.k * args.k))
    ub = union_bound(spec, worldlets)
    _emit(
        {
            "manifest": make_manifest(args, []),
            "tail_bound": tail_bound(spec),
            "union_bound": ub.value,
            "n_worldlets": worldlets,
            "min_n_below_one": ub.min_n_below_one,
        },
        args.out,
    )
    return 0


def cmd_deviation(args):
    model = model_from_json(load_json(args.model))
    report = empirical_deviation(
        model, args.k, args.n, args.samples, args.seed, Fraction(args.t)
    )
    payload = {"manifest": make_manifest(args, [args.model])}
    payload.update(report.to_json())
    _emit(payload, args.out)
    return 0


def cmd_search_realizer(args):
    Q = _load_dist(args.dist)
    res = search_realizer(
        Q, args.n, mode=args.mode, seed=args.seed, budget=args.budget_worlds
    )
    payload = {"manifest": make_manifest(args, [args.dist])}
    payload.update(res.to_json())
    _emit(payload, args.out)
    return 0


def _classify_row(Q, polytopes, realizer_ns):
    report = modularity_check(Q)
    extendable = {}
    for n, poly in polytopes.items():
        cert = check_extendable(Q, n, polytope=poly)
        extendable[str(n)] = cert.feasible
    realizer = {}
    for n in realizer_ns:
        res = search_realizer(Q, n, mode="exhaustive")
        realizer[str(n)] = str(res.max_deviation)
    return {
        "modularity_violations": len(report.violations),
        "extendable": extendable,
        "realizer_deviation": realizer,
    }


def build_table1(classify: bool = True) -> dict:
    """The four running-example rows with per-world class probabilities and
    (optionally) their extendability / realizer / modularity classification."""
    sig = Signature.single_binary()
    rows = table1_rows(sig)
    groups = undirected_k3_worlds(sig)
    polytopes = {n: build_polytope(sig, 3, n) for n in (4, 5)} if classify else {}
    out = []
    for name, Q in rows.items():
        classes = []
        for cname in UNDIRECTED_K3_CLASS_NAMES:
            members = groups[cname]
            classes.append(
                {
                    "class": cname,
                    "size": len(members),
                    "per_world_prob": str(Q.prob(members[0])),
                }
            )
        row = {"name": name, "distribution": Q.to_json(), "classes": classes}
        if classify:
            row["classification"] = _classify_row(Q, polytopes, (4, 5))
        out.append(row)
    return {"rows": out}


def cmd_table1(args):
    payload = {"manifest": make_manifest(args, [])}
    payload.update(build_table1(classify=not args.no_classify))
    _emit(payload, args.out)
    return 0


def cmd_figure2(args):
    os.makedirs(args.out_dir, exist_ok=True)
    sig = Signature.single_binary()
    manifest = make_manifest(args, [])
    rows_plus = table1_rows(sig)["plus"]
    verdicts = {}
    for n in (3, 4, 5, 6):
        poly = build_polytope(sig, 3, n)
        rows = scatter_data(sig, 3, n, ("single_edge", "two_edge"), "undirected", poly)
        path = os.path.join(args.out_dir, f"scatter_n{n}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_scatter_csv(rows, manifest))
        cert = check_extendable(rows_plus, n, polytope=poly)
        verdicts[str(n)] = cert.feasible
    with open(os.path.join(args.out_dir, "verdicts.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {"manifest": manifest, "plus_extendable": verdicts}, fh, indent=2
        )
        fh.write("\n")
    sys.stdout.write(json.dumps({"out_dir": args.out_dir, "plus_extendable": verdicts}) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_global_flags(p: argparse.ArgumentParser, suppress: bool):
    # the same flags exist on the root parser and on every subcommand, so
    # they can be given in either position; subcommand values win
    d = argparse.SUPPRESS if suppress else None
    p.add_argument(
        "--seed", type=int, default=d if suppress else _env_default("SEED", 0)
    )
    p.add_argument(
        "--threads", type=int, default=d if suppress else _env_default("THREADS")
    )
    p.add_argument(
        "--budget-worlds",
        type=int,
        default=d if suppress else _env_default("BUDGET_WORLDS"),
    )
    p.add_argument(
        "--budget-perms",
        type=int,
        default=d if suppress else _env_default("BUDGET_PERMS"),
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="projrel",
        description="Exact worldlet statistics, extendability certificates, "
        "and latent-variable samplers for projective relational models.",
    )
    _add_global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(handler=fn)
        _add_global_flags(p, suppress=True)
        p.add_argument("--out", default=None)
        return p

    p = add("enum-worlds", cmd_enum_worlds, help="stream all worlds of one size")
    p.add_argument("--signature", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--convention", choices=["directed", "undirected"], default="directed")

    p = add("cells", cmd_cells, help="catalog the arity-m cell value space")
    p.add_argument("--signature", default=None)
    p.add_argument("--m", type=int, required=True)

    p = add("freq", cmd_freq, help="worldlet frequency vector of one world")
    p.add_argument("--world", required=True)
    p.add_argument("--signature", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--unordered", action="store_true")

    p = add("fenstad", cmd_fenstad, help="two-step sampling through a distribution")
    p.add_argument("--dist", required=True)
    p.add_argument("--k", type=int, required=True)

    p = add("marginalize", cmd_marginalize, help="restrict a distribution to [m]")
    p.add_argument("--dist", required=True)
    p.add_argument("--m", type=int, required=True)

    p = add("check-exchangeable", cmd_check_exchangeable, help="isomorphism invariance")
    p.add_argument("--dist", required=True)

    p = add("check-extendable", cmd_check_extendable, help="polytope membership certificate")
    p.add_argument("--dist", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--iso-average", action="store_true")
    p.add_argument("--convention", choices=["directed", "undirected"], default=None)

    p = add("check-modularity", cmd_check_modularity, help="two-overlap necessary condition")
    p.add_argument("--dist", required=True)

    p = add("scatter", cmd_scatter, help="frequency-vector scatter data (CSV)")
    p.add_argument("--signature", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--axes", default="single_edge,two_edge")
    p.add_argument("--convention", choices=["directed", "undirected"], default="undirected")

    p = add("ahk-sample", cmd_ahk_sample, help="sample worlds from a model (JSONL)")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)

    p = add("ahk-verify", cmd_ahk_verify, help="equivariance/projectivity/exchangeability/modularity checks")
    p.add_argument("--model", required=True)
    p.add_argument("--checks", default="equivariance,projectivity,exchangeability,modularity")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--k", type=int, default=2)

    p = add("bound", cmd_bound, help="deviation tail bound and union bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", required=True)
    p.add_argument("--worldlets", type=int, default=None)

    p = add("deviation", cmd_deviation, help="empirical subsample-frequency deviations")
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--t", default="1/10")

    p = add("search-realizer", cmd_search_realizer, help="world approximating a distribution")
    p.add_argument("--dist", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["exhaustive", "local"], default="exhaustive")

    p = add("table1", cmd_table1, help="the four running-example rows with classification")
    p.add_argument("--no-classify", action="store_true")

    p = sub.add_parser("figure2", help="scatter CSVs for n=3..6 plus membership verdicts")
    p.set_defaults(handler=cmd_figure2)
    _add_global_flags(p, suppress=True)
    p.add_argument("--out-dir", required=True)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads:
        backends.set_num_threads(args.threads)
    if args.budget_perms:
        from . import core

        core.DEFAULT_PERM_BUDGET = args.budget_perms
    if args.budget_worlds is None:
        from .core import DEFAULT_WORLD_BUDGET

        args.budget_worlds = DEFAULT_WORLD_BUDGET
    try:
        return args.handler(args)
    except BudgetExceededError as exc:
        _emit({"error": {"type": "resource-limit", "message": str(exc)}}, None)
        return 2
    except (InvalidArgumentError, ProjrelError) as exc:
        _emit({"error": {"type": "domain", "message": str(exc)}}, None)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        _emit({"error": {"type": "io", "message": str(exc)}}, None)
        return 3


if __name__ == "__main__":
    sys.exit(main())
