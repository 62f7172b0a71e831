"""Command line driver.

Exit codes: 0 success, 2 input error, 3 guard violation, 4 failed check.
Every summary carries the resolved configuration under ``"config"``; feeding
a summary back through ``--config`` reproduces the run byte for byte.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import chaos, charlier as charlier_mod, partitions as parts
from .applications import fixed_kernel, ou, rgg
from .errors import GuardViolation, InputError
from .io import atomic_write, csv_text, dumps
from .measure import kernels_from_dict
from .sampling import (
    SampleConfig,
    charlier_sums,
    eval_ustat,
    eval_wi_pathwise,
    iter_batches,
    k_statistics,
    tail_check,
    within_se,
)

EXIT_OK, EXIT_INPUT, EXIT_GUARD, EXIT_CHECK = 0, 2, 3, 4
DEFAULT_Z = (0.5, 1.0, 1.5, 2.0)
SE_MULT = 5.0


class Outcome:
    """What a subcommand produced: a summary, an optional table and a verdict."""

    def __init__(self, summary: dict, table: tuple[list[str], list] | None = None, ok: bool = True):
        self.summary = summary
        self.table = table
        self.ok = ok


# --- helpers ----------------------------------------------------------------

def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    # a previous summary can be replayed directly
    if "config" in doc and "command" in doc:
        doc = doc["config"]
    return doc


def _resolve(args, doc: dict, key: str, default):
    """Command line value if given, else config value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return doc.get(key, default)


def _values_table(values: np.ndarray) -> tuple[list[str], list]:
    return ["replica_index", "value"], [(i, float(v)) for i, v in enumerate(values)]


def _kstats_checked(values: np.ndarray, exact: Sequence[float | None]) -> tuple[dict, bool]:
    ks = k_statistics(values)
    rows = []
    ok = True
    for m, (k, se, ref) in enumerate(zip(ks.k, ks.se, exact), start=1):
        row = {"order": m, "k": k, "se": se}
        if ref is not None:
            row["exact"] = ref
            row["within_5se"] = within_se(k, se, ref, SE_MULT)
            ok &= row["within_5se"]
        rows.append(row)
    return {"n": ks.n, "se_method": ks.method, "rows": rows}, ok


def _map_replicas(fn: Callable, config, seed: int, replicas: int, workers: int) -> np.ndarray:
    if workers <= 1 or replicas < 2 * workers:
        return fn(config, seed, replicas)
    # replicas are seeded by index, so any split gives the same values
    bounds = np.linspace(0, replicas, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_replica_range, fn, config, seed, int(a), int(b))
                   for a, b in zip(bounds[:-1], bounds[1:])]
        return np.concatenate([f.result() for f in futures])


def _replica_range(fn, config, seed: int, start: int, stop: int) -> np.ndarray:
    return fn(config, seed, stop - start, offset=start)


# --- partitions -------------------------------------------------------------

def cmd_partitions(args) -> Outcome:
    guard = args.guard_n
    action = args.action
    if action in ("count", "enumerate"):
        if not args.shape:
            raise InputError("--shape is required")
        shape = parts.DiagramShape.parse(args.shape)
        cls = parts.PartitionClass.parse(args.cls)
        if action == "count":
            n = parts.count_partitions(shape, cls, guard)
            return Outcome({"count": n}, (["count"], [(n,)]))
        items = parts.enumerate_partitions(shape, cls, guard)
        result = {"count": len(items), "partitions": [p.serialize() for p in items]}
        if args.diagram:
            result["diagrams"] = [p.ascii_diagram() for p in items]
        return Outcome(result, (["partition"], [(p.serialize(),) for p in items]))
    if action == "verify-bound":
        rep = parts.verify_upper_bound(args.q, args.m, guard)
        result = {"q": rep.q, "m": rep.m, "count": rep.count, "bound": rep.bound, "holds": rep.holds}
        return Outcome(result, (["q", "m", "count", "bound", "holds"],
                                [(rep.q, rep.m, rep.count, rep.bound, rep.holds)]), rep.holds)
    if action == "lower-family":
        fam = parts.lower_bound_family(args.q, args.u, args.k, guard)
        members = [p.serialize() for p in fam.partitions]
        all_in = all(parts.classify(p).member_of(parts.PartitionClass.CONNECTED_NO_SINGLETONS)
                     for p in fam.partitions)
        ok = all_in and len(set(members)) == len(members) and fam.count >= fam.formula
        result = {"q": fam.q, "u": fam.u, "k": fam.k, "count": fam.count, "formula": fam.formula,
                  "all_connected_no_singletons": all_in, "partitions": members, "holds": ok}
        return Outcome(result, (["partition"], [(s,) for s in members]), ok)
    raise InputError(f"unknown partitions action {action!r}")


def _partitions_config(args) -> dict:
    cfg = {"action": args.action, "guard_n": args.guard_n}
    if args.action in ("count", "enumerate"):
        cfg.update(shape=args.shape, cls=args.cls)
    else:
        cfg.update(q=args.q, m=args.m, u=args.u, k=args.k)
    return cfg


# --- cumulants --------------------------------------------------------------

def _element_from_doc(doc: dict, kind: str, names) -> chaos.ChaosElement:
    space, kernels = kernels_from_dict(doc)
    t = float(doc.get("t", 1.0))
    if t != 1.0:
        space = space.scaled(t)
    if names is None:
        names = list(kernels)
    elif isinstance(names, str):
        names = [names]
    missing = [n for n in names if n not in kernels]
    if missing:
        raise InputError(f"unknown kernels {missing}")
    return chaos.ChaosElement(chaos.Kind.parse(kind), tuple((kernels[n], 1.0) for n in names), space)


def cmd_cumulants(args) -> Outcome:
    doc = _load_json(args.kernels)
    kind = args.kind or doc.get("kind", "ustatistic")
    names = args.kernel or doc.get("kernel")
    element = _element_from_doc(doc, kind, names)
    report = chaos.cumulant_report(element, args.m_max, args.gamma, args.guard_n)
    return Outcome(report.to_dict(), (["order", "cumulant", "normalized"],
                                      [(m, c, z) for m, c, z in zip(report.orders, report.cumulants,
                                                                    report.normalized)]))


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args, doc: dict) -> Outcome:
    seed = int(_resolve(args, doc, "seed", 0))
    replicas = int(_resolve(args, doc, "replicas", 10000))
    kind = chaos.Kind.parse(doc.get("kind", "ustatistic"))
    names = doc.get("kernel")
    t = float(doc.get("t", 1.0))
    m_max = int(doc.get("m_max", 4))
    z_grid = [float(z) for z in doc.get("z_grid", DEFAULT_Z)]
    base_doc = {k: v for k, v in doc.items() if k in ("atoms", "kernels")}
    space, _ = kernels_from_dict(base_doc)
    element = _element_from_doc({**base_doc, "t": t}, kind.value, names)
    intensity = element.space
    cfg = SampleConfig(seed, replicas, t)
    chunks = []
    for counts in iter_batches(space, cfg):
        total = np.zeros(len(counts))
        for f in element.kernels:
            if kind is chaos.Kind.USTATISTIC:
                total += eval_ustat(counts, f)
            else:
                total += eval_wi_pathwise(counts, f, intensity)
        chunks.append(total)
    values = np.concatenate(chunks)
    exact = [chaos.cumulant(element, m, args.guard_n) for m in range(1, 5)]
    kstats, ok = _kstats_checked(values, exact)
    var = chaos.variance(element)
    gamma = float(doc.get("gamma", element.max_order - 1))
    normalized = {m: chaos.cumulant(element, m, args.guard_n) / var ** (m / 2) for m in range(2, max(m_max, 3) + 1)}
    normalized[2] = 1.0
    delta = chaos.fit_delta(normalized, gamma)
    tails = tail_check(values, var, gamma, delta, z_grid, mean=element.mean())
    summary = {
        "exact": {"mean": element.mean(), "variance": var, "cumulants": exact, "gamma": gamma, "delta": delta},
        "k_statistics": kstats,
        "tail": [r.to_dict() for r in tails],
        "holds": ok and all(r.holds for r in tails),
    }
    resolved = {**base_doc, "kind": kind.value, "kernel": names, "t": t, "m_max": m_max, "z_grid": z_grid,
                "gamma": gamma, "seed": seed, "replicas": replicas}
    return Outcome(summary, _values_table(values), summary["holds"]), resolved


# --- fixed kernel -----------------------------------------------------------

def cmd_fixed_kernel(args, doc: dict):
    seed = int(_resolve(args, doc, "seed", 0))
    replicas = int(_resolve(args, doc, "replicas", 10000))
    z_grid = [float(z) for z in doc.get("z_grid", DEFAULT_Z)]
    config = fixed_kernel.FixedKernelConfig.from_dict(doc)
    vf = fixed_kernel.v_f(config)
    tau = fixed_kernel.tau_fixed(config)
    mean = fixed_kernel.exact_mean(config)
    var = fixed_kernel.exact_variance(config)
    values = fixed_kernel.simulate(config, SampleConfig(seed, replicas, config.t))
    gamma = float(config.q - 1)
    tails = tail_check(values, var, gamma, tau, z_grid, mean=mean)
    var_lower = vf * config.t ** (2 * config.q - 1)
    kstats, ok = _kstats_checked(values, [mean, var, None, None])
    summary = {
        "v_f": vf, "tau": tau, "gamma": gamma, "exact_mean": mean, "exact_variance": var,
        "variance_lower_bound": var_lower, "variance_bound_holds": var >= var_lower * (1 - 1e-12),
        "k_statistics": kstats, "tail": [r.to_dict() for r in tails],
    }
    summary["holds"] = bool(ok and summary["variance_bound_holds"] and all(r.holds for r in tails))
    resolved = {**config.to_dict(), "z_grid": z_grid, "seed": seed, "replicas": replicas}
    return Outcome(summary, _values_table(values), summary["holds"]), resolved


# --- rgg --------------------------------------------------------------------

def _rgg_sim(config, seed, replicas, offset=0):
    out = np.empty(replicas)
    for i in range(replicas):
        rng = np.random.Generator(np.random.PCG64(rgg.derive_seed(seed, offset + i)))
        out[i] = rgg.statistic(rgg.sample_points(config, rng), config)
    return out


def cmd_rgg(args, doc: dict):
    seed = int(_resolve(args, doc, "seed", 0))
    replicas = int(_resolve(args, doc, "replicas", 1000))
    config = rgg.RggConfig.from_dict(doc)
    values = _map_replicas(_rgg_sim, config, seed, replicas, args.workers)
    kstats, _ = _kstats_checked(values, [None] * 4)
    var_est, var_se = kstats["rows"][1]["k"], kstats["rows"][1]["se"]
    check = rgg.vrgg_bound(config, var_est, var_se, SE_MULT)
    summary = {
        "tau": rgg.tau_rgg(config), "kappa_d": rgg.kappa(config.d), "p": config.p, "q": config.q,
        "k_statistics": kstats, "variance_check": check.to_dict(), "holds": check.holds,
    }
    resolved = {**config.to_dict(), "seed": seed, "replicas": replicas}
    return Outcome(summary, _values_table(values), check.holds), resolved


# --- ou ---------------------------------------------------------------------

def _ou_sim(config, seed, replicas, offset=0):
    return np.array([ou.ou_simulate(config, seed, offset + i) for i in range(replicas)])


def cmd_ou(args, doc: dict):
    seed = int(_resolve(args, doc, "seed", 0))
    replicas = int(_resolve(args, doc, "replicas", 10000))
    for key in ("rho", "T"):
        if getattr(args, key, None) is not None:
            doc = {**doc, key: getattr(args, key)}
    config = ou.OuConfig.from_dict(doc)
    tau = ou.tau_ou(config)
    var = ou.ou_variance_exact(config)
    values = _map_replicas(_ou_sim, config, seed, replicas, args.workers)
    kstats, ok = _kstats_checked(values, [config.T, var.variance, None, None])
    summary = {
        "tau": tau, "c_nu": config.c_nu, "M": config.M, "T0": config.T0,
        "exact_variance": var.to_dict(), "variance_bound_holds": var.variance >= var.lower,
        "k_statistics": kstats,
    }
    summary["holds"] = bool(ok and summary["variance_bound_holds"])
    resolved = {**config.to_dict(), "seed": seed, "replicas": replicas}
    return Outcome(summary, _values_table(values), summary["holds"]), resolved


# --- charlier ---------------------------------------------------------------

def cmd_charlier(args) -> Outcome:
    action = args.action
    if action == "poly":
        h = charlier_mod.charlier(args.q)
        return Outcome({"q": args.q, "coefficients": list(h.coefficients), "text": str(h)},
                       (["power", "coefficient"], list(enumerate(h.coefficients))))
    if action == "check":
        res = charlier_mod.chaos_identity_check(args.q, args.m, args.guard_n)
        ok = res.residual <= args.tol
        return Outcome({"q": res.q, "m": res.m, "series": res.series, "partition_sum": res.partition_sum,
                        "residual": res.residual, "tol": args.tol, "holds": ok}, None, ok)
    if action == "classify":
        scale = charlier_mod.Scale(args.theta, args.log_power)
        regime = charlier_mod.scale_classifier(args.q, scale)
        e_poly, e_log = charlier_mod.scale_exponents(args.q, scale)
        return Outcome({"q": args.q, "theta": args.theta, "log_power": args.log_power, "regime": regime.value,
                        "mdp_holds": regime is charlier_mod.Regime.MDP_HOLDS,
                        "exponent": str(e_poly), "log_exponent": str(e_log)})
    if action == "tail":
        replicas = args.replicas or 10000
        values = charlier_sums(args.q, args.n, replicas, args.seed or 0)
        var = args.n * math.factorial(args.q)
        alpha = 1 / math.sqrt(args.n)
        delta = chaos.c_qk(args.q, 1) / alpha
        gamma = float(args.q - 1)
        tails = tail_check(values, var, gamma, delta, args.z or list(DEFAULT_Z), mean=0.0)
        ok = all(r.holds for r in tails)
        return Outcome({"q": args.q, "n": args.n, "alpha": alpha, "delta": delta, "gamma": gamma,
                        "tail": [r.to_dict() for r in tails], "holds": ok}, _values_table(values), ok)
    raise InputError(f"unknown charlier action {action!r}")


def _charlier_config(args) -> dict:
    cfg = {"action": args.action, "q": args.q}
    if args.action == "check":
        cfg.update(m=args.m, tol=args.tol, guard_n=args.guard_n)
    elif args.action == "classify":
        cfg.update(theta=args.theta, log_power=args.log_power)
    elif args.action == "tail":
        cfg.update(n=args.n, z=args.z or list(DEFAULT_Z), seed=args.seed or 0, replicas=args.replicas or 10000)
    return cfg


# --- parser -----------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="master seed (default 0 or the config's)")
    p.add_argument("--out", default=d, help="directory for summary.json and the value table")
    p.add_argument("--guard-n", type=int, default=d, help="largest diagram size to enumerate (default 20)")
    p.add_argument("--replicas", type=int, default=d, help="Monte Carlo replicas")
    p.add_argument("--format", choices=("json", "csv"), default=d, help="stdout and table format")
    p.add_argument("--workers", type=int, default=d, help="worker processes for replica loops")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poissonchaos", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partitions", help="enumerate, count and bound diagram partitions")
    _global_flags(p, suppress=True)
    p.add_argument("action", choices=("count", "enumerate", "verify-bound", "lower-family"))
    p.add_argument("--shape", help="row sizes, e.g. 2,2")
    p.add_argument("--class", dest="cls", default="all",
                   help="all | no-singletons | connected | connected-no-singletons | row-covering")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--u", type=int, default=1)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--diagram", action="store_true", help="include ASCII row diagrams")

    p = sub.add_parser("cumulants", help="exact cumulants and bound parameters from a kernel file")
    _global_flags(p, suppress=True)
    p.add_argument("--kernels", required=True, help="kernel JSON file")
    p.add_argument("--kernel", action="append", help="kernel name (repeatable; default all)")
    p.add_argument("--kind", help="wiener-ito or ustatistic")
    p.add_argument("--m-max", type=int, default=chaos.DEFAULT_M_MAX)
    p.add_argument("--gamma", type=float)

    for name, helptext in (("simulate", "Monte Carlo for a kernel file"),
                           ("fixed-kernel", "fixed-kernel U-statistic on a probability space"),
                           ("rgg", "subgraph counts in random geometric graphs"),
                           ("ou", "quadratic functional of an OU Levy process")):
        p = sub.add_parser(name, help=helptext)
        _global_flags(p, suppress=True)
        p.add_argument("--config", required=(name != "ou"), help="JSON config (or a previous summary)")
        if name == "ou":
            p.add_argument("--rho", type=float)
            p.add_argument("--T", type=float)

    p = sub.add_parser("charlier", help="Charlier polynomials, chaos identity and scale regimes")
    _global_flags(p, suppress=True)
    p.add_argument("action", choices=("poly", "check", "classify", "tail"))
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--log-power", type=float, default=0.0)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--z", type=float, action="append")
    return parser


def _normalize(args):
    for key, default in (("seed", None), ("out", None), ("guard_n", parts.DEFAULT_GUARD),
                         ("replicas", None), ("format", "json"), ("workers", 1)):
        if getattr(args, key, None) is None:
            setattr(args, key, default)
    return args


def run(argv: Sequence[str] | None = None) -> tuple[int, Outcome | None]:
    args = _normalize(build_parser().parse_args(argv))
    try:
        if args.command == "partitions":
            outcome, resolved = cmd_partitions(args), _partitions_config(args)
        elif args.command == "cumulants":
            outcome = cmd_cumulants(args)
            resolved = {"kernels": args.kernels, "kernel": args.kernel, "kind": args.kind,
                        "m_max": args.m_max, "gamma": args.gamma, "guard_n": args.guard_n}
        elif args.command == "charlier":
            outcome, resolved = cmd_charlier(args), _charlier_config(args)
        else:
            doc = _load_json(args.config) if args.config else {}
            handler = {"simulate": cmd_simulate, "fixed-kernel": cmd_fixed_kernel,
                       "rgg": cmd_rgg, "ou": cmd_ou}[args.command]
            outcome, resolved = handler(args, doc)
    except GuardViolation as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD, None
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT, None
    outcome.summary = {"command": args.command, "config": resolved, "result": outcome.summary,
                       "ok": bool(outcome.ok)}
    _emit(args, outcome)
    return (EXIT_OK if outcome.ok else EXIT_CHECK), outcome


def _emit(args, outcome: Outcome):
    summary_text = dumps(outcome.summary)
    table_text = None
    if outcome.table is not None:
        header, rows = outcome.table
        if args.format == "csv":
            table_text = csv_text(header, rows)
        else:
            table_text = dumps([dict(zip(header, r)) for r in rows])
    if args.out:
        out = Path(args.out)
        if table_text is not None:
            atomic_write(out / f"values.{args.format}", table_text)
        atomic_write(out / "summary.json", summary_text)
    if args.format == "csv" and table_text is not None:
        sys.stdout.write(table_text)
    else:
        sys.stdout.write(summary_text)


def main(argv: Sequence[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
