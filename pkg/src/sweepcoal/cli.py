"""Command-line entry point.

Every command writes its tables into ``--out`` together with ``manifest.json``
(command, parameters, seed, version, wall-clock seconds). Re-running a manifest
with ``sweepcoal replay`` reproduces every other file byte for byte.

Exit codes: 0 success, 2 usage, 3 invalid input or unsupported request,
4 resource budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .coalescent import (EXACT_MAX_N, XiSweepMeasure, coalescent_ensemble, coupled_ensemble,
                         lambda_law)
from .compare import EmpiricalLaw, tv_estimate
from .ensemble import Estimate
from .errors import ResourceError, SizeLimitError, SweepCoalError
from .io import write_json, write_records
from .measures import (LambdaMeasure, example_linear, example_single_site, example_uniform,
                       lambda_from_sweep_spec, lambda_rate, total_rates)
from .moran import (SweepParams, coalescence_on_loss, fixation_probability,
                    simulate_recurrent_ensemble, simulate_sweeps)
from .partitions import Partition, stick_breaking_law, two_coin_law
from .stats import (DStatConfig, SampleStats, coupling_identity_probability, d_statistics,
                    expected_segregating, gn_table, harmonic, rho, stats_ensemble, visit_frequencies)
from .sweepspec import SweepSpec, single_site_spec_from_p, uniform_chromosome_spec

TV_MAX_N = 5
EXAMPLES: dict[str, Callable[[], LambdaMeasure]] = {
    "kingman": LambdaMeasure.kingman_only,
    "star": lambda: LambdaMeasure(1.0, ((1.0, 1.0),)),
    "single-site": example_single_site,
    "linear": lambda: example_linear(1.0),
    "uniform": example_uniform,
}


def _count(text: str) -> int:
    """Replicate counts; accepts 1e5 style input."""
    v = float(text)
    if not (v.is_integer() and v >= 1):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _sub_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([seed, tag]).generate_state(1, np.uint64)[0])


def _load_measure(args) -> LambdaMeasure:
    if args.measure:
        return LambdaMeasure.load(args.measure)
    return EXAMPLES[args.example]()


def _measure_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--measure", help="Lambda measure JSON file")
    g.add_argument("--example", choices=sorted(EXAMPLES), default="single-site",
                   help="built-in measure (default: single-site)")


# --------------------------------------------------------------------------
# commands; each returns {file stem: (header, rows) or JSON object}
# --------------------------------------------------------------------------

def cmd_sweep(args) -> dict[str, Any]:
    if args.tv and args.n > TV_MAX_N:
        raise SizeLimitError(f"--tv enumerates partitions and needs n <= {TV_MAX_N}, got {args.n}")
    params = SweepParams(args.twoN, args.s, args.r, args.n)
    ens = simulate_sweeps(params, args.reps, args.seed, args.threads)
    rows = [(i, bool(ens.fixed[i]), float(ens.tau[i]), int(ens.ups[i]), int(ens.downs[i]),
             str(Partition.from_rgs(ens.rgs[i]))) for i in range(ens.reps)]
    fixed = int(ens.fixed.sum())
    summary: dict[str, Any] = {
        "fixation": Estimate.proportion(fixed, ens.reps).to_dict(),
        "fixation_exact": fixation_probability(args.twoN, args.s),
        "tau": Estimate.of(ens.tau).to_dict(),
        "tau_bound": params.duration_bound,
        "coalescence_on_loss": coalescence_on_loss(ens).to_dict(),
        "alpha": params.alpha,
        "p": math.exp(-params.alpha),
        "seed": args.seed,
    }
    if args.tv and fixed:
        emp = EmpiricalLaw.from_rgs(ens.rgs[ens.fixed])
        rng = np.random.default_rng(_sub_seed(args.seed, 1))
        theta = min(1.0, args.r / args.s)
        m = math.floor(args.twoN * args.s)
        summary["tv_two_coin"] = tv_estimate(emp, two_coin_law(math.exp(-params.alpha), args.n), rng).to_dict()
        if m >= 1:
            summary["tv_stick_breaking"] = tv_estimate(emp, stick_breaking_law(theta, m, args.n), rng).to_dict()
    return {"sweeps": (("replicate", "fixed", "tau", "ups", "downs", "partition"), rows),
            "summary": summary}


def cmd_recurrent(args) -> dict[str, Any]:
    spec = SweepSpec.load(args.spec)
    snaps = simulate_recurrent_ensemble(spec, args.twoN, args.n, args.times, args.reps, args.seed,
                                        args.threads)
    rows = [(i, u, str(p), s.flagged, s.sweeps, s.fixations)
            for i, s in enumerate(snaps) for u, p in zip(s.times, s.partitions)]
    lam = lambda_from_sweep_spec(spec)
    xi = XiSweepMeasure(spec, args.twoN)
    rng = np.random.default_rng(_sub_seed(args.seed, 1))
    per_time = []
    for j, u in enumerate(args.times):
        psi = EmpiricalLaw.from_partitions(args.n, (s.partitions[j] for s in snaps))
        ens = coalescent_ensemble(xi, args.n, args.reps, _sub_seed(args.seed, 10 + j),
                                  horizon=u, threads=args.threads)
        xi_emp = EmpiricalLaw.from_rgs(ens.rgs)
        entry: dict[str, Any] = {
            "time": u,
            "psi": psi.distribution().weights,
            "xi": xi_emp.distribution().weights,
            "tv_psi_xi": tv_estimate(psi, xi_emp, rng).to_dict(),
        }
        if args.n <= EXACT_MAX_N:
            exact = lambda_law(lam, args.n, u)
            entry["lambda"] = exact.weights
            entry["tv_psi_lambda"] = tv_estimate(psi, exact, rng).to_dict()
            entry["tv_xi_lambda"] = tv_estimate(xi_emp, exact, rng).to_dict()
        per_time.append(entry)
    summary = {"seed": args.seed, "flagged": Estimate.proportion(sum(s.flagged for s in snaps), len(snaps)).to_dict(),
               "times": [_str_keys(e) for e in per_time]}
    return {"recurrent": (("replicate", "time", "partition", "flagged", "sweeps", "fixations"), rows),
            "summary": summary}


def _str_keys(e: dict) -> dict:
    return {k: ({str(p): w for p, w in sorted(v.items())} if isinstance(v, dict) and v
                and isinstance(next(iter(v)), Partition) else v) for k, v in e.items()}


def cmd_coalescent(args) -> dict[str, Any]:
    if args.spec:
        measure: LambdaMeasure | XiSweepMeasure = XiSweepMeasure(SweepSpec.load(args.spec), args.twoN)
    else:
        measure = _load_measure(args)
    horizon = math.inf if args.horizon is None else args.horizon
    ens = coalescent_ensemble(measure, args.n, args.reps, args.seed, horizon=horizon, threads=args.threads)
    rows = [(i, float(ens.end[i]), str(Partition.from_rgs(ens.rgs[i])),
             float(ens.lengths[i, 0]) if args.n > 1 else 0.0, float(ens.lengths[i, 1:].sum()),
             int(ens.nulls[i])) for i in range(ens.reps)]
    summary = {"seed": args.seed, "end": Estimate.of(ens.end).to_dict(),
               "J_n": Estimate.of(ens.lengths[:, 0]).to_dict() if args.n > 1 else None,
               "law": {str(p): w for p, w in sorted(ens.law().weights.items())}}
    return {"paths": (("replicate", "end", "partition", "J_n", "I_n", "null_events"), rows),
            "summary": summary}


def cmd_rates(args) -> dict[str, Any]:
    m = _load_measure(args)
    rates = [(b, k, lambda_rate(m, b, k)) for b in range(2, args.n + 1) for k in range(2, b + 1)]
    G = gn_table(m, args.n)
    totals = []
    for b in range(2, args.n + 1):
        lam, al = total_rates(m, b)
        totals.append((b, lam, al, float(G[b]), expected_segregating(m, args.theta, b)))
    return {"rates": (("b", "k", "lambda_bk"), rates),
            "totals": (("b", "lambda_b", "alpha_b", "G_n_b", "E_S_b"), totals)}


def cmd_rho(args) -> dict[str, Any]:
    m = _load_measure(args)
    res = rho(m, args.theta, args.tol)
    return {"rho": {"rho": res.rho, "truncation_bound": res.truncation_bound, "level": res.level,
                    "theta": args.theta, "components": res.components}}


STATS_HEADER = ("replicate", "n", "theta", "S_n", "Delta_n", "eta_e", "eta_i", "J_n", "I_n",
                "taj_num", "fuli_num")


def cmd_stats(args) -> dict[str, Any]:
    if args.spec:
        measure: LambdaMeasure | XiSweepMeasure = XiSweepMeasure(SweepSpec.load(args.spec), args.twoN)
    else:
        measure = _load_measure(args)
    tab = stats_ensemble(measure, args.n, args.theta, args.reps, args.seed, args.threads)
    cfg = DStatConfig(args.theta, "classical" if args.classical else "numerator-only")
    header = STATS_HEADER + (("taj_D", "fuli_D") if args.classical else ())
    rows = []
    for i in range(tab.reps):
        st = SampleStats(args.n, int(tab.segregating[i]), float(tab.pairwise[i]), int(tab.eta_e[i]),
                         int(tab.eta_i[i]), float(tab.j[i]), float(tab.i[i]))
        d = d_statistics(st, cfg)
        row = [i, args.n, args.theta, st.segregating, st.pairwise, st.eta_e, st.eta_i, st.j, st.i,
               d.tajima_numerator, d.fuli_numerator]
        if args.classical:
            row += [d.tajima_d, d.fuli_d]
        rows.append(row)
    h = harmonic(args.n - 1)
    summary = {
        "seed": args.seed, "n": args.n, "theta": args.theta,
        **{k: Estimate.of(v).to_dict() for k, v in (
            ("S_n", tab.segregating), ("Delta_n", tab.pairwise), ("eta_e", tab.eta_e),
            ("J_n", tab.j), ("taj_num", tab.tajima_numerator), ("fuli_num", tab.fuli_numerator))},
        "kingman_S_n": args.theta * h,
    }
    if isinstance(measure, LambdaMeasure):
        summary["exact_S_n"] = expected_segregating(measure, args.theta, args.n)
    return {"stats": (header, rows), "summary": summary}


def cmd_compare(args) -> dict[str, Any]:
    """Monte Carlo against exact values for one measure."""
    m = _load_measure(args)
    rows: list[tuple] = []

    def add(quantity, exact, est: Estimate):
        z = (est.mean - exact) / est.se if est.se > 0 else (0.0 if est.mean == exact else math.inf)
        rows.append((quantity, exact, est.mean, est.se, z))

    ens = coalescent_ensemble(m, args.n, args.reps, args.seed, visits=True, threads=args.threads)
    G = gn_table(m, args.n)
    freq = visit_frequencies(ens)
    for b in range(2, args.n + 1):
        add(f"G_{args.n}({b})", float(G[b]), Estimate.proportion(int(round(freq[b] * ens.reps)), ens.reps))
    tab = stats_ensemble(m, args.n, args.theta, args.reps, _sub_seed(args.seed, 1), args.threads)
    add(f"E[S_{args.n}]", expected_segregating(m, args.theta, args.n), Estimate.of(tab.segregating))
    if m.kingman == 1.0:
        cp = coupled_ensemble(m, args.n, args.reps, _sub_seed(args.seed, 2), args.threads)
        add(f"P(identical paths, n={args.n})", coupling_identity_probability(m, args.n),
            Estimate.proportion(int(cp.identical.sum()), args.reps))
    return {"compare": (("quantity", "exact", "mc_mean", "mc_se", "z"), rows)}


def cmd_make_spec(args) -> dict[str, Any]:
    if args.kind == "single-site":
        spec = single_site_spec_from_p(args.s, args.alpha, args.p)
    else:
        spec = uniform_chromosome_spec(args.alpha, args.s, args.beta, args.L, args.grid)
    return {"spec": spec.to_dict()}


# --------------------------------------------------------------------------
# parser and driver
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    common.add_argument("--reps", type=_count, default=10000)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: cores)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="per-replicate table format")

    p = argparse.ArgumentParser(prog="sweepcoal", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("sweep", parents=[common], help="single sweeps in the Moran model")
    q.add_argument("--twoN", type=int, required=True)
    q.add_argument("--s", type=float, required=True)
    q.add_argument("--r", type=float, default=0.0)
    q.add_argument("--n", type=int, default=3)
    q.add_argument("--tv", action="store_true", help="TV of the fixation law to both partition laws")
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("recurrent", parents=[common], help="recurrent sweeps vs coalescent limits")
    q.add_argument("--spec", required=True)
    q.add_argument("--twoN", type=int, required=True)
    q.add_argument("--n", type=int, default=3)
    q.add_argument("--times", type=_floats, default=[0.3])
    q.set_defaults(func=cmd_recurrent)

    q = sub.add_parser("coalescent", parents=[common], help="Lambda or sweep-Xi coalescent paths")
    _measure_args(q)
    q.add_argument("--spec", help="sweep spec; selects the Xi coalescent built from it")
    q.add_argument("--twoN", type=int, default=2000)
    q.add_argument("--n", type=int, default=10)
    q.add_argument("--horizon", type=float, default=None)
    q.set_defaults(func=cmd_coalescent)

    q = sub.add_parser("rates", parents=[common], help="merger rates and visit probabilities")
    _measure_args(q)
    q.add_argument("--n", type=int, default=10)
    q.add_argument("--theta", type=float, default=2.0)
    q.set_defaults(func=cmd_rates)

    q = sub.add_parser("rho", parents=[common], help="limiting deficit of segregating sites")
    _measure_args(q)
    q.add_argument("--theta", type=float, default=2.0)
    q.add_argument("--tol", type=float, default=5e-3)
    q.set_defaults(func=cmd_rho)

    q = sub.add_parser("stats", parents=[common], help="neutrality statistics over an ensemble")
    _measure_args(q)
    q.add_argument("--spec", help="sweep spec; selects the Xi coalescent built from it")
    q.add_argument("--twoN", type=int, default=2000)
    q.add_argument("--n", type=int, default=10)
    q.add_argument("--theta", type=float, default=2.0)
    q.add_argument("--classical", action="store_true", help="also report normalized D values")
    q.set_defaults(func=cmd_stats)

    q = sub.add_parser("compare", parents=[common], help="Monte Carlo against exact values")
    _measure_args(q)
    q.add_argument("--n", type=int, default=6)
    q.add_argument("--theta", type=float, default=2.0)
    q.set_defaults(func=cmd_compare)

    q = sub.add_parser("make-spec", parents=[common], help="write a sweep spec JSON")
    q.add_argument("kind", choices=("single-site", "uniform"))
    q.add_argument("--s", type=float, default=0.5)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--p", type=float, default=0.8, help="single-site merger coin")
    q.add_argument("--beta", type=float, default=1.0, help="uniform: r(x) = beta |x|")
    q.add_argument("--L", type=float, default=1.0)
    q.add_argument("--grid", type=int, default=100)
    q.set_defaults(func=cmd_make_spec)

    q = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    q.add_argument("manifest", type=Path)
    q.add_argument("--out", type=Path, required=True)
    q.add_argument("--threads", type=int, default=None)
    return p


def _emit(out: Path, fmt: str, results: dict[str, Any]) -> list[str]:
    written = []
    for stem, obj in results.items():
        if isinstance(obj, tuple):
            header, rows = obj
            path = write_records(out / stem, fmt, header, rows)
        else:
            path = out / f"{stem}.json"
            write_json(path, obj)
        written.append(path.name)
    return written


def _argv_of(args: argparse.Namespace, raw: Sequence[str]) -> list[str]:
    """The original argv with --out and --threads removed."""
    out, skip = [], False
    for tok in raw:
        if skip:
            skip = False
            continue
        name = tok.split("=", 1)[0]
        if name in ("--out", "--threads"):
            skip = "=" not in tok
            continue
        out.append(tok)
    return out


def run(argv: Sequence[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        man = json.loads(args.manifest.read_text())
        again = list(man["argv"]) + ["--out", str(args.out)]
        if args.threads is not None:
            again += ["--threads", str(args.threads)]
        return run(again)
    args.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = args.func(args)
    written = _emit(args.out, args.format, results)
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
              if k not in ("func", "out")}
    write_json(args.out / "manifest.json", {
        "command": args.command,
        "parameters": params,
        "seed": args.seed,
        "reps": args.reps,
        "version": __version__,
        "argv": _argv_of(args, argv),
        "outputs": written,
        "wall_clock_seconds": time.perf_counter() - t0,
    })
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return run(argv)
    except ResourceError as e:
        print(f"sweepcoal: resource limit: {e}", file=sys.stderr)
        return 4
    except SweepCoalError as e:
        print(f"sweepcoal: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as e:
        print(f"sweepcoal: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
