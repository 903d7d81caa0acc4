"""Command-line interface.

Subcommands:

* ``dist eval``        evaluate one distribution functional at a point
* ``sample``           draw values to a CSV
* ``empirical build``  fit the sample-based model and dump a JSON report
* ``mech run``         Monte Carlo a mechanism from a JSON config
* ``experiment <id>``  run a registered experiment and emit its report CSV

Every randomized path is seeded; identical invocations write identical
bytes.  The process exits nonzero when any emitted verdict fails.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import warnings

import numpy as np

from ..dists import dist_from_spec, revenue_curve_hull
from ..empirical import SampleParams, build_empirical, validate_params
from ..lp import MultiItemInstance, make_pricing_plan, aggregate, build_lp3, solve
from ..mechanisms import (
    Environment,
    ExplicitFeasibleSets,
    KUniformMatroid,
    empirical_vcg_lazy,
    lottery_mechanism,
    myerson_single_item,
    posted_price_mechanism,
    two_mech_budget,
    vcg,
    vcg_lazy,
    vcg_with_duplicates,
)
from .experiments import (
    ExperimentConfig,
    UnknownExperimentError,
    exact_pricing_plan,
    run_experiment,
)
from .montecarlo import monte_carlo, render_csv
from .rng import meta_stream, stream

MECH_CHOICES = (
    "vcg",
    "vcg-dup",
    "vcgl",
    "vcgl-emp",
    "myerson",
    "two-mech",
    "lottery",
    "posted",
    "posted-emp",
)

WHAT_CHOICES = ("cdf", "pdf", "phi", "hazard", "H", "reserve", "cr", "welfare")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srauctions",
        description="strongly regular valuation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    dist_p = sub.add_parser("dist", help="distribution utilities")
    dist_sub = dist_p.add_subparsers(dest="subcommand", required=True)
    eval_p = dist_sub.add_parser("eval", help="evaluate a functional at a point")
    eval_p.add_argument("--spec", required=True, help="distribution spec JSON")
    eval_p.add_argument("--v", required=True, type=float, help="evaluation point")
    eval_p.add_argument("--what", required=True, choices=WHAT_CHOICES)

    sample_p = sub.add_parser("sample", help="draw values to a CSV")
    sample_p.add_argument("--spec", required=True)
    sample_p.add_argument("--m", required=True, type=int)
    sample_p.add_argument("--seed", required=True, type=int)
    sample_p.add_argument("--out", required=True)

    emp_p = sub.add_parser("empirical", help="sample-based model utilities")
    emp_sub = emp_p.add_subparsers(dest="subcommand", required=True)
    build_p = emp_sub.add_parser("build", help="fit a model from sampled values")
    build_p.add_argument("--in", dest="infile", required=True)
    build_p.add_argument("--m", required=True, type=int)
    build_p.add_argument("--gamma", required=True, type=float)
    build_p.add_argument("--xi", required=True, type=float)
    build_p.add_argument("--delta", required=True, type=float)
    build_p.add_argument("--report", required=True)

    mech_p = sub.add_parser("mech", help="mechanism Monte Carlo")
    mech_sub = mech_p.add_subparsers(dest="subcommand", required=True)
    run_p = mech_sub.add_parser("run", help="average a mechanism over trials")
    run_p.add_argument("--mech", required=True, choices=MECH_CHOICES)
    run_p.add_argument("--config", required=True, help="instance config JSON file")
    run_p.add_argument("--trials", required=True, type=int)
    run_p.add_argument("--seed", required=True, type=int)
    run_p.add_argument("--out", required=True)

    exp_p = sub.add_parser("experiment", help="run a registered experiment")
    exp_p.add_argument("id", help="experiment id")
    exp_p.add_argument("--config", default=None, help="override config JSON file")
    exp_p.add_argument("--out", default=None, help="report CSV path (default stdout)")

    return parser


# ---------------------------------------------------------------------------
# dist / sample / empirical
# ---------------------------------------------------------------------------


def _cmd_dist_eval(args) -> int:
    d = dist_from_spec(args.spec)
    v = args.v
    table = {
        "cdf": lambda: d.cdf(v),
        "pdf": lambda: d.density(v),
        "phi": lambda: d.virtual_valuation(v),
        "hazard": lambda: d.hazard_rate(v),
        "H": lambda: d.cumulative_hazard(v),
        "reserve": lambda: d.reserve_price,
        "cr": lambda: revenue_curve_hull(d, v),
        "welfare": lambda: d.posted_price_welfare(v),
    }
    print(format(float(table[args.what]()), ".12g"))
    return 0


def _cmd_sample(args) -> int:
    d = dist_from_spec(args.spec)
    if args.m < 1:
        print("--m must be positive", file=sys.stderr)
        return 2
    values = d.sample(stream(args.seed, 0), args.m)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value"])
        for x in values:
            writer.writerow([repr(float(x))])
    return 0


def _read_sample_csv(path: str) -> list[float]:
    out: list[float] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                out.append(float(row[0]))
            except ValueError:
                continue  # header or stray text
    return out


def _cmd_empirical_build(args) -> int:
    samples = _read_sample_csv(args.infile)
    if len(samples) < args.m:
        print(
            f"input has {len(samples)} values, need --m {args.m}", file=sys.stderr
        )
        return 2
    p = SampleParams(gamma=args.gamma, xi=args.xi, delta=args.delta, m=args.m)
    validity = validate_params(p)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = build_empirical(samples[: args.m], p)
    for warning in caught:
        print(f"warning: {warning.message}", file=sys.stderr)
    report = {
        "model": model.to_json_dict(),
        "params": dataclasses.asdict(p),
        "validity": {
            "lemma_grade": validity.lemma_grade,
            "theorem_grade": validity.theorem_grade,
            "required_m": validity.required_m,
        },
        "empirical_reserve": model.empirical_reserve(),
        "xi_bar": model.xi_bar,
    }
    with open(args.report, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# mech run
# ---------------------------------------------------------------------------


def env_from_spec(spec: dict) -> Environment:
    kind = spec.get("kind", "k-uniform")
    if kind == "k-uniform":
        return KUniformMatroid(int(spec["k"]), int(spec["n"]))
    if kind == "explicit":
        return ExplicitFeasibleSets(
            int(spec["n"]), [set(map(int, s)) for s in spec["sets"]]
        )
    raise ValueError(f"unknown environment kind: {kind!r}")


def _draw_values(dists, rng) -> np.ndarray:
    return np.array([float(d.sample(rng, 1)[0]) for d in dists])


def _draw_budgets(config: dict, n: int, rng) -> np.ndarray:
    if "budget_dist" in config:
        b = config["budget_dist"]
        coins = rng.random(n) < float(b["p_hi"])
        return np.where(coins, float(b["hi"]), float(b["lo"]))
    return np.asarray(config["budgets"], dtype=float)


def _outcome_metrics(out) -> dict:
    return {"revenue": out.revenue, "welfare": out.welfare}


def _make_mech_trial(mech: str, config: dict, seed: int):
    """Build the per-trial closure for ``mech run``.

    One-off setup draws (model training samples) come from meta streams so
    the per-trial streams stay untouched.
    """
    if mech in ("posted", "posted-emp"):
        inst = MultiItemInstance.from_spec(config["instance"])
        if mech == "posted":
            plan, _ = exact_pricing_plan(inst)
        else:
            sp = SampleParams(**config["sample_params"])
            if sp.m is None:
                sp = dataclasses.replace(sp, m=validate_params(sp).required_m)
            build_rng = meta_stream(seed, 0)
            models = {
                (i, j): build_empirical(d.sample(build_rng, sp.m), sp)
                for i, j, d in inst.pairs()
            }
            lp3 = build_lp3(inst, models, sp)
            plan = make_pricing_plan(aggregate(solve(lp3), lp3, inst), inst, models, sp)

        def posted_trial(rng):
            values = np.empty((inst.n_bidders, inst.n_items))
            for i, j, d in inst.pairs():
                values[i, j] = d.sample(rng, 1)[0]
            return _outcome_metrics(posted_price_mechanism(inst, plan, values, rng))

        return posted_trial

    dists = [dist_from_spec(s) for s in config["dists"]]
    n = len(dists)
    env = env_from_spec(config.get("env", {"kind": "k-uniform", "k": 1, "n": n}))
    if env.n_bidders != n:
        raise ValueError("environment size does not match the number of dists")

    if mech == "vcg":
        return lambda rng: _outcome_metrics(vcg(env, _draw_values(dists, rng)))
    if mech == "vcg-dup":

        def dup_trial(rng):
            values = _draw_values(dists, rng)
            duplicates = _draw_values(dists, rng)
            return _outcome_metrics(vcg_with_duplicates(env, values, duplicates))

        return dup_trial
    if mech == "vcgl":
        reserves = config.get("reserves") or [d.reserve_price for d in dists]
        return lambda rng: _outcome_metrics(
            vcg_lazy(env, _draw_values(dists, rng), reserves)
        )
    if mech == "vcgl-emp":
        sp = SampleParams(**config["sample_params"])
        if sp.m is None:
            sp = dataclasses.replace(sp, m=validate_params(sp).required_m)
        build_rng = meta_stream(seed, 0)
        models = [build_empirical(d.sample(build_rng, sp.m), sp) for d in dists]
        return lambda rng: _outcome_metrics(
            empirical_vcg_lazy(env, _draw_values(dists, rng), models)
        )
    if mech == "myerson":
        return lambda rng: _outcome_metrics(
            myerson_single_item(dists, _draw_values(dists, rng))
        )
    if mech == "two-mech":

        def two_mech_trial(rng):
            values = _draw_values(dists, rng)
            budgets = _draw_budgets(config, n, rng)
            coin = 1 if rng.random() < 0.5 else 2
            return _outcome_metrics(
                two_mech_budget(env, dists, values, budgets, coin=coin)
            )

        return two_mech_trial
    if mech == "lottery":
        reserves = config.get("reserves")

        def lottery_trial(rng):
            values = _draw_values(dists, rng)
            budgets = _draw_budgets(config, n, rng)
            return _outcome_metrics(
                lottery_mechanism(env, dists, values, budgets, rng, reserves=reserves)
            )

        return lottery_trial
    raise ValueError(f"unknown mechanism: {mech!r}")


def _cmd_mech_run(args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    trial = _make_mech_trial(args.mech, config, args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = monte_carlo(
            trial, args.trials, args.seed, experiment_id=f"mech:{args.mech}"
        )
    render_csv(report, args.out)
    return 0 if report.verdict else 1


def _cmd_experiment(args) -> int:
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        cfg = ExperimentConfig.from_json_dict(args.id, data)
    else:
        cfg = ExperimentConfig(experiment_id=args.id)
    try:
        report = run_experiment(args.id, cfg)
    except UnknownExperimentError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    out_path = args.out or cfg.out
    text = render_csv(report, out_path)
    if out_path is None:
        sys.stdout.write(text)
    return 0 if report.verdict else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "dist":
        return _cmd_dist_eval(args)
    if args.command == "sample":
        return _cmd_sample(args)
    if args.command == "empirical":
        return _cmd_empirical_build(args)
    if args.command == "mech":
        return _cmd_mech_run(args)
    if args.command == "experiment":
        return _cmd_experiment(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
