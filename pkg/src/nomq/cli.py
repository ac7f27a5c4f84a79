"""Command-line entry point.

Every subcommand writes its delimited outputs (trace/result CSVs) plus a
summary.json into --out, renders a figure alongside them unless --no-plot is
given, and with --check exits nonzero if its acceptance-style assertions
fail.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, fields, replace

import numpy as np

from . import bench, plots, synth, vanish
from .cost import DEFAULT_GRAPH, load_graph, quartic_spec
from .nom import NOMConfig
from .pqc import Circuit, Gate, run_circuit
from .qcore import basis_state, fidelity, normalize
from .qgrad import effective_gradient, gradient_step, lcu_step_simulate


def _build_config(args) -> NOMConfig:
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        allowed = {f.name for f in fields(NOMConfig)}
        bad = set(data) - allowed
        if bad:
            raise SystemExit(f"unknown config keys: {sorted(bad)}")
        overrides.update(data)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode:
        overrides["mode"] = args.mode
    if args.synth:
        overrides["synth_mode"] = args.synth
    if args.xi is not None:
        overrides["xi"] = args.xi
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    return NOMConfig(**overrides)


class CheckFailure(Exception):
    pass


def _check(checks: list[tuple[str, bool]], enabled: bool) -> None:
    for name, ok in checks:
        print(("PASS " if ok else "FAIL ") + name)
    if enabled and not all(ok for _, ok in checks):
        raise CheckFailure()


def _write_json(data: dict, outdir: str, name: str = "summary.json") -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, name), "w") as fh:
        json.dump(data, fh, indent=1)


def cmd_maxcut(args) -> None:
    cfg = _build_config(args)
    graph = load_graph(args.graph) if args.graph else DEFAULT_GRAPH
    report = bench.run_maxcut_experiment(cfg, graph)
    bench.write_report(report, args.out, plot_fn=None if args.no_plot else plots.plot_maxcut)
    optimum = report.aggregates["optimum"]
    checks = [
        (
            f"{label}: final cost {report.aggregates['final_cost'][label]:.4f} >= {optimum - 0.05:.2f}",
            report.aggregates["final_cost"][label] >= optimum - 0.05,
        )
        for label, _ in report.runs
    ]
    _check(checks, args.check)


def cmd_polyopt(args) -> None:
    cfg = _build_config(args)
    if args.mode is None:
        cfg = replace(cfg, mode="ideal")  # the tight landing tolerances are an exact-update claim
    report = bench.run_poly_experiment(cfg)
    bench.write_report(report, args.out, plot_fn=None if args.no_plot else plots.plot_poly)
    agg = report.aggregates
    checks = [
        (f"max gradient norm {agg['max_grad_norm']:.2e} <= 1e-2", agg["max_grad_norm"] <= 1e-2),
        (
            f"max distance to an oracle minimum {agg['max_distance_to_minimum']:.2e} <= 1e-2",
            agg["max_distance_to_minimum"] <= 1e-2,
        ),
        (f"oracle finds 4 minima, got {len(agg['oracle_minima'])}", len(agg["oracle_minima"]) == 4),
    ]
    _check(checks, args.check)


def cmd_vanish(args) -> None:
    rows = vanish.run_bound_grid(samples=args.samples, seed=args.seed or 0)
    os.makedirs(args.out, exist_ok=True)
    vanish.write_bound_grid_csv(rows, os.path.join(args.out, "bounds.csv"))
    _write_json({"cells": rows}, args.out)
    if not args.no_plot:
        plots.plot_bound_grid(rows, os.path.join(args.out, "plot.svg"))
    checks = [
        (
            f"{r['kind']} d={r['d']} eps={r['epsilon']} m={r['m']}: "
            f"{r['empirical_tail']:.4f} <= {r['analytic_bound']:.4f} + 3 sigma",
            r["empirical_tail"] <= r["analytic_bound"] + 3 * r["sigma"],
        )
        for r in rows
    ]
    _check(checks, args.check)


def cmd_lcu_check(args) -> None:
    rng = np.random.default_rng(args.seed or 0)
    spec = quartic_spec()
    rows = []
    trials = 0
    while len(rows) < args.trials:
        trials += 1
        s = normalize(rng.normal(size=4) + 1j * rng.normal(size=4))
        xi = float(rng.choice([0.05, 0.2, 0.5]))
        try:
            out = lcu_step_simulate(spec, s, xi)
        except Exception:
            continue
        ref = gradient_step(s, effective_gradient(spec, s), xi, "descent")
        w = s - xi * (effective_gradient(spec, s).D @ s)
        pred = float(np.linalg.norm(w) ** 2 / (1 + xi * np.abs(out.coefficients).sum()) ** 2)
        rows.append(
            {
                "xi": xi,
                "infidelity_vs_dense": 1.0 - fidelity(out.state, ref),
                "success_prob": out.success_prob,
                "success_prob_error": abs(out.success_prob - pred),
            }
        )
    _write_json({"trials_attempted": trials, "rows": rows}, args.out)
    max_inf = max(r["infidelity_vs_dense"] for r in rows)
    max_err = max(r["success_prob_error"] for r in rows)
    _check(
        [
            (f"max infidelity vs dense path {max_inf:.2e} <= 1e-10", max_inf <= 1e-10),
            (f"max success-probability error {max_err:.2e} <= 1e-10", max_err <= 1e-10),
        ],
        args.check,
    )


def cmd_disturb(args) -> None:
    cfg = _build_config(args)
    mags = tuple(float(m) for m in args.magnitudes.split(","))
    report = bench.disturbance_sweep(cfg, magnitudes=mags, runs_per_magnitude=args.runs)
    bench.write_report(report, args.out, plot_fn=None if args.no_plot else plots.plot_disturbance)
    means = [report.aggregates["mean_final_cost"][f"{m:g}"] for m in mags]
    checks = [
        (f"mean final cost at {mags[0]:g} is {means[0]:.3f} >= 3.9", means[0] >= 3.9),
        (
            "mean final cost non-increasing in magnitude: " + ", ".join(f"{m:.3f}" for m in means),
            all(b <= a + 1e-9 for a, b in zip(means, means[1:])),
        ),
    ]
    _check(checks, args.check)


def cmd_bp_check(args) -> None:
    rng = np.random.default_rng(args.seed or 0)
    actions = synth.action_space(4)
    rows = []
    for _ in range(args.trials):
        n_g = int(rng.integers(1, 6))
        gates = tuple(Gate(*actions[rng.integers(len(actions))][:2], param_index=i) for i in range(n_g))
        circuit = Circuit(4, gates, n_g)
        alpha = rng.uniform(-1.5, 1.5, n_g)
        z = normalize(rng.normal(size=16) + 1j * rng.normal(size=16))
        zp = normalize(rng.normal(size=16) + 1j * rng.normal(size=16))
        k = int(rng.integers(n_g))
        out = vanish.bp_gradient_check(circuit, alpha, k, z, zp)
        rows.append({**out, "abs_error": abs(out["analytic"] - out["finite_diff"])})
    # identity-initialized layer over the full action set against a generic target
    gates = tuple(Gate(*actions[i][:2], param_index=i) for i in range(len(actions)))
    circuit = Circuit(4, gates, len(actions))
    z = normalize(rng.normal(size=16) + 1j * rng.normal(size=16))
    zp = normalize(rng.normal(size=16) + 1j * rng.normal(size=16))
    id_grads = [
        abs(vanish.bp_gradient_check(circuit, np.zeros(len(actions)), k, z, zp)["analytic"])
        for k in range(len(actions))
    ]
    _write_json({"rows": rows, "identity_init_max_grad": max(id_grads)}, args.out)
    max_err = max(r["abs_error"] for r in rows)
    _check(
        [
            (f"max |analytic - finite difference| {max_err:.2e} <= 1e-6", max_err <= 1e-6),
            (f"identity-init max |gradient| {max(id_grads):.2e} > 1e-3", max(id_grads) > 1e-3),
        ],
        args.check,
    )


def cmd_synth_train(args) -> None:
    rng = np.random.default_rng(args.seed or 0)
    actions = synth.action_space(4)
    os.makedirs(args.out, exist_ok=True)
    results = []
    curves: dict[str, list] = {}
    seeds = list(range(args.seeds))
    for t in range(args.targets):
        seed = seeds[t % len(seeds)]
        depth = int(rng.integers(1, 6))
        gates = tuple(Gate(*actions[rng.integers(len(actions))][:2], param_index=i) for i in range(depth))
        angles = rng.uniform(-np.pi, np.pi, depth)
        target = run_circuit(Circuit(4, gates, depth), angles)
        env = synth.SynthEnv(initial=basis_state(16), target=target, max_depth=10, fidelity_threshold=0.998)
        cfg = synth.PPOConfig(total_steps=args.max_steps, seed=seed)
        result = synth.ppo_train(env, cfg)
        _, _, fid = synth.synthesize_rl(result.policy, env)
        results.append(
            {"target": t, "seed": seed, "depth": depth, "env_steps": result.env_steps,
             "greedy_fidelity": fid, "solved": bool(fid >= env.fidelity_threshold)}
        )
        curves.setdefault(f"seed_{seed}", []).extend(s.ret for s in result.episodes)
        synth.write_training_curve(result.episodes, os.path.join(args.out, f"curve_target_{t:02d}.csv"))
        result.policy.save(os.path.join(args.out, f"policy_target_{t:02d}.npz"))
    success = float(np.mean([r["solved"] for r in results]))
    decile_ok = {}
    for label, rets in curves.items():
        k = max(1, len(rets) // 10)
        decile_ok[label] = float(np.mean(rets[-k:])) > float(np.mean(rets[:k]))
    _write_json({"results": results, "success_rate": success, "decile_improved": decile_ok}, args.out)
    if not args.no_plot:
        plots.plot_training_curves(curves, os.path.join(args.out, "plot.svg"))
    _check(
        [
            (f"success rate {success:.2f} >= 0.70", success >= 0.70),
            (
                "per-seed last-decile return exceeds first-decile: "
                + ", ".join(f"{k}={v}" for k, v in sorted(decile_ok.items())),
                all(decile_ok.values()),
            ),
        ],
        args.check,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nomq", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", type=str, default=None, help="JSON file with NOM config overrides")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--mode", choices=["ideal", "reencode"], default=None)
    common.add_argument("--synth", choices=["greedy", "rl"], default=None)
    common.add_argument("--xi", type=float, default=None)
    common.add_argument("--max-iter", type=int, default=None)
    common.add_argument("--check", action="store_true", help="exit nonzero if assertions fail")
    common.add_argument("--no-plot", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("maxcut", parents=[common], help="four-circuit cut-maximization experiment")
    p.add_argument("--graph", type=str, default=None, help="edge-list file")
    p.set_defaults(fn=cmd_maxcut)
    p = sub.add_parser("polyopt", parents=[common], help="twelve-point polynomial descent experiment")
    p.set_defaults(fn=cmd_polyopt)
    p = sub.add_parser("vanish", parents=[common], help="gradient-concentration Monte Carlo grid")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(fn=cmd_vanish)
    p = sub.add_parser("lcu-check", parents=[common], help="ancilla-circuit vs dense-path equivalence")
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(fn=cmd_lcu_check)
    p = sub.add_parser("disturb", parents=[common], help="disturbance-magnitude robustness sweep")
    p.add_argument("--magnitudes", type=str, default="0.01,0.03,0.05")
    p.add_argument("--runs", type=int, default=50)
    p.set_defaults(fn=cmd_disturb)
    p = sub.add_parser("bp-check", parents=[common], help="layer-derivative analytic vs finite differences")
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(fn=cmd_bp_check)
    p = sub.add_parser("synth-train", parents=[common], help="train the RL synthesizer on random targets")
    p.add_argument("--targets", type=int, default=20)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--max-steps", type=int, default=30_000)
    p.set_defaults(fn=cmd_synth_train)

    args = parser.parse_args(argv)
    if args.out is None:
        args.out = os.path.join("out", args.command)
    try:
        args.fn(args)
    except CheckFailure:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
