"""Alternating quantum-gradient / classical re-encoding optimization loop.

Each iteration applies the normalized update (I -+ xi D)|s> to the current
trial state, measures the move indicator 1 - |<s'|s>|^2, and (unless the
indicator already signals convergence) re-encodes s' as a circuit: first by
re-optimizing the existing parameters, then, when progress stalls, by
appending a synthesized layer.  "ideal" mode skips re-encoding and carries
s' forward directly, which isolates the state-space dynamics.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import synth
from .cost import CostSpec, eval_cost, wirtinger_fd
from .encoding import decode
from .pqc import Circuit, ansatz_gradient, expectation_value, optimize_params, run_circuit, save_circuit
from .qcore import fidelity, normalize
from .qgrad import effective_gradient, gradient_step

TRACE_COLUMNS = (
    "t",
    "cost",
    "indicator",
    "c1_after_opt",
    "layer_added",
    "circuit_depth",
    "fidelity_to_target",
)


@dataclass
class NOMConfig:
    xi: float = 0.2
    epsilon: float = 1e-4
    epsilon0: float = 0.002
    max_iter: int = 100
    sign: str = "descent"
    mode: str = "reencode"
    trigger_ratio: float = 10.0
    stagnation_window: int = 5
    synth_mode: str = "greedy"
    synth_max_depth: int = 10
    synth_steps: int = 8000
    disturbance: float = 0.0
    seed: int = 0
    opt_budget: int = 400

    def __post_init__(self):
        if self.xi <= 0:
            raise ValueError("learning rate xi must be positive")
        if not 0 < self.epsilon0 < 1:
            raise ValueError("re-encode threshold epsilon0 must be in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("iteration cap must be >= 1")
        if self.sign not in ("descent", "ascent"):
            raise ValueError(f"unknown sign {self.sign!r}")
        if self.mode not in ("reencode", "ideal"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.synth_mode not in ("greedy", "rl"):
            raise ValueError(f"unknown synth mode {self.synth_mode!r}")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    cost: float
    indicator: float
    c1_after_opt: float
    layer_added: bool
    circuit_depth: int
    fidelity_to_target: float


@dataclass
class NOMTrace:
    records: list[IterationRecord]
    final_circuit: Circuit
    final_params: np.ndarray
    final_state: np.ndarray
    termination_reason: str  # "IndicatorBelowEpsilon" or "MaxIter"
    initial_cost: float


def cost_of_state(problem: CostSpec, s: np.ndarray) -> float:
    """Reported cost of a register state: expectation in rawstate mode, decoded polynomial otherwise."""
    s = np.asarray(s, dtype=complex)
    if problem.mode == "rawstate":
        return float(np.vdot(s, problem.F @ s).real)
    return eval_cost(problem, decode(s, d=problem.d))


def inject_disturbance(s: np.ndarray, magnitude: float, rng) -> np.ndarray:
    """Add a random complex perturbation of the given norm and renormalize."""
    if magnitude < 0:
        raise ValueError("disturbance magnitude must be >= 0")
    if magnitude == 0:
        return s
    delta = rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size)
    delta *= magnitude / np.linalg.norm(delta)
    return normalize(s + delta)


def reencode(
    circuit: Circuit,
    theta_prev: np.ndarray,
    target: np.ndarray,
    cfg: NOMConfig,
    rng=None,
    c1_history=(),
) -> tuple[Circuit, np.ndarray, float, bool]:
    """Fit the circuit to a target state, appending a synthesized layer when triggered.

    Step 1 re-optimizes existing parameters from theta_prev.  If the residual
    infidelity stays above epsilon0 and either exceeds trigger_ratio * epsilon0
    or has not improved over the stagnation window, a layer is synthesized on
    top, jointly polished, and kept only if it helps.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    seed = int(rng.integers(1 << 31))
    theta1, c1 = optimize_params(
        circuit, theta_prev, target, budget=cfg.opt_budget, seed=seed, stop_below=0.25 * cfg.epsilon0
    )
    if c1 <= cfg.epsilon0:
        return circuit, theta1, c1, False
    w = cfg.stagnation_window
    stagnant = len(c1_history) >= w and c1 >= min(list(c1_history)[-w:]) - 1e-6
    if not (c1 > cfg.trigger_ratio * cfg.epsilon0 or stagnant):
        return circuit, theta1, c1, False

    env = synth.SynthEnv(
        initial=run_circuit(circuit, theta1),
        target=target,
        max_depth=cfg.synth_max_depth,
        fidelity_threshold=1.0 - cfg.epsilon0,
    )
    if cfg.synth_mode == "greedy":
        layer, alpha, _ = synth.synthesize_greedy(env)
    else:
        ppo_cfg = synth.PPOConfig(total_steps=cfg.synth_steps, seed=int(rng.integers(1 << 31)))
        result = synth.ppo_train(env, ppo_cfg)
        layer, alpha, _ = synth.synthesize_rl(result.policy, env)
    if layer.depth == 0:
        return circuit, theta1, c1, False
    merged, _ = circuit.appended(layer)
    theta2 = np.concatenate([theta1, alpha])
    theta3, c2 = optimize_params(
        merged, theta2, target, budget=synth.FINAL_POLISH_BUDGET, seed=seed + 1,
        stop_below=0.25 * cfg.epsilon0,
    )
    if c2 < c1:
        return merged, theta3, c2, True
    return circuit, theta1, c1, False


def nom_run(problem: CostSpec, init: tuple[Circuit, np.ndarray], cfg: NOMConfig,
            checkpoint_dir: str | None = None) -> NOMTrace:
    """Run the alternating loop from an initial circuit until the indicator
    drops below epsilon or the iteration cap is reached."""
    circuit, theta = init
    theta = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    state = run_circuit(circuit, theta)
    initial_cost = cost_of_state(problem, state)
    records: list[IterationRecord] = []
    c1_hist: list[float] = []
    reason = "MaxIter"

    for t in range(1, cfg.max_iter + 1):
        try:
            grad = effective_gradient(problem, state)
            s_prime = gradient_step(state, grad, cfg.xi, cfg.sign)
        except Exception as exc:
            raise type(exc)(f"iteration {t}: {exc}") from exc
        indicator = float(np.clip(1.0 - fidelity(s_prime, state), 0.0, 1.0))

        if indicator < cfg.epsilon:
            records.append(
                IterationRecord(
                    t=t,
                    cost=cost_of_state(problem, state),
                    indicator=indicator,
                    c1_after_opt=indicator,
                    layer_added=False,
                    circuit_depth=circuit.depth,
                    fidelity_to_target=1.0 - indicator,
                )
            )
            reason = "IndicatorBelowEpsilon"
            break

        if cfg.mode == "ideal":
            state, c1, layer_added = s_prime, 0.0, False
        else:
            circuit, theta, c1, layer_added = reencode(
                circuit, theta, s_prime, cfg, rng=rng, c1_history=c1_hist
            )
            state = run_circuit(circuit, theta)
        if cfg.disturbance > 0:
            state = inject_disturbance(state, cfg.disturbance, rng)
        c1_hist.append(c1)

        records.append(
            IterationRecord(
                t=t,
                cost=cost_of_state(problem, state),
                indicator=indicator,
                c1_after_opt=float(np.clip(c1, 0.0, 1.0)),
                layer_added=layer_added,
                circuit_depth=circuit.depth,
                fidelity_to_target=float(np.clip(fidelity(s_prime, state), 0.0, 1.0)),
            )
        )
        if checkpoint_dir is not None:
            save_circuit(circuit, theta, os.path.join(checkpoint_dir, f"circuit_{t:04d}.json"))

    return NOMTrace(
        records=records,
        final_circuit=circuit,
        final_params=theta,
        final_state=state,
        termination_reason=reason,
        initial_cost=initial_cost,
    )


@dataclass(frozen=True)
class VanishingReport:
    grad_theta_norm: float
    indicator: float
    flagged: bool


def vanishing_detector(
    circuit: Circuit,
    theta: np.ndarray,
    problem: CostSpec,
    s_prime: np.ndarray,
    epsilon0: float = 0.002,
) -> VanishingReport:
    """Diagnose parameter-induced gradient vanishing.

    Flags the case where the circuit-parameter gradient of the cost is
    numerically zero while the state-space indicator 1 - |<s'|U|0>|^2 says
    the cost still has somewhere to go.
    """
    theta = np.asarray(theta, dtype=float)
    if problem.p == 1:
        grad = ansatz_gradient(circuit, theta, problem.F)
    else:
        h = 1e-5
        grad = np.zeros(circuit.n_params)
        for k in range(circuit.n_params):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += h
            tm[k] -= h
            grad[k] = (
                cost_of_state(problem, run_circuit(circuit, tp))
                - cost_of_state(problem, run_circuit(circuit, tm))
            ) / (2 * h)
    gn = float(np.linalg.norm(grad))
    indicator = float(np.clip(1.0 - fidelity(s_prime, run_circuit(circuit, theta)), 0.0, 1.0))
    return VanishingReport(grad_theta_norm=gn, indicator=indicator, flagged=gn <= 1e-6 and indicator > epsilon0)


def zspace_reference_descent(
    spec: CostSpec, z0: np.ndarray, xi: float, max_iter: int = 500, grad_tol: float = 1e-3
) -> list[np.ndarray]:
    """Plain chart-space iteration z <- z - xi * df/dconj(z) as a cross-check oracle.

    Uses finite-difference derivatives so it shares no code with the
    operator path; component 0 stays pinned at 1.
    """
    z = np.asarray(z0, dtype=complex).copy()
    traj = [z.copy()]
    for _ in range(max_iter):
        g = wirtinger_fd(spec, z)
        if np.linalg.norm(g) <= grad_tol:
            break
        z[1:] = z[1:] - xi * g
        traj.append(z.copy())
    return traj


def write_trace_csv(trace: NOMTrace, path: str) -> None:
    """One CSV row per iteration; floats are written via repr for bit-stable output."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in trace.records:
            writer.writerow(
                [r.t, repr(r.cost), repr(r.indicator), repr(r.c1_after_opt),
                 int(r.layer_added), r.circuit_depth, repr(r.fidelity_to_target)]
            )


def trace_summary(trace: NOMTrace) -> dict:
    final = trace.records[-1] if trace.records else None
    return {
        "iterations": len(trace.records),
        "termination_reason": trace.termination_reason,
        "initial_cost": trace.initial_cost,
        "final_cost": final.cost if final else trace.initial_cost,
        "final_depth": trace.final_circuit.depth,
        "layers_added": sum(r.layer_added for r in trace.records),
    }
