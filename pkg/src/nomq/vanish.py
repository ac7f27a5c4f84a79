"""Monte-Carlo checks of the gradient-concentration bounds and the
layer-derivative (barren-plateau) formula.

The concentration experiments sample random gradient/Jacobian pairs with the
variance scalings that make the analytic tail bounds applicable, and compare
empirical tail frequencies against those bounds.  The layer-derivative check
computes the commutator form of d c2 / d alpha_k and confirms it against
central differences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .pqc import Circuit, apply_circuit, gate_generator_matrix, gate_unitary
from .qcore import dagger, fidelity


@dataclass
class BoundExperiment:
    d: int
    epsilon: float
    samples: int = 10_000
    m: int = 1
    C: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if self.samples < 1_000:
            raise ValueError("need at least 1e3 samples")


def _tail_sigma(bound: float, samples: int) -> float:
    b = min(max(bound, 0.0), 1.0)
    return float(np.sqrt(b * (1.0 - b) / samples))


def lemma1_mc(exp: BoundExperiment) -> dict:
    """Tail of |<u, v>| for real Gaussian(0, 1/d) vectors vs 4 exp(-d eps^2 / 8)."""
    rng = np.random.default_rng(exp.seed)
    scale = np.sqrt(1.0 / exp.d)
    u = rng.normal(0.0, scale, (exp.samples, exp.d))
    v = rng.normal(0.0, scale, (exp.samples, exp.d))
    ips = np.abs(np.einsum("ij,ij->i", u, v))
    empirical = float(np.mean(ips >= exp.epsilon))
    bound = float(4.0 * np.exp(-exp.d * exp.epsilon**2 / 8.0))
    return {
        "empirical_tail": empirical,
        "analytic_bound": bound,
        "sigma": _tail_sigma(bound, exp.samples),
    }


def result1_mc(exp: BoundExperiment) -> dict:
    """Tail of the parameter-gradient norm against 8 m exp(-d eps^2 / (128 C^2 m)).

    The cost gradient and the m Jacobian rows are complex vectors whose real
    and imaginary components are Gaussian(0, C/d), keeping their norms
    d-independent; the parameter gradient collects the m inner products.
    """
    rng = np.random.default_rng(exp.seed)
    scale = np.sqrt(exp.C / exp.d)
    grad = rng.normal(0.0, scale, (exp.samples, exp.d)) + 1j * rng.normal(0.0, scale, (exp.samples, exp.d))
    rows = rng.normal(0.0, scale, (exp.samples, exp.m, exp.d)) + 1j * rng.normal(
        0.0, scale, (exp.samples, exp.m, exp.d)
    )
    ips = np.einsum("smd,sd->sm", np.conjugate(rows), grad)
    norms = np.sqrt(np.sum(np.abs(ips) ** 2, axis=1))
    empirical = float(np.mean(norms >= exp.epsilon))
    bound = float(8.0 * exp.m * np.exp(-exp.d * exp.epsilon**2 / (128.0 * exp.C**2 * exp.m)))
    return {
        "empirical_tail": empirical,
        "analytic_bound": bound,
        "sigma": _tail_sigma(bound, exp.samples),
    }


def run_bound_grid(
    ds=(16, 64, 256),
    epsilons=(0.2, 0.4),
    ms=(1, 8),
    samples: int = 10_000,
    C: float = 1.0,
    seed: int = 0,
) -> list[dict]:
    """Full concentration grid; one row per (kind, d, epsilon, m) cell."""
    rows = []
    cell = 0
    for d in ds:
        for eps in epsilons:
            exp = BoundExperiment(d=d, epsilon=eps, samples=samples, C=C, seed=seed + cell)
            res = lemma1_mc(exp)
            rows.append({"kind": "pair", "d": d, "epsilon": eps, "m": 0, **res})
            cell += 1
            for m in ms:
                exp = BoundExperiment(d=d, epsilon=eps, samples=samples, m=m, C=C, seed=seed + cell)
                res = result1_mc(exp)
                rows.append({"kind": "gradient", "d": d, "epsilon": eps, "m": m, **res})
                cell += 1
    return rows


def write_bound_grid_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "d", "epsilon", "m", "empirical", "bound", "sigma"])
        for r in rows:
            writer.writerow(
                [r["kind"], r["d"], repr(r["epsilon"]), r["m"],
                 repr(r["empirical_tail"]), repr(r["analytic_bound"]), repr(r["sigma"])]
            )


def _infidelity(t_circuit: Circuit, alpha: np.ndarray, z: np.ndarray, z_prime: np.ndarray) -> float:
    return 1.0 - fidelity(z_prime, apply_circuit(t_circuit, alpha, z))


def bp_gradient_check(
    t_circuit: Circuit,
    alpha: np.ndarray,
    k: int,
    z: np.ndarray,
    z_prime: np.ndarray,
    fd_step: float = 1e-5,
) -> dict:
    """d c2 / d alpha_k of the layer infidelity, analytic and by central differences.

    With gate k generated by G_k (unitary exp(-i alpha G_k)), splitting the
    layer as T = T_plus T_k T_rest gives the commutator form
    i <z| T_minus^dag [M, G_k] T_minus |z>, M = T_plus^dag rho' T_plus,
    where T_minus collects gates up to and including k.
    """
    alpha = np.asarray(alpha, dtype=float)
    if not 0 <= k < t_circuit.n_params:
        raise ValueError(f"parameter index {k} out of range")
    occ = [gi for gi, g in enumerate(t_circuit.gates) if g.param_index == k]
    if len(occ) != 1:
        raise ValueError("the layer-derivative formula needs a uniquely-placed parameter")
    gi = occ[0]
    dim = z.size

    t_minus = np.eye(dim, dtype=complex)
    for g in t_circuit.gates[: gi + 1]:
        t_minus = gate_unitary(t_circuit, g, alpha[g.param_index]) @ t_minus
    t_plus = np.eye(dim, dtype=complex)
    for g in t_circuit.gates[gi + 1 :]:
        t_plus = gate_unitary(t_circuit, g, alpha[g.param_index]) @ t_plus

    gk = gate_generator_matrix(t_circuit, t_circuit.gates[gi])
    rho_prime = np.outer(z_prime, np.conjugate(z_prime))
    m = dagger(t_plus) @ rho_prime @ t_plus
    comm = m @ gk - gk @ m
    w = t_minus @ z
    analytic = float((1j * np.vdot(w, comm @ w)).real)

    ap, am = alpha.copy(), alpha.copy()
    ap[k] += fd_step
    am[k] -= fd_step
    finite = (_infidelity(t_circuit, ap, z, z_prime) - _infidelity(t_circuit, am, z, z_prime)) / (2 * fd_step)
    return {"analytic": analytic, "finite_diff": float(finite)}
