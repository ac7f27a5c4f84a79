"""Parameterized circuits: gates, state application, fidelity, training.

Gate conventions: RX/RY/RZ and RXX/RYY/RZZ are exp(-i * theta * P / 2) for the
matching Pauli string P.  EXP_HC(gamma) and EXP_HB(beta) are the full-angle
exponentials exp(-i * gamma * H_c) and exp(-i * beta * H_b) of the cut and
mixer observables of a graph (H_b sums X over all sites).  At zero angles
every circuit acts as the identity, and trial states are always prepared
from |0...0>.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.optimize

from .cost import Graph
from .qcore import PauliString, _pauli_action, basis_state, fidelity

SINGLE_KINDS = ("RX", "RY", "RZ")
TWO_KINDS = ("RXX", "RYY", "RZZ")
GLOBAL_KINDS = ("EXP_HC", "EXP_HB")
GATE_KINDS = SINGLE_KINDS + TWO_KINDS + GLOBAL_KINDS

POLISH_BUDGET = 500


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    param_index: int

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in SINGLE_KINDS and len(self.qubits) != 1:
            raise ValueError(f"{self.kind} takes exactly one site")
        if self.kind in TWO_KINDS and (len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]):
            raise ValueError(f"{self.kind} takes two distinct sites")
        if self.param_index < 0:
            raise ValueError("negative parameter index")


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over a fixed register; gates earlier in the list act first."""

    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int
    graph: Graph | None = None

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} outside the {self.n_qubits}-qubit register")
            if g.param_index >= self.n_params:
                raise ValueError(f"gate {g} indexes past n_params={self.n_params}")
            if g.kind == "EXP_HC" and self.graph is None:
                raise ValueError("EXP_HC gates need the circuit to carry a graph")

    @property
    def depth(self) -> int:
        return len(self.gates)

    def appended(self, other: "Circuit") -> tuple["Circuit", int]:
        """Concatenate another circuit after this one; its params are offset by n_params."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("register sizes differ")
        shifted = tuple(replace(g, param_index=g.param_index + self.n_params) for g in other.gates)
        graph = self.graph or other.graph
        merged = Circuit(self.n_qubits, self.gates + shifted, self.n_params + other.n_params, graph)
        return merged, self.n_params


def empty_circuit(n_qubits: int, graph: Graph | None = None) -> Circuit:
    return Circuit(n_qubits, (), 0, graph)


@lru_cache(maxsize=2048)
def _rotation_factors(n_qubits: int, kind: str, qubits: tuple[int, ...]) -> str:
    letter = kind[1]  # RX->X, RXX->X, ...
    return "".join(letter if q in qubits else "I" for q in range(n_qubits))


@lru_cache(maxsize=64)
def _cut_counts(n_qubits: int, edges: tuple[tuple[int, int], ...]) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    counts = np.zeros(idx.size)
    for i, j in edges:
        bi = (idx >> (n_qubits - 1 - i)) & 1
        bj = (idx >> (n_qubits - 1 - j)) & 1
        counts += bi ^ bj
    counts.setflags(write=False)
    return counts


def _apply_gate(state: np.ndarray, gate: Gate, angle: float, circuit: Circuit) -> np.ndarray:
    n = circuit.n_qubits
    if gate.kind in SINGLE_KINDS or gate.kind in TWO_KINDS:
        src, phase = _pauli_action(_rotation_factors(n, gate.kind, gate.qubits))
        half = 0.5 * angle
        return math.cos(half) * state - 1j * math.sin(half) * (phase * state[src])
    if gate.kind == "EXP_HC":
        cuts = _cut_counts(n, circuit.graph.edges)
        return state * np.exp(-1j * angle * cuts)
    # EXP_HB: product of commuting full-angle X rotations
    out = state
    c, s = math.cos(angle), math.sin(angle)
    for q in range(n):
        src, phase = _pauli_action(_rotation_factors(n, "RX", (q,)))
        out = c * out - 1j * s * (phase * out[src])
    return out


def _apply_with_angles(circuit: Circuit, angles: np.ndarray, state: np.ndarray) -> np.ndarray:
    out = np.asarray(state, dtype=complex)
    for g, a in zip(circuit.gates, angles):
        out = _apply_gate(out, g, float(a), circuit)
    return out


def _gate_angles(circuit: Circuit, theta: np.ndarray) -> np.ndarray:
    return np.array([theta[g.param_index] for g in circuit.gates], dtype=float)


def apply_circuit(circuit: Circuit, theta: np.ndarray, s_in: np.ndarray) -> np.ndarray:
    """State after the circuit acts on s_in."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {theta.size}")
    if np.asarray(s_in).size != 1 << circuit.n_qubits:
        raise ValueError("input state does not match the register size")
    return _apply_with_angles(circuit, _gate_angles(circuit, theta), s_in)


def run_circuit(circuit: Circuit, theta: np.ndarray) -> np.ndarray:
    """Trial state U(theta)|0...0>."""
    return apply_circuit(circuit, theta, basis_state(1 << circuit.n_qubits))


def fidelity_indicator(circuit: Circuit, theta: np.ndarray, target: np.ndarray) -> float:
    """Infidelity 1 - |<target| U(theta) |0>|^2, invariant under global phase."""
    val = 1.0 - fidelity(target, run_circuit(circuit, theta))
    return float(min(max(val, 0.0), 1.0))


def _overlap_infidelity(circuit: Circuit, theta: np.ndarray, s_in: np.ndarray, target: np.ndarray) -> float:
    val = 1.0 - fidelity(target, apply_circuit(circuit, theta, s_in))
    return float(min(max(val, 0.0), 1.0))


def _compile_objective(circuit: Circuit, s_in: np.ndarray, target: np.ndarray):
    """Closure computing the overlap infidelity with pre-resolved gate tables."""
    n = circuit.n_qubits
    ops = []
    for g in circuit.gates:
        if g.kind in SINGLE_KINDS or g.kind in TWO_KINDS:
            src, phase = _pauli_action(_rotation_factors(n, g.kind, g.qubits))
            ops.append(("rot", g.param_index, src, phase))
        elif g.kind == "EXP_HC":
            ops.append(("diag", g.param_index, _cut_counts(n, circuit.graph.edges), None))
        else:
            xs = [_pauli_action(_rotation_factors(n, "RX", (q,))) for q in range(n)]
            ops.append(("hb", g.param_index, xs, None))
    tgt = np.conjugate(np.asarray(target, dtype=complex))
    s0 = np.asarray(s_in, dtype=complex)

    def infidelity(theta: np.ndarray) -> float:
        s = s0
        for kind, pi, a, b in ops:
            th = theta[pi]
            if kind == "rot":
                s = math.cos(0.5 * th) * s - 1j * math.sin(0.5 * th) * (b * s[a])
            elif kind == "diag":
                s = s * np.exp(-1j * th * a)
            else:
                c, sn = math.cos(th), math.sin(th)
                for src, phase in a:
                    s = c * s - 1j * sn * (phase * s[src])
        val = 1.0 - abs(tgt @ s) ** 2
        return val if 0.0 <= val <= 1.0 else float(min(max(val, 0.0), 1.0))

    return infidelity


def _optimize_overlap(
    circuit: Circuit,
    theta0: np.ndarray,
    s_in: np.ndarray,
    target: np.ndarray,
    budget: int = POLISH_BUDGET,
    seed: int = 0,
    stop_below: float | None = None,
    restarts: bool = True,
) -> tuple[np.ndarray, float]:
    """Derivative-free infidelity minimization: warm-started Nelder-Mead with seeded restarts."""
    theta0 = np.asarray(theta0, dtype=float)
    fun = _compile_objective(circuit, s_in, target)
    best_x = theta0.copy()
    best_f = fun(theta0)
    if circuit.n_params == 0 or budget <= 1:
        return best_x, best_f
    rng = np.random.default_rng(seed)
    remaining = budget - 1
    scale = 0.2
    first = True
    while remaining > 4 and (stop_below is None or best_f > stop_below):
        x0 = best_x if first else best_x + rng.normal(0.0, scale, size=best_x.size)
        scale = min(2.0 * scale, 3.0)

        callback = None
        if stop_below is not None:

            def callback(xk):
                if fun(xk) <= stop_below:
                    raise StopIteration

        # scipy's default simplex barely perturbs zero coordinates; angles need
        # an O(1) spread to move at all
        simplex = np.tile(x0, (x0.size + 1, 1))
        for i in range(x0.size):
            simplex[i + 1, i] += 0.4
        res = scipy.optimize.minimize(
            fun,
            x0,
            method="Nelder-Mead",
            callback=callback,
            options={"maxfev": remaining, "xatol": 1e-8, "fatol": 1e-12, "initial_simplex": simplex},
        )
        remaining -= max(int(res.nfev), 1)
        if res.fun < best_f:
            best_f = float(res.fun)
            best_x = np.asarray(res.x, dtype=float)
        if first and not restarts:
            break
        first = False
    return best_x, best_f


def optimize_params(
    circuit: Circuit,
    theta0: np.ndarray,
    target: np.ndarray,
    budget: int = POLISH_BUDGET,
    seed: int = 0,
    stop_below: float | None = None,
) -> tuple[np.ndarray, float]:
    """Minimize the trial-state infidelity to a target; never worse than theta0."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    s_in = basis_state(1 << circuit.n_qubits)
    return _optimize_overlap(circuit, theta0, s_in, target, budget, seed, stop_below)


def expectation_value(circuit: Circuit, theta: np.ndarray, obs: np.ndarray) -> float:
    s = run_circuit(circuit, theta)
    val = complex(np.vdot(s, obs @ s))
    return float(val.real)


def ansatz_gradient(circuit: Circuit, theta: np.ndarray, obs: np.ndarray, fd_step: float = 1e-5) -> np.ndarray:
    """d <obs> / d theta_k for every parameter.

    Pauli rotations use the exact two-point shift rule, summed over every
    gate sharing the parameter; EXP_HC / EXP_HB composites fall back to
    central differences.
    """
    theta = np.asarray(theta, dtype=float)
    angles = _gate_angles(circuit, theta)
    s0 = basis_state(1 << circuit.n_qubits)

    def exp_at(g_angles):
        s = _apply_with_angles(circuit, g_angles, s0)
        return float(np.vdot(s, obs @ s).real)

    grad = np.zeros(circuit.n_params)
    for k in range(circuit.n_params):
        occ = [gi for gi, g in enumerate(circuit.gates) if g.param_index == k]
        if not occ:
            continue
        if any(circuit.gates[gi].kind in GLOBAL_KINDS for gi in occ):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += fd_step
            tm[k] -= fd_step
            grad[k] = (
                exp_at(_gate_angles(circuit, tp)) - exp_at(_gate_angles(circuit, tm))
            ) / (2 * fd_step)
            continue
        total = 0.0
        for gi in occ:
            ap, am = angles.copy(), angles.copy()
            ap[gi] += math.pi / 2
            am[gi] -= math.pi / 2
            total += 0.5 * (exp_at(ap) - exp_at(am))
        grad[k] = total
    return grad


def optimize_expectation(
    circuit: Circuit,
    theta0: np.ndarray,
    obs: np.ndarray,
    maximize: bool = True,
    grad_tol: float = 1e-6,
    budget: int = 2000,
    seed: int = 0,
) -> tuple[np.ndarray, float, float]:
    """Drive <obs> to a stationary point: Nelder-Mead then a gradient polish.

    Returns (theta, value, gradient norm); stops at grad_tol or when the
    evaluation budget runs out.
    """
    theta0 = np.asarray(theta0, dtype=float)
    sign = -1.0 if maximize else 1.0
    counter = {"n": 0}

    def fun(x):
        counter["n"] += 1
        return sign * expectation_value(circuit, x, obs)

    if circuit.n_params == 0:
        return theta0, expectation_value(circuit, theta0, obs), 0.0
    rng = np.random.default_rng(seed)
    best_x, best_f = theta0.copy(), fun(theta0)
    scale = 0.3
    while counter["n"] < budget // 2:
        x0 = best_x if counter["n"] <= 1 else best_x + rng.normal(0.0, scale, best_x.size)
        res = scipy.optimize.minimize(
            fun, x0, method="Nelder-Mead",
            options={"maxfev": budget // 2 - counter["n"] + 1, "xatol": 1e-9, "fatol": 1e-13},
        )
        if res.fun < best_f:
            best_f, best_x = float(res.fun), np.asarray(res.x, dtype=float)
        scale *= 2.0
    # polish with exact gradients until stationary
    theta = best_x
    for _ in range(200):
        g = ansatz_gradient(circuit, theta, obs)
        gn = float(np.linalg.norm(g))
        if gn <= grad_tol or counter["n"] >= budget:
            break
        step = 0.5
        cur = fun(theta)
        while step > 1e-12:
            cand = theta - step * sign * g  # descend fun = sign * <obs>
            if fun(cand) < cur - 1e-18:
                theta = cand
                break
            step *= 0.5
        else:
            break
    g = ansatz_gradient(circuit, theta, obs)
    return theta, expectation_value(circuit, theta, obs), float(np.linalg.norm(g))


ANSATZ_IDS = ("QAOA1", "QAOA1_RX", "HWE", "HWE_RY")


def ansatz_library(ansatz_id: str, graph: Graph) -> Circuit:
    """The four depth-1 benchmark circuits for the Max-Cut experiments.

    QAOA1 applies the cut exponential then the mixer exponential; QAOA1_RX
    inserts a global RX between them; HWE chains two XX and two ZZ pair
    rotations; HWE_RY inserts a global RY in the middle.  Two-site
    exponentials are realized by the half-angle rotation gates (a factor-2
    reparameterization of the angle).
    """
    key = ansatz_id.upper()
    n = graph.n
    if key == "QAOA1":
        gates = [Gate("EXP_HC", tuple(range(n)), 0), Gate("EXP_HB", tuple(range(n)), 1)]
        return Circuit(n, tuple(gates), 2, graph)
    if key == "QAOA1_RX":
        gates = [Gate("EXP_HC", tuple(range(n)), 0)]
        gates += [Gate("RX", (q,), 1) for q in range(n)]
        gates.append(Gate("EXP_HB", tuple(range(n)), 2))
        return Circuit(n, tuple(gates), 3, graph)
    if key in ("HWE", "HWE_RY"):
        if n != 4:
            raise ValueError("the pairwise ansatz is defined on four qubits")
        gates = [Gate("RXX", (0, 1), 0), Gate("RXX", (2, 3), 1)]
        k = 2
        if key == "HWE_RY":
            gates += [Gate("RY", (q,), k) for q in range(n)]
            k += 1
        gates += [Gate("RZZ", (1, 2), k), Gate("RZZ", (0, 3), k + 1)]
        return Circuit(n, tuple(gates), k + 2, graph)
    raise ValueError(f"unknown ansatz id {ansatz_id!r}")


def gate_generator_matrix(circuit: Circuit, gate: Gate) -> np.ndarray:
    """Dense Hermitian G with the gate unitary equal to exp(-i * angle * G)."""
    n = circuit.n_qubits
    if gate.kind in SINGLE_KINDS or gate.kind in TWO_KINDS:
        return 0.5 * PauliString(_rotation_factors(n, gate.kind, gate.qubits)).to_matrix()
    if gate.kind == "EXP_HC":
        return np.diag(_cut_counts(n, circuit.graph.edges)).astype(complex)
    hb = np.zeros((1 << n, 1 << n), dtype=complex)
    for q in range(n):
        hb += PauliString(_rotation_factors(n, "RX", (q,))).to_matrix()
    return hb


def gate_unitary(circuit: Circuit, gate: Gate, angle: float) -> np.ndarray:
    """Dense unitary of a single gate at the given angle."""
    dim = 1 << circuit.n_qubits
    cols = np.eye(dim, dtype=complex)
    return np.column_stack([_apply_gate(cols[:, j], gate, angle, circuit) for j in range(dim)])


def circuit_to_dict(circuit: Circuit, theta: np.ndarray) -> dict:
    return {
        "n_qubits": circuit.n_qubits,
        "graph": None if circuit.graph is None else {"n": circuit.graph.n, "edges": [list(e) for e in circuit.graph.edges]},
        "gates": [{"kind": g.kind, "qubits": list(g.qubits), "param_index": g.param_index} for g in circuit.gates],
        "params": [float(v) for v in np.asarray(theta, dtype=float)],
    }


def circuit_from_dict(data: dict) -> tuple[Circuit, np.ndarray]:
    graph = None
    if data.get("graph"):
        graph = Graph(data["graph"]["n"], tuple(tuple(e) for e in data["graph"]["edges"]))
    gates = tuple(Gate(g["kind"], tuple(g["qubits"]), g["param_index"]) for g in data["gates"])
    params = np.asarray(data["params"], dtype=float)
    circuit = Circuit(data["n_qubits"], gates, params.size, graph)
    return circuit, params


def save_circuit(circuit: Circuit, theta: np.ndarray, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(circuit_to_dict(circuit, theta), fh, indent=1)


def load_circuit(path: str) -> tuple[Circuit, np.ndarray]:
    with open(path) as fh:
        return circuit_from_dict(json.load(fh))
