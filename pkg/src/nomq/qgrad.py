"""Quantum-gradient step: effective gradient operator, dense and LCU paths.

The effective gradient D at a state is the single-subsystem Hermitian
operator whose action on the state points along the steepest-descent
direction of the polynomial cost.  The dense path builds it by partial
trace; the LCU path realizes the update (I -+ xi D) as an ancilla circuit
with post-selection and must agree with the dense path exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostSpec
from .qcore import PauliString, expectation, partial_trace_keep_first, tensor_power


class SingularCoefficient(ValueError):
    """A Pauli-factor expectation vanished, leaving an LCU coefficient undefined."""

    def __init__(self, slots):
        self.slots = tuple(slots)
        super().__init__(f"vanishing denominator expectation at slots (term, factor): {self.slots}")


class PostSelectionFailure(RuntimeError):
    """The post-selected ancilla outcome has negligible probability."""


class DegenerateStep(RuntimeError):
    """The gradient update annihilated the state."""


@dataclass(frozen=True)
class GradientOperator:
    """Hermitian effective-gradient operator with its construction provenance."""

    D: np.ndarray
    built_at: np.ndarray
    path: str  # "dense" or "lcu"

    def __post_init__(self):
        dev = float(np.max(np.abs(self.D - np.conjugate(self.D.T))))
        if dev > 1e-10:
            raise ValueError(f"effective gradient not Hermitian: deviation {dev:.3e}")


@dataclass(frozen=True)
class LcuOutcome:
    """Post-selected principal state, exact success probability, and coefficients."""

    state: np.ndarray
    success_prob: float
    coefficients: np.ndarray


def _spec_for_state(spec: CostSpec, dim: int) -> CostSpec:
    if dim == spec.sub_dim:
        return spec
    if dim > spec.sub_dim:
        return spec.embedded(dim)
    raise ValueError(f"state dim {dim} smaller than subsystem dim {spec.sub_dim}")


def _effective_gradient_from(spec: CostSpec, v: np.ndarray, path: str) -> GradientOperator:
    spec = _spec_for_state(spec, v.size)
    dim = spec.sub_dim
    if spec.p == 1:
        d = spec.md().copy()  # empty trace: D reduces to F exactly
    else:
        rho = np.outer(v, np.conjugate(v))
        op = np.kron(np.eye(dim, dtype=complex), tensor_power(rho, spec.p - 1)) @ spec.md()
        d = partial_trace_keep_first(op, dim, spec.p)
        d = 0.5 * (d + np.conjugate(d.T))  # remove float asymmetry, checked in the dataclass
    return GradientOperator(D=d, built_at=np.array(v, dtype=complex), path=path)


def effective_gradient(spec: CostSpec, s: np.ndarray) -> GradientOperator:
    """Effective gradient built from the normalized state s (density-matrix form)."""
    s = np.asarray(s, dtype=complex)
    return _effective_gradient_from(spec, s, "dense")


def effective_gradient_raw(spec: CostSpec, z: np.ndarray) -> GradientOperator:
    """Effective gradient built from the raw (unnormalized) variable vector.

    With this construction D(z) z reproduces the conjugate derivatives
    d f / d conj(z) exactly; the normalized construction differs by the
    factor c0^{2(p-1)}.
    """
    z = np.asarray(z, dtype=complex)
    return _effective_gradient_from(spec, z, "dense")


def gradient_step(s: np.ndarray, D, xi: float, sign: str = "descent") -> np.ndarray:
    """Normalized (I -+ xi D) s; descent subtracts, ascent adds."""
    if xi <= 0:
        raise ValueError("learning rate xi must be positive")
    if sign not in ("descent", "ascent"):
        raise ValueError(f"unknown sign {sign!r}")
    d = D.D if isinstance(D, GradientOperator) else np.asarray(D, dtype=complex)
    s = np.asarray(s, dtype=complex)
    w = s - xi * (d @ s) if sign == "descent" else s + xi * (d @ s)
    n = np.linalg.norm(w)
    if n < 1e-12:
        raise DegenerateStep(f"update annihilated the state (norm {n:.3e})")
    return w / n


def _factored_slots(spec: CostSpec):
    if spec.factored is None:
        raise ValueError("LCU path needs a Pauli-factored cost spec")
    return [(a, i) for a, term in enumerate(spec.factored) for i in range(spec.p)]


def lcu_coefficients(spec: CostSpec, s: np.ndarray) -> np.ndarray:
    """Coefficients c_{a,i} with sum_{a,i} c_{a,i} F_{a,i} equal to the dense D.

    c_{a,i} is the product over slots j of a_{a,j} <F_{a,j}> divided by the
    bare expectation <F_{a,i}>; denominators below 1e-9 in magnitude raise
    SingularCoefficient with the offending slots.
    """
    s = np.asarray(s, dtype=complex)
    slots = _factored_slots(spec)
    expct = {}
    for a, term in enumerate(spec.factored):
        for j in range(spec.p):
            expct[(a, j)] = complex(np.vdot(s, term.slot_operator(j).apply(s)))
    bad = [key for key, v in expct.items() if abs(v) < 1e-9]
    if bad:
        raise SingularCoefficient(bad)
    coeffs = np.zeros(len(slots), dtype=complex)
    for m, (a, i) in enumerate(slots):
        term = spec.factored[a]
        num = np.prod([term.weights[j] * expct[(a, j)] for j in range(spec.p)])
        coeffs[m] = num / expct[(a, i)]
    return coeffs


def lcu_operator(spec: CostSpec, s: np.ndarray) -> GradientOperator:
    """Effective gradient reconstructed from LCU coefficients (cross-check path)."""
    s = np.asarray(s, dtype=complex)
    coeffs = lcu_coefficients(spec, s)
    d = np.zeros((spec.sub_dim, spec.sub_dim), dtype=complex)
    for c, (a, i) in zip(coeffs, _factored_slots(spec)):
        d += c * spec.factored[a].slot_operator(i).to_matrix()
    return GradientOperator(D=d, built_at=np.array(s), path="lcu")


def _householder_column(col: np.ndarray) -> np.ndarray:
    """Real orthogonal matrix whose first column is the given unit vector."""
    dim = col.size
    e0 = np.zeros(dim)
    e0[0] = 1.0
    w = e0 - col
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        return np.eye(dim)
    w /= nw
    return np.eye(dim) - 2.0 * np.outer(w, w)


def lcu_step_simulate(spec: CostSpec, s: np.ndarray, xi: float, sign: str = "descent") -> LcuOutcome:
    """Ancilla-register simulation of the gradient update with post-selection.

    Registers: one qubit splitting identity from gradient weight, a
    log2(#slots) coefficient register, and the principal register.  The
    circuit is prepare / multiplexed Pauli select / unprepare; projecting
    both ancilla registers onto zero leaves (I -+ xi D)|s> up to the overall
    normalization 1 + xi * sum|c|, whose square is the success probability.
    """
    if sign not in ("descent", "ascent"):
        raise ValueError(f"unknown sign {sign!r}")
    s = np.asarray(s, dtype=complex)
    coeffs = lcu_coefficients(spec, s)
    slots = _factored_slots(spec)
    n_slots = len(slots)
    abs_c = np.abs(coeffs)
    s_c = float(abs_c.sum())
    s_tot = 1.0 + xi * s_c

    e_dim = 1 << max(1, int(np.ceil(np.log2(n_slots))))
    dim_p = s.size

    # selected unitaries: weight-phase folded into the Pauli string, descent flips the sign
    step_sign = -1.0 if sign == "descent" else 1.0
    phases = np.where(abs_c > 0, coeffs / np.where(abs_c > 0, abs_c, 1.0), 0.0) * step_sign

    a = np.sqrt(1.0 / s_tot)
    b = np.sqrt(xi * s_c / s_tot)
    prep_d = np.array([[a, -b], [b, a]])

    col = np.zeros(e_dim)
    if s_c > 0:
        col[:n_slots] = np.sqrt(abs_c / s_c)
    else:
        col[0] = 1.0
    prep_e = _householder_column(col)

    psi = np.zeros((2, e_dim, dim_p), dtype=complex)
    psi[0, 0, :] = s
    psi = np.einsum("ab,bed->aed", prep_d.astype(complex), psi)
    psi[1] = prep_e.astype(complex) @ psi[1]
    for m, (a_idx, i_idx) in enumerate(slots):
        op = spec.factored[a_idx].slot_operator(i_idx)
        psi[1, m, :] = phases[m] * op.apply(psi[1, m, :])
    psi[1] = prep_e.T.astype(complex) @ psi[1]
    psi = np.einsum("ab,bed->aed", prep_d.T.astype(complex), psi)

    amp = psi[0, 0, :]
    success = float(np.sum(np.abs(amp) ** 2))
    if success < 1e-12:
        raise PostSelectionFailure(f"post-selection probability {success:.3e}")
    return LcuOutcome(state=amp / np.sqrt(success), success_prob=success, coefficients=coeffs)
