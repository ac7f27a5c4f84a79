"""Dense complex linear algebra and multi-qubit state primitives.

States are plain numpy arrays of complex amplitudes, operators are square
complex matrices.  In a p-fold tensor product, subsystem 1 occupies the
most-significant index block (numpy.kron order); every permutation and
partial trace in this package relies on that convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two vectors or matrices."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def tensor_power(a: np.ndarray, p: int) -> np.ndarray:
    """p-fold Kronecker power; p = 0 gives the scalar identity."""
    if p < 0:
        raise ValueError("tensor power requires p >= 0")
    out = np.array([1.0 + 0.0j]) if np.asarray(a).ndim == 1 else np.eye(1, dtype=complex)
    for _ in range(p):
        out = np.kron(out, a)
    return out


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return np.asarray(v, dtype=complex) / n


def basis_state(dim: int, index: int = 0) -> np.ndarray:
    s = np.zeros(dim, dtype=complex)
    s[index] = 1.0
    return s


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conjugate(m.T)


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(m - dagger(m))) <= tol)


def partial_trace_keep_first(m: np.ndarray, sub_dim: int, p: int) -> np.ndarray:
    """Trace out subsystems 2..p of an operator on p sub_dim-dimensional parts.

    Returns the sub_dim x sub_dim operator on subsystem 1.
    """
    m = np.asarray(m, dtype=complex)
    dim = sub_dim**p
    if m.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got {m.shape}")
    if p == 1:
        return m.copy()
    rest = dim // sub_dim
    return np.einsum("irjr->ij", m.reshape(sub_dim, rest, sub_dim, rest))


def permutation_operator(p: int, k: int, sub_dim: int) -> np.ndarray:
    """Operator swapping subsystems 1 and k of a p-fold tensor product.

    k = 1 gives the identity; the result is a real 0/1 involution.
    """
    if not 1 <= k <= p:
        raise ValueError(f"subsystem index k={k} outside 1..{p}")
    dim = sub_dim**p
    idx = np.arange(dim)
    digits = [(idx // sub_dim ** (p - 1 - j)) % sub_dim for j in range(p)]
    digits[0], digits[k - 1] = digits[k - 1], digits[0]
    swapped = sum(d * sub_dim ** (p - 1 - j) for j, d in enumerate(digits))
    op = np.zeros((dim, dim), dtype=complex)
    op[swapped, idx] = 1.0
    return op


def embed_subsystems(m: np.ndarray, sub_dim: int, p: int, new_sub_dim: int) -> np.ndarray:
    """Zero-pad each tensor factor of an operator on p subsystems to new_sub_dim."""
    if new_sub_dim < sub_dim:
        raise ValueError("embedding cannot shrink a subsystem")
    if new_sub_dim == sub_dim:
        return np.asarray(m, dtype=complex).copy()
    t = np.asarray(m, dtype=complex).reshape([sub_dim] * (2 * p))
    t = np.pad(t, [(0, new_sub_dim - sub_dim)] * (2 * p))
    return t.reshape(new_sub_dim**p, new_sub_dim**p)


@lru_cache(maxsize=4096)
def _pauli_action(factors: str) -> tuple[np.ndarray, np.ndarray]:
    """(src, phase) such that (P s)[j] = phase[j] * s[src[j]].

    Site 0 is the most-significant qubit.  A Pauli string maps each basis
    state to a single basis state, so its action is a permutation with phases.
    """
    n = len(factors)
    dim = 1 << n
    xmask = 0
    for q, f in enumerate(factors):
        if f in "XY":
            xmask |= 1 << (n - 1 - q)
    idx = np.arange(dim)
    src = idx ^ xmask
    phase = np.ones(dim, dtype=complex)
    for q, f in enumerate(factors):
        if f in "IX":
            continue
        bit = (src >> (n - 1 - q)) & 1
        if f == "Z":
            phase = phase * (1 - 2 * bit)
        else:  # Y
            phase = phase * (1j * (1 - 2 * bit))
    src.setflags(write=False)
    phase.setflags(write=False)
    return src, phase


@dataclass(frozen=True)
class PauliString:
    """Weighted tensor product of single-site Pauli factors, e.g. 0.5 * ZIZY."""

    factors: str
    weight: complex = 1.0

    def __post_init__(self):
        if not self.factors or any(f not in "IXYZ" for f in self.factors):
            raise ValueError(f"invalid Pauli factors: {self.factors!r}")
        if not np.isfinite(self.weight):
            raise ValueError("Pauli weight must be finite")

    @property
    def n_sites(self) -> int:
        return len(self.factors)

    @property
    def dim(self) -> int:
        return 1 << len(self.factors)

    def apply(self, state: np.ndarray) -> np.ndarray:
        src, phase = _pauli_action(self.factors)
        return self.weight * (phase * state[src])

    def to_matrix(self) -> np.ndarray:
        src, phase = _pauli_action(self.factors)
        m = np.zeros((self.dim, self.dim), dtype=complex)
        m[np.arange(self.dim), src] = self.weight * phase
        return m


@dataclass(frozen=True)
class PauliSum:
    """Sum of same-length Pauli strings; Hermitian iff all weights are real."""

    terms: tuple[PauliString, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("PauliSum needs at least one term (use weight 0 for zero)")
        n = self.terms[0].n_sites
        if any(t.n_sites != n for t in self.terms):
            raise ValueError("all Pauli terms must act on the same number of sites")

    @property
    def n_sites(self) -> int:
        return self.terms[0].n_sites

    @property
    def dim(self) -> int:
        return self.terms[0].dim

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(t.weight.imag if isinstance(t.weight, complex) else 0.0) <= tol for t in self.terms)

    def apply(self, state: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(state, dtype=complex))
        for t in self.terms:
            out += t.apply(state)
        return out

    def to_matrix(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.terms:
            m += t.to_matrix()
        return m

    def expectation(self, state: np.ndarray) -> complex:
        return complex(np.vdot(state, self.apply(state)))


def pauli_matrix(ps: PauliString) -> np.ndarray:
    """Dense matrix of a weighted Pauli string."""
    return ps.to_matrix()


def expectation(state: np.ndarray, op: np.ndarray) -> complex:
    """<state| op |state> for a dense operator."""
    state = np.asarray(state, dtype=complex)
    op = np.asarray(op, dtype=complex)
    if op.shape != (state.size, state.size):
        raise ValueError(f"operator shape {op.shape} does not match state dim {state.size}")
    return complex(np.vdot(state, op @ state))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Squared overlap |<a|b>|^2 of two normalized states."""
    return float(abs(np.vdot(a, b)) ** 2)
