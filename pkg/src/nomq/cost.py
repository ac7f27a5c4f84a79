"""Polynomial cost functions, Max-Cut observables, and gradient oracles.

A cost f(z) = z^{dagger x p} F z^{x p} is a degree-2p polynomial over the
variable vector, fixed by a Hermitian coefficient matrix F on p subsystems.
Two evaluation modes exist: "affine" works on variable vectors with z[0] = 1,
"rawstate" treats z as a normalized register state (the eigenproblem case).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .qcore import (
    PauliString,
    PauliSum,
    dagger,
    embed_subsystems,
    permutation_operator,
    tensor_power,
)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph given by vertex count and edge list."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(sorted(e)) for e in self.edges))
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) outside vertex range [0,{self.n})")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))


# The 4-cycle in its canonical labeling (4 nodes, 4 edges).
C4 = Graph.cycle(4)

# Default benchmark graph: the 4-cycle traversed 0-2-1-3.  With the canonical
# labeling the fixed two-site pairs of the hardware-style ansatz keep every
# reachable state inside a cut-2 eigenspace of the diagonal cut observable,
# which no gradient flow can leave; this isomorphic labeling removes the trap.
DEFAULT_GRAPH = Graph(4, ((0, 2), (2, 1), (1, 3), (3, 0)))


@dataclass(frozen=True)
class FactoredTerm:
    """One term of F = sum_a  (x)_j  a_{a,j} F_{a,j}: weights and unitary Pauli factors per slot."""

    weights: tuple[complex, ...]
    factors: tuple[str, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.factors):
            raise ValueError("one weight per tensor slot required")
        if len({len(f) for f in self.factors}) != 1:
            raise ValueError("all slots must act on the same number of qubits")

    def slot_operator(self, j: int) -> PauliString:
        return PauliString(self.factors[j], 1.0)

    def to_matrix(self) -> np.ndarray:
        out = np.array([1.0 + 0.0j])
        for w, f in zip(self.weights, self.factors):
            out = np.kron(out, w * PauliString(f).to_matrix())
        return out


@dataclass
class CostSpec:
    """Half-degree p plus the Hermitian coefficient matrix, optionally Pauli-factored."""

    p: int
    F: np.ndarray
    factored: tuple[FactoredTerm, ...] | None = None
    mode: str = "affine"
    _md: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=complex)
        if self.p < 1:
            raise ValueError("half-degree p must be >= 1")
        if self.mode not in ("affine", "rawstate"):
            raise ValueError(f"unknown mode {self.mode!r}")
        dim = self.F.shape[0]
        if self.F.shape != (dim, dim):
            raise ValueError("coefficient matrix must be square")
        sub = round(dim ** (1.0 / self.p))
        if sub**self.p != dim:
            raise ValueError(f"matrix dim {dim} is not a {self.p}-th power")
        if np.max(np.abs(self.F - dagger(self.F))) > 1e-12:
            raise ValueError("coefficient matrix must be Hermitian (tol 1e-12)")
        if self.factored is not None:
            self.factored = tuple(self.factored)
            dense = sum(t.to_matrix() for t in self.factored)
            if np.max(np.abs(dense - self.F)) > 1e-10:
                raise ValueError("factored form does not expand to the coefficient matrix")

    @property
    def sub_dim(self) -> int:
        return round(self.F.shape[0] ** (1.0 / self.p))

    @property
    def d(self) -> int:
        """Number of free variables in affine mode (subsystem dim minus one)."""
        return self.sub_dim - 1

    def md(self) -> np.ndarray:
        if self._md is None:
            self._md = build_MD(self)
        return self._md

    def embedded(self, new_sub_dim: int) -> "CostSpec":
        """Spec with each tensor factor zero-padded to a larger subsystem dim."""
        if new_sub_dim == self.sub_dim:
            return self
        return CostSpec(
            p=self.p,
            F=embed_subsystems(self.F, self.sub_dim, self.p, new_sub_dim),
            factored=None,
            mode=self.mode,
        )


def eval_cost(spec: CostSpec, z: np.ndarray) -> float:
    """Polynomial value z^{dagger x p} F z^{x p}; the imaginary residue must be tiny."""
    z = np.asarray(z, dtype=complex)
    if z.size != spec.sub_dim:
        raise ValueError(f"variable vector dim {z.size} does not match subsystem dim {spec.sub_dim}")
    zp = tensor_power(z, spec.p)
    val = complex(np.vdot(zp, spec.F @ zp))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"cost has imaginary residue {val.imag:.3e}")
    return float(val.real)


def eval_quartic_expanded(z: np.ndarray) -> float:
    """Monomial form of the degree-4 benchmark polynomial on three variables.

    Independent oracle for eval_cost with the X+Y+Z quartic coefficient
    matrix; accepts z = (1, z1, z2, z3).
    """
    z = np.asarray(z, dtype=complex)
    if z.size != 4:
        raise ValueError("expanded form is defined for exactly three variables")
    if abs(z[0] - 1.0) > 1e-12:
        raise ValueError("variable vector must have first component 1")
    z1, z2, z3 = z[1], z[2], z[3]
    c1, c2, c3 = np.conjugate(z1), np.conjugate(z2), np.conjugate(z3)
    val = (
        z1**2 * c1**2
        + z2**2 * c2**2
        + z3**2 * c3**2
        + 2 * (c1**2 * z2**2 + z1**2 * c2**2)
        + 6 * z1 * z2 * c1 * c2
        - 2 * z1 * z3 * c1 * c3
        - 2 * z2 * z3 * c2 * c3
        - 2 * z1 * c1
        - 2 * z2 * c2
        + 6 * z3 * c3
        + 2 * (z3**2 + c3**2)
        + 1
    )
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"cost has imaginary residue {val.imag:.3e}")
    return float(val.real)


def maxcut_hamiltonian(g: Graph) -> PauliSum:
    """Cut-counting observable: sum over edges of (1 - Z_i Z_j) / 2."""
    terms = []
    for i, j in g.edges:
        zz = "".join("Z" if q in (i, j) else "I" for q in range(g.n))
        terms.append(PauliString("I" * g.n, 0.5))
        terms.append(PauliString(zz, -0.5))
    if not terms:
        terms = [PauliString("I" * g.n, 0.0)]
    return PauliSum(tuple(terms))


def maxcut_spec(g: Graph) -> CostSpec:
    """Rawstate CostSpec (p = 1) whose expectation counts cut edges."""
    hc = maxcut_hamiltonian(g)
    factored = tuple(FactoredTerm((t.weight,), (t.factors,)) for t in hc.terms if t.weight != 0)
    return CostSpec(p=1, F=hc.to_matrix(), factored=factored or None, mode="rawstate")


def quartic_spec() -> CostSpec:
    """Degree-4 benchmark: p = 2, coefficient matrix X^{x4} + Y^{x4} + Z^{x4}.

    Each 16x16 term factors as (PP) x (PP) over the two 4-dimensional
    subsystems, which is exactly the Pauli-product form the LCU path needs.
    """
    factored = tuple(
        FactoredTerm((1.0, 1.0), (c * 2, c * 2)) for c in ("X", "Y", "Z")
    )
    dense = sum(t.to_matrix() for t in factored)
    return CostSpec(p=2, F=dense, factored=factored, mode="affine")


def build_MD(spec: CostSpec) -> np.ndarray:
    """Symmetrized coefficient matrix sum_k P_k F P_k over subsystem swaps."""
    if spec.p == 1:
        return spec.F.copy()
    out = np.zeros_like(spec.F)
    for k in range(1, spec.p + 1):
        pk = permutation_operator(spec.p, k, spec.sub_dim)
        out += pk @ spec.F @ pk
    return out


def wirtinger_fd(spec: CostSpec, z: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference estimate of the conjugate derivatives d f / d conj(z_i).

    Uses d/d conj(z) = (d/dx + i d/dy) / 2.  In affine mode component 0 is
    pinned and the result covers i = 1..d; in rawstate mode all components
    are free.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("finite-difference step h must lie in [1e-7, 1e-3]")
    z = np.asarray(z, dtype=complex)
    idx = list(range(1, z.size) if spec.mode == "affine" else range(z.size))
    out = np.zeros(len(idx), dtype=complex)
    for row, i in enumerate(idx):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        dx = (eval_cost(spec, zp) - eval_cost(spec, zm)) / (2 * h)
        zp, zm = z.copy(), z.copy()
        zp[i] += 1j * h
        zm[i] -= 1j * h
        dy = (eval_cost(spec, zp) - eval_cost(spec, zm)) / (2 * h)
        out[row] = 0.5 * (dx + 1j * dy)
    return out


def load_graph(path: str) -> Graph:
    """Edge-list file: one 'i j' pair per line, '#' comments, optional 'n <count>' header."""
    edges = []
    n = None
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "n":
                n = int(parts[1])
                continue
            if len(parts) != 2:
                raise ValueError(f"bad edge line: {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = max((max(e) for e in edges), default=-1) + 1
    return Graph(n, tuple(edges))


def _complex_from_json(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(x[0], x[1])
    raise ValueError(f"cannot parse complex entry {x!r}")


def load_cost_spec(path: str) -> CostSpec:
    """CostSpec from a JSON file.

    Either {"p", "mode", "matrix": [[re or [re,im], ...], ...]} or
    {"p", "mode", "n_qubits", "pauli_terms": [{"weight", "factors"}, ...]};
    Pauli factor strings cover the whole p-subsystem register and are split
    evenly across slots for the factored form.
    """
    with open(path) as fh:
        data = json.load(fh)
    p = int(data.get("p", 1))
    mode = data.get("mode", "affine")
    if "matrix" in data:
        mat = np.array([[_complex_from_json(x) for x in row] for row in data["matrix"]])
        return CostSpec(p=p, F=mat, mode=mode)
    if "pauli_terms" in data:
        terms = [PauliString(t["factors"], _complex_from_json(t["weight"])) for t in data["pauli_terms"]]
        total = PauliSum(tuple(terms))
        n = total.n_sites
        if n % p != 0:
            raise ValueError(f"{n} qubits do not split into {p} equal slots")
        q = n // p
        factored = tuple(
            FactoredTerm(
                (t.weight,) + (1.0,) * (p - 1),
                tuple(t.factors[j * q : (j + 1) * q] for j in range(p)),
            )
            for t in terms
        )
        return CostSpec(p=p, F=total.to_matrix(), factored=factored, mode=mode)
    raise ValueError("cost spec file needs a 'matrix' or 'pauli_terms' entry")
