import itertools
import json

import numpy as np
import pytest

from nomq.cost import (
    C4,
    CostSpec,
    DEFAULT_GRAPH,
    FactoredTerm,
    Graph,
    build_MD,
    eval_cost,
    eval_quartic_expanded,
    load_cost_spec,
    load_graph,
    maxcut_hamiltonian,
    maxcut_spec,
    quartic_spec,
    wirtinger_fd,
)
from nomq.qcore import PauliString, permutation_operator


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def random_affine_z(rng, d=3, box=2.0):
    z = np.ones(d + 1, dtype=complex)
    z[1:] = rng.uniform(-box, box, d) + 1j * rng.uniform(-box, box, d)
    return z


class TestGraph:
    def test_cycle(self):
        assert C4.edges == ((0, 1), (1, 2), (2, 3), (0, 3))

    def test_default_graph_is_a_4_cycle(self):
        # isomorphic to C4: every vertex has degree 2 and the graph is connected
        deg = [0] * 4
        for i, j in DEFAULT_GRAPH.edges:
            deg[i] += 1
            deg[j] += 1
        assert deg == [2, 2, 2, 2]
        assert len(DEFAULT_GRAPH.edges) == 4

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            Graph(2, ((0, 0),))

    def test_rejects_duplicate(self):
        with pytest.raises(ValueError):
            Graph(3, ((0, 1), (1, 0)))


class TestEvalCost:
    def test_constant_term(self):
        assert eval_cost(quartic_spec(), np.array([1, 0, 0, 0], dtype=complex)) == 1.0

    def test_unit_z1(self):
        assert abs(eval_cost(quartic_spec(), np.array([1, 1, 0, 0], dtype=complex))) <= 1e-12

    def test_simple_quadratic(self):
        spec = CostSpec(p=1, F=np.diag([0.0, 1.0]).astype(complex), mode="affine")
        assert eval_cost(spec, np.array([1, 1], dtype=complex)) == 1.0

    def test_expanded_constant(self):
        assert eval_quartic_expanded(np.array([1, 0, 0, 0], dtype=complex)) == 1.0

    def test_expanded_z3_unit(self):
        # monomials with z3 = 1 sum to 11, plus the constant
        assert eval_quartic_expanded(np.array([1, 0, 0, 1], dtype=complex)) == 12.0

    def test_matrix_matches_expansion(self, rng):
        spec = quartic_spec()
        for _ in range(1000):
            z = random_affine_z(rng)
            assert abs(eval_cost(spec, z) - eval_quartic_expanded(z)) <= 1e-9

    def test_real_output_on_random_points(self, rng):
        spec = quartic_spec()
        for _ in range(200):
            eval_cost(spec, random_affine_z(rng))  # raises if the imaginary residue is large


class TestMaxcutHamiltonian:
    def test_single_edge(self):
        h = maxcut_hamiltonian(Graph(2, ((0, 1),)))
        assert h.terms == (PauliString("II", 0.5), PauliString("ZZ", -0.5))

    def test_c4_max_eigenvalue(self):
        h = maxcut_hamiltonian(C4).to_matrix()
        assert abs(np.linalg.eigvalsh(h)[-1] - 4.0) <= 1e-12

    def test_empty_graph(self):
        h = maxcut_hamiltonian(Graph(3, ()))
        assert np.max(np.abs(h.to_matrix())) == 0.0

    def test_uniform_state_expectation(self):
        u = np.full(16, 0.25, dtype=complex)
        assert abs(maxcut_hamiltonian(C4).expectation(u).real - 2.0) <= 1e-12

    def test_matches_brute_force_max_cut_small_graphs(self, rng):
        # exhaustive over all graphs with up to 5 vertices and a sample of 6-vertex graphs
        def brute(g):
            best = 0
            for bits in range(1 << g.n):
                best = max(best, sum(((bits >> i) & 1) != ((bits >> j) & 1) for i, j in g.edges))
            return best

        for n in (2, 3, 4, 5):
            pairs = list(itertools.combinations(range(n), 2))
            for _ in range(12):
                mask = rng.integers(0, 2, len(pairs)).astype(bool)
                g = Graph(n, tuple(p for p, keep in zip(pairs, mask) if keep))
                h = maxcut_hamiltonian(g).to_matrix()
                assert abs(np.linalg.eigvalsh(h)[-1] - brute(g)) <= 1e-9


class TestBuildMD:
    def test_p1_is_f(self, rng):
        f = rng.normal(size=(4, 4))
        f = (f + f.T).astype(complex)
        spec = CostSpec(p=1, F=f, mode="rawstate")
        assert np.array_equal(build_MD(spec), f)

    def test_p2_product_form(self, rng):
        a = rng.normal(size=(3, 3))
        a = a + a.T
        b = rng.normal(size=(3, 3))
        b = b + b.T
        spec = CostSpec(p=2, F=np.kron(a, b).astype(complex), mode="affine")
        expected = np.kron(a, b) + np.kron(b, a)
        assert np.allclose(build_MD(spec), expected, atol=1e-12)

    def test_quartic_hermitian(self):
        md = build_MD(quartic_spec())
        assert np.max(np.abs(md - md.conj().T)) <= 1e-12

    def test_relabeling_equivariance(self, rng):
        # conjugating F by a permutation of the traced-out subsystems relabels M_D the same way
        f = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        f = f + f.conj().T
        spec = CostSpec(p=3, F=f, mode="affine")
        q = permutation_operator(3, 2, 2) @ permutation_operator(3, 3, 2) @ permutation_operator(3, 2, 2)
        # q swaps subsystems 2 and 3 (conjugate the swap of 1,3 into 2,3 via 1,2)
        spec_q = CostSpec(p=3, F=q @ f @ q.conj().T, mode="affine")
        assert np.allclose(build_MD(spec_q), q @ build_MD(spec) @ q.conj().T, atol=1e-10)


class TestWirtingerFD:
    def test_modulus_squared(self):
        spec = CostSpec(p=1, F=np.diag([0.0, 1.0]).astype(complex), mode="affine")
        g = wirtinger_fd(spec, np.array([1, 2.0], dtype=complex))
        assert abs(g[0] - 2.0) <= 1e-8

    def test_quartic_single_variable(self):
        # f = z1^2 conj(z1)^2 has conjugate derivative 2 z1^2 conj(z1)
        spec = CostSpec(p=2, F=np.kron(np.diag([0, 1.0]), np.diag([0, 1.0])).astype(complex), mode="affine")
        g = wirtinger_fd(spec, np.array([1, 1.0], dtype=complex))
        assert abs(g[0] - 2.0) <= 1e-7

    def test_step_bounds(self):
        spec = quartic_spec()
        with pytest.raises(ValueError):
            wirtinger_fd(spec, np.ones(4, dtype=complex), h=1e-2)


class TestSpecValidation:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            CostSpec(p=1, F=np.array([[0, 1], [0, 0]], dtype=complex))

    def test_rejects_bad_factored(self):
        with pytest.raises(ValueError):
            CostSpec(
                p=1,
                F=np.diag([1.0, -1.0]).astype(complex),
                factored=(FactoredTerm((2.0,), ("Z",)),),
            )

    def test_quartic_factored_consistent(self):
        spec = quartic_spec()
        dense = sum(t.to_matrix() for t in spec.factored)
        assert np.max(np.abs(dense - spec.F)) <= 1e-12

    def test_embedded(self, rng):
        f = rng.normal(size=(9, 9))
        spec = CostSpec(p=2, F=(f + f.T).astype(complex), mode="affine")
        big = spec.embedded(4)
        z = np.ones(3, dtype=complex)
        z[1:] = rng.normal(size=2)
        z_pad = np.zeros(4, dtype=complex)
        z_pad[:3] = z
        assert abs(eval_cost(spec, z) - eval_cost(big, z_pad)) <= 1e-10


class TestFileInterfaces:
    def test_graph_roundtrip(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# demo\nn 4\n0 1\n2 3\n")
        g = load_graph(str(path))
        assert g == Graph(4, ((0, 1), (2, 3)))

    def test_matrix_spec(self, tmp_path):
        path = tmp_path / "spec.json"
        data = {"p": 1, "mode": "affine", "matrix": [[1.0, [0.0, -0.5]], [[0.0, 0.5], 2.0]]}
        path.write_text(json.dumps(data))
        spec = load_cost_spec(str(path))
        assert spec.F[0, 1] == -0.5j
        assert spec.F[1, 0] == 0.5j

    def test_pauli_spec_matches_quartic(self, tmp_path):
        path = tmp_path / "spec.json"
        data = {
            "p": 2,
            "mode": "affine",
            "pauli_terms": [
                {"weight": 1.0, "factors": "XXXX"},
                {"weight": 1.0, "factors": "YYYY"},
                {"weight": 1.0, "factors": "ZZZZ"},
            ],
        }
        path.write_text(json.dumps(data))
        spec = load_cost_spec(str(path))
        assert np.max(np.abs(spec.F - quartic_spec().F)) <= 1e-12
        assert spec.factored is not None

    def test_maxcut_spec_mode(self):
        spec = maxcut_spec(C4)
        assert spec.mode == "rawstate"
        assert spec.p == 1
        assert spec.factored is not None
