import numpy as np
import pytest

from nomq.qcore import (
    PAULI_X,
    PAULI_Z,
    I2,
    PauliString,
    PauliSum,
    embed_subsystems,
    expectation,
    fidelity,
    normalize,
    partial_trace_keep_first,
    pauli_matrix,
    permutation_operator,
    tensor_power,
    tensor_product,
)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_state(rng, dim):
    return normalize(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return m + m.conj().T


class TestTensorProduct:
    def test_identity_case(self):
        assert np.array_equal(tensor_product(I2, I2), np.eye(4))

    def test_basis_case(self):
        out = tensor_product(np.array([1, 0]), np.array([0, 1]))
        assert np.array_equal(out, np.array([0, 1, 0, 0], dtype=complex))

    def test_xx_on_basis(self):
        # 4x4 matrix-vector product done by hand: XX|00> = |11>
        xx = tensor_product(PAULI_X, PAULI_X)
        out = xx @ np.array([1, 0, 0, 0], dtype=complex)
        assert np.array_equal(out, np.array([0, 0, 0, 1], dtype=complex))

    def test_associativity(self, rng):
        for _ in range(10):
            a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
            left = tensor_product(tensor_product(a, b), c)
            right = tensor_product(a, tensor_product(b, c))
            assert np.max(np.abs(left - right)) <= 1e-13


class TestPartialTrace:
    def test_p1_identity(self, rng):
        m = random_hermitian(rng, 3)
        assert np.array_equal(partial_trace_keep_first(m, 3, 1), m)

    def test_factorized(self, rng):
        a = random_hermitian(rng, 2)
        b = random_hermitian(rng, 2)
        out = partial_trace_keep_first(np.kron(a, b), 2, 2)
        assert np.allclose(out, a * np.trace(b), atol=1e-12)

    def test_against_index_summation(self, rng):
        # independent oracle: explicit loop over kept and traced indices
        m = random_hermitian(rng, 16)
        expected = np.zeros((4, 4), dtype=complex)
        for i in range(4):
            for j in range(4):
                for r in range(4):
                    expected[i, j] += m[4 * i + r, 4 * j + r]
        out = partial_trace_keep_first(m, 4, 2)
        assert np.allclose(out, expected, atol=1e-12)
        assert np.allclose(out, out.conj().T, atol=1e-12)
        assert abs(np.trace(out) - np.trace(m)) <= 1e-12

    def test_trace_preserved(self, rng):
        m = random_hermitian(rng, 8)
        out = partial_trace_keep_first(m, 2, 3)
        assert abs(np.trace(out) - np.trace(m)) <= 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            partial_trace_keep_first(np.eye(6), 2, 2)


class TestPermutationOperator:
    def test_k1_is_identity(self):
        assert np.array_equal(permutation_operator(2, 1, 4), np.eye(16))

    def test_swap_definition(self):
        p = permutation_operator(2, 2, 2)
        e0, e1 = np.eye(2)
        assert np.allclose(p @ np.kron(e0, e1), np.kron(e1, e0))

    def test_p3_k3_against_index_oracle(self, rng):
        # independent oracle: permute tensor indices directly
        p = permutation_operator(3, 3, 2)
        for _ in range(5):
            a, b, c = (random_state(rng, 2) for _ in range(3))
            v = np.kron(a, np.kron(b, c))
            expected = np.kron(c, np.kron(b, a))
            assert np.allclose(p @ v, expected, atol=1e-13)

    def test_involutive_unitary(self):
        for (p_, k, d) in [(2, 2, 2), (3, 2, 3), (3, 3, 2), (4, 3, 2)]:
            op = permutation_operator(p_, k, d)
            assert np.array_equal(op @ op, np.eye(d**p_, dtype=complex))
            assert set(np.unique(op.real)) <= {0.0, 1.0}

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            permutation_operator(2, 3, 2)


class TestPauli:
    def test_z_matrix(self):
        assert np.array_equal(pauli_matrix(PauliString("Z")), np.diag([1, -1]).astype(complex))

    def test_zz_matrix(self):
        assert np.array_equal(pauli_matrix(PauliString("ZZ")), np.diag([1, -1, -1, 1]).astype(complex))

    def test_xxxx_corner_entry(self):
        # Kronecker index arithmetic: X^{x4} maps |1111> to |0000>
        m = pauli_matrix(PauliString("XXXX"))
        assert m[0, 15] == 1.0
        assert m[0, 0] == 0.0

    def test_matrix_matches_kron(self, rng):
        from nomq.qcore import PAULIS

        for factors in ("XY", "ZY", "YXZ", "IZXY"):
            m = np.array([[1.0]], dtype=complex)
            for f in factors:
                m = np.kron(m, PAULIS[f])
            assert np.allclose(pauli_matrix(PauliString(factors)), m, atol=1e-14)

    def test_apply_matches_matrix(self, rng):
        for factors in ("X", "ZZ", "XYZ", "YIZX"):
            ps = PauliString(factors, 0.7 - 0.2j)
            s = random_state(rng, ps.dim)
            assert np.allclose(ps.apply(s), ps.to_matrix() @ s, atol=1e-13)

    def test_pauli_sum(self, rng):
        terms = (PauliString("XZ", 0.5), PauliString("YI", -1.5), PauliString("ZZ", 2.0))
        ps = PauliSum(terms)
        s = random_state(rng, 4)
        assert np.allclose(ps.apply(s), ps.to_matrix() @ s, atol=1e-13)
        assert ps.is_hermitian()
        assert abs(ps.expectation(s) - expectation(s, ps.to_matrix())) <= 1e-13

    def test_invalid_factors(self):
        with pytest.raises(ValueError):
            PauliString("XQ")


class TestExpectation:
    def test_z_on_zero(self):
        assert expectation(np.array([1, 0], dtype=complex), pauli_matrix(PauliString("Z"))).real == 1.0

    def test_x_on_plus(self):
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        assert abs(expectation(plus, pauli_matrix(PauliString("X"))) - 1.0) <= 1e-12

    def test_hermitian_real(self, rng):
        h = random_hermitian(rng, 8)
        for _ in range(20):
            s = random_state(rng, 8)
            assert abs(expectation(s, h).imag) <= 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            expectation(np.ones(3), np.eye(2))


def test_embed_subsystems(rng):
    a = random_hermitian(rng, 3)
    b = random_hermitian(rng, 3)
    m = np.kron(a, b)
    big = embed_subsystems(m, 3, 2, 4)
    a4 = np.zeros((4, 4), dtype=complex)
    a4[:3, :3] = a
    b4 = np.zeros((4, 4), dtype=complex)
    b4[:3, :3] = b
    assert np.allclose(big, np.kron(a4, b4), atol=1e-13)


def test_tensor_power_and_fidelity(rng):
    v = random_state(rng, 2)
    assert np.allclose(tensor_power(v, 2), np.kron(v, v), atol=1e-14)
    assert abs(fidelity(v, v) - 1.0) <= 1e-12
    assert abs(fidelity(v, np.exp(1j * 0.3) * v) - 1.0) <= 1e-12
