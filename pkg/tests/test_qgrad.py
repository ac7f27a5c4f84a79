import numpy as np
import pytest

from nomq.cost import C4, CostSpec, eval_cost, maxcut_spec, quartic_spec, wirtinger_fd
from nomq.encoding import encode
from nomq.qcore import expectation, fidelity, normalize
from nomq.qgrad import (
    DegenerateStep,
    SingularCoefficient,
    effective_gradient,
    effective_gradient_raw,
    gradient_step,
    lcu_coefficients,
    lcu_operator,
    lcu_step_simulate,
)


@pytest.fixture
def rng():
    return np.random.default_rng(17)


def random_affine_z(rng, d=3, box=2.0):
    z = np.ones(d + 1, dtype=complex)
    z[1:] = rng.uniform(-box, box, d) + 1j * rng.uniform(-box, box, d)
    return z


def random_state(rng, dim):
    return normalize(rng.normal(size=dim) + 1j * rng.normal(size=dim))


class TestEffectiveGradient:
    def test_p1_returns_f_exactly(self, rng):
        spec = maxcut_spec(C4)
        s = random_state(rng, 16)
        grad = effective_gradient(spec, s)
        assert np.array_equal(grad.D, spec.F)
        assert grad.path == "dense"

    def test_p2_product_form(self, rng):
        # independent expansion: D = A <B> + B <A> for F = A x B
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        a = a + a.conj().T
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = b + b.conj().T
        spec = CostSpec(p=2, F=np.kron(a, b), mode="affine")
        s = random_state(rng, 2)
        d = effective_gradient(spec, s).D
        expected = a * expectation(s, b).real + b * expectation(s, a).real
        assert np.allclose(d, expected, atol=1e-12)

    def test_hermiticity(self, rng):
        spec = quartic_spec()
        for _ in range(20):
            d = effective_gradient(spec, random_state(rng, 4)).D
            assert np.max(np.abs(d - d.conj().T)) <= 1e-10

    def test_wirtinger_identity_raw(self, rng):
        spec = quartic_spec()
        for _ in range(100):
            z = random_affine_z(rng)
            d = effective_gradient_raw(spec, z).D
            lhs = (d @ z)[1:]
            fd = wirtinger_fd(spec, z)
            assert np.allclose(lhs, fd, rtol=1e-5, atol=1e-7)

    def test_normalized_scale_factor(self, rng):
        spec = quartic_spec()
        for _ in range(20):
            z = random_affine_z(rng)
            amps = encode(z)
            d_norm = effective_gradient(spec, amps).D
            d_raw = effective_gradient_raw(spec, z).D
            c0 = abs(amps[0])
            assert np.max(np.abs(d_norm - c0 ** (2 * (spec.p - 1)) * d_raw)) <= 1e-9


class TestGradientStep:
    def test_zero_operator(self, rng):
        s = random_state(rng, 4)
        out = gradient_step(s, np.zeros((4, 4)), 0.2)
        assert np.allclose(out, s, atol=1e-14)

    def test_rayleigh_ascent_from_uniform(self):
        spec = maxcut_spec(C4)
        plus = np.full(16, 0.25, dtype=complex)
        before = expectation(plus, spec.F).real
        after = expectation(gradient_step(plus, spec.F, 0.2, "ascent"), spec.F).real
        assert abs(before - 2.0) <= 1e-12
        assert after > 2.0

    def test_eigenvector_fixed(self, rng):
        h = rng.normal(size=(4, 4))
        h = h + h.T
        w, v = np.linalg.eigh(h)
        s = v[:, 1].astype(complex)
        out = gradient_step(s, h.astype(complex), 0.1, "descent")
        assert fidelity(out, s) >= 1.0 - 1e-12

    def test_psd_ascent_monotone(self, rng):
        for _ in range(100):
            m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
            h = m @ m.conj().T  # PSD
            s = random_state(rng, 6)
            before = expectation(s, h).real
            after = expectation(gradient_step(s, h, 0.3, "ascent"), h).real
            assert after >= before - 1e-9

    def test_degenerate_step(self):
        s = np.array([1.0, 0.0], dtype=complex)
        with pytest.raises(DegenerateStep):
            gradient_step(s, np.eye(2, dtype=complex), 1.0, "descent")

    def test_bad_args(self, rng):
        s = random_state(rng, 4)
        with pytest.raises(ValueError):
            gradient_step(s, np.eye(4), -0.1)
        with pytest.raises(ValueError):
            gradient_step(s, np.eye(4), 0.1, sign="sideways")


class TestLcuCoefficients:
    def test_single_zz_term(self):
        from nomq.cost import FactoredTerm

        spec = CostSpec(
            p=2,
            F=np.kron(np.diag([1.0, -1.0]), np.diag([1.0, -1.0])).astype(complex),
            factored=(FactoredTerm((1.0, 1.0), ("Z", "Z")),),
            mode="affine",
        )
        s = np.array([1.0, 0.0], dtype=complex)  # <Z> = 1
        c = lcu_coefficients(spec, s)
        assert np.allclose(c, np.ones(2), atol=1e-12)

    def test_singular_expectation(self):
        from nomq.cost import FactoredTerm

        spec = CostSpec(
            p=2,
            F=np.kron(np.diag([1.0, -1.0]), np.diag([1.0, -1.0])).astype(complex),
            factored=(FactoredTerm((1.0, 1.0), ("Z", "Z")),),
            mode="affine",
        )
        plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)  # <Z> = 0
        with pytest.raises(SingularCoefficient) as err:
            lcu_coefficients(spec, plus)
        assert err.value.slots

    def test_reconstructs_dense_operator(self, rng):
        spec = quartic_spec()
        done = 0
        while done < 50:
            s = random_state(rng, 4)
            try:
                d_lcu = lcu_operator(spec, s).D
            except SingularCoefficient:
                continue
            d_dense = effective_gradient(spec, s).D
            assert np.max(np.abs(d_lcu - d_dense)) <= 1e-9
            done += 1

    def test_requires_factored(self, rng):
        spec = CostSpec(p=1, F=np.eye(2, dtype=complex), mode="affine")
        with pytest.raises(ValueError):
            lcu_coefficients(spec, random_state(rng, 2))


class TestLcuSimulation:
    def test_small_xi_limit(self, rng):
        spec = quartic_spec()
        s = random_state(rng, 4)
        out = lcu_step_simulate(spec, s, 1e-9)
        assert fidelity(out.state, s) >= 1.0 - 1e-12
        assert out.success_prob >= 1.0 - 1e-7

    def test_matches_dense_path(self, rng):
        spec = quartic_spec()
        checked = 0
        while checked < 50:
            s = random_state(rng, 4)
            xi = float(rng.choice([0.05, 0.2, 0.5]))
            try:
                out = lcu_step_simulate(spec, s, xi, "descent")
            except SingularCoefficient:
                continue
            d = effective_gradient(spec, s)
            ref = gradient_step(s, d, xi, "descent")
            assert fidelity(out.state, ref) >= 1.0 - 1e-10
            w = s - xi * (d.D @ s)
            pred = np.linalg.norm(w) ** 2 / (1.0 + xi * np.abs(out.coefficients).sum()) ** 2
            assert abs(out.success_prob - pred) <= 1e-10
            checked += 1

    def test_ascent_sign(self, rng):
        spec = quartic_spec()
        s = random_state(rng, 4)
        out = lcu_step_simulate(spec, s, 0.2, "ascent")
        ref = gradient_step(s, effective_gradient(spec, s), 0.2, "ascent")
        assert fidelity(out.state, ref) >= 1.0 - 1e-10

    def test_success_scaling_with_slot_count(self, rng):
        # normalization 1 + xi sum|c| <= 1 + xi * kp * max|c| gives the
        # inverse-quadratic slot-count floor on the success probability
        spec = quartic_spec()
        xi = 0.2
        s = random_state(rng, 4)
        out = lcu_step_simulate(spec, s, xi)
        kp = len(out.coefficients)
        w = s - xi * (effective_gradient(spec, s).D @ s)
        floor = np.linalg.norm(w) ** 2 / (1.0 + xi * kp * np.abs(out.coefficients).max()) ** 2
        assert out.success_prob >= floor - 1e-12
        assert out.success_prob * kp**2 > 0.1
