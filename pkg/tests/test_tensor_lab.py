import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hwdd import tensor_lab as tl

# magnitudes bounded away from underflow, where relative roundoff is meaningless
finite = st.one_of(st.just(0.0), st.floats(1e-6, 1e3), st.floats(-1e3, -1e-6))
six = arrays(np.float64, 6, elements=finite)


class TestPacking:
    def test_sym_places_components(self):
        t = tl.sym([1, 2, 3, 4, 5, 6])
        expected = np.array([[1, 6, 5], [6, 2, 4], [5, 4, 3]], float)
        np.testing.assert_array_equal(t, expected)

    def test_sym_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            tl.sym([1, 2, 3])

    @given(six, six)
    def test_voigt_pairing_is_double_contraction(self, a, b):
        s, e = tl.sym(a), tl.sym(b)
        lhs = tl.voigt_stress(s) @ tl.voigt_strain(e)
        assert lhs == pytest.approx(tl.ddot(s, e), rel=1e-12, abs=1e-9)

    @given(six)
    def test_round_trips(self, a):
        t = tl.sym(a)
        np.testing.assert_allclose(tl.from_voigt_stress(tl.voigt_stress(t)), t)
        np.testing.assert_allclose(tl.from_voigt_strain(tl.voigt_strain(t)), t)
        np.testing.assert_allclose(tl.from_mandel(tl.to_mandel(t)), t, atol=1e-12)

    def test_mandel_is_isometric(self):
        rng = np.random.default_rng(3)
        t = tl.sym(rng.normal(size=(20, 6)))
        np.testing.assert_allclose(np.linalg.norm(tl.to_mandel(t), axis=1), tl.frobenius(t))

    def test_stiffness_conversions_invert(self):
        rng = np.random.default_rng(0)
        c = rng.normal(size=(6, 6))
        np.testing.assert_allclose(tl.mandel_to_voigt_stiffness(tl.voigt_to_mandel_stiffness(c)), c)

    def test_mandel_to_voigt_preserves_action(self):
        # C_M acting on Mandel strain equals C_V acting on Voigt strain
        rng = np.random.default_rng(1)
        cm = rng.normal(size=(6, 6))
        e = tl.sym(rng.normal(size=6))
        sig_m = tl.from_mandel(cm @ tl.to_mandel(e))
        sig_v = tl.from_voigt_stress(tl.mandel_to_voigt_stiffness(cm) @ tl.voigt_strain(e))
        np.testing.assert_allclose(sig_v, sig_m, atol=1e-12)


class TestInvariants:
    def test_uniaxial(self):
        s = tl.sym([3.0, 0, 0, 0, 0, 0])
        j1, j2, j3 = tl.invariants(s)
        assert j1 == pytest.approx(3.0)
        assert j2 == pytest.approx(3.0)  # sigma^2 / 3
        assert j3 == pytest.approx(2.0)  # 2 sigma^3 / 27

    def test_deviator_is_traceless(self):
        rng = np.random.default_rng(2)
        d = tl.deviator(tl.sym(rng.normal(size=(10, 6))))
        np.testing.assert_allclose(tl.trace(d), 0.0, atol=1e-14)


class TestHaighWestergaard:
    def test_uniaxial_tension_and_compression(self):
        hw = tl.haigh_westergaard(tl.sym([[2.0, 0, 0, 0, 0, 0], [-2.0, 0, 0, 0, 0, 0]]))
        np.testing.assert_allclose(hw.rho, np.sqrt(2.0 / 3.0) * 2.0)
        np.testing.assert_allclose(hw.theta, [0.0, np.pi / 3], atol=1e-15)
        np.testing.assert_allclose(hw.xi, 2.0 / np.sqrt(3.0) * np.array([1, -1]))

    def test_pure_shear_lode_angle(self):
        hw = tl.haigh_westergaard(tl.sym([0, 0, 0, 0, 0, 1.0]))
        assert hw.theta == pytest.approx(np.pi / 6)

    def test_hydrostatic_is_flagged(self):
        hw = tl.haigh_westergaard(np.eye(3) * 5.0)
        assert hw.degenerate
        assert hw.theta == 0.0
        assert hw.rho == pytest.approx(0.0, abs=1e-12)

    def test_theta_matches_invariant_formula(self):
        rng = np.random.default_rng(7)
        t = tl.sym(rng.normal(size=(500, 6)))
        _, j2, j3 = tl.invariants(t)
        ref = np.arccos(np.clip(1.5 * np.sqrt(3) * j3 * j2**-1.5, -1, 1)) / 3
        np.testing.assert_allclose(tl.haigh_westergaard(t).theta, ref, atol=1e-12)

    @settings(max_examples=200)
    @given(six)
    def test_reconstruction(self, a):
        t = tl.sym(a)
        hw = tl.haigh_westergaard(t)
        w = np.linalg.eigvalsh(t)[::-1]
        scale = max(np.abs(w).max(), 1e-300)
        p = tl.reconstruct_principal(hw.xi, hw.rho, hw.theta)
        assert np.abs(p - w).max() <= 1e-9 * scale + 1e-300

    def test_theta_in_sector(self):
        rng = np.random.default_rng(4)
        th = tl.haigh_westergaard(tl.sym(rng.normal(size=(1000, 6)))).theta
        assert th.min() >= 0.0 and th.max() <= np.pi / 3


class TestPrincipalFrame:
    def test_proper_rotation_and_reconstruction(self):
        rng = np.random.default_rng(5)
        t = tl.sym(rng.normal(size=(50, 6)))
        fr = tl.principal_frame(t)
        np.testing.assert_allclose(np.linalg.det(fr.rotation), 1.0)
        assert np.all(np.diff(fr.values, axis=1) <= 0)
        np.testing.assert_allclose(tl.rotate_diagonal(fr.values, fr.rotation), t, atol=1e-12)

    def test_diagonal_input(self):
        fr = tl.principal_frame(np.diag([1.0, 3.0, 2.0]))
        np.testing.assert_allclose(fr.values, [3.0, 2.0, 1.0])
