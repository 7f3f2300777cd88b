import numpy as np
import pytest
from scipy.optimize import brentq

from hwdd import benchmark as bm
from hwdd import fem_core as fem
from hwdd import reference_plasticity as rp
from hwdd import tensor_lab as tl

MAT = rp.ReferenceMaterial()
VM = rp.ReferenceMaterial(k=1.0)


def _radial_return(eps_v, eps_p_v, ebar, m):
    """Textbook J2 radial return with the power-law hardening (independent oracle)."""
    G, K = m.shear, m.bulk
    e = tl.from_voigt_strain(eps_v) - tl.from_voigt_strain(eps_p_v)
    s_tr = 2 * G * tl.deviator(e)
    q_tr = np.sqrt(1.5) * tl.frobenius(s_tr)
    sy = lambda eb: (1 - np.tan(np.pi / 6) / 3) * (m.sigma0 + m.H * eb ** (1 / m.h))  # noqa: E731
    if q_tr <= sy(ebar):
        dl = 0.0
    else:
        dl = brentq(lambda x: q_tr - 3 * G * x - sy(ebar + x), 0.0, q_tr / (3 * G), xtol=1e-300, rtol=1e-15)
    s = s_tr * (1 - 3 * G * dl / q_tr) if q_tr > 0 else s_tr
    return tl.voigt_stress(s + K * tl.trace(e) * np.eye(3)), ebar + dl


def _uniaxial_oracle(path, m):
    """Scalar uniaxial return for k = 1."""
    E = m.E
    ep = eb = 0.0
    out = []
    sy = lambda x: (1 - np.tan(np.pi / 6) / 3) * (m.sigma0 + m.H * x ** (1 / m.h))  # noqa: E731
    for e in path:
        tr = E * (e - ep)
        if abs(tr) > sy(eb):
            dl = brentq(lambda x: abs(tr) - E * x - sy(eb + x), 0.0, abs(tr) / E, xtol=1e-300, rtol=1e-15)
            ep += np.sign(tr) * dl
            eb += dl
        out.append(E * (e - ep))
    return np.array(out)


class TestMaterial:
    def test_initial_yield_stress(self):
        # frozen from (1 - tan30/3) * 3e8
        assert MAT.sigma_y0 == pytest.approx(242264973.08103743, rel=1e-14)

    def test_hardening_values(self):
        assert rp.sigma_y(0.01, MAT) == pytest.approx(444152450.64856863, rel=1e-14)
        flat = rp.ReferenceMaterial(H=0.0)
        assert rp.sigma_y(0.3, flat) == pytest.approx(flat.sigma_y0)
        with pytest.raises(ValueError):
            rp.sigma_y(-1e-3, MAT)

    @pytest.mark.parametrize("kw", [dict(E=-1.0), dict(nu=0.5), dict(H=-1.0), dict(sigma0=0.0), dict(h=0.0), dict(k=0.0)])
    def test_invalid_parameters(self, kw):
        with pytest.raises(ValueError):
            rp.ReferenceMaterial(**kw)

    def test_moduli(self):
        assert MAT.bulk == pytest.approx(3e10 / (3 * 0.6))
        assert MAT.shear == pytest.approx(1.25e10)
        C = MAT.elastic_voigt()
        assert C[0, 0] == pytest.approx(MAT.lam + 2 * MAT.mu)
        assert C[3, 3] == pytest.approx(MAT.mu)


class TestYieldFunction:
    def test_uniaxial_values(self):
        assert rp.yield_F(tl.sym([2e8, 0, 0, 0, 0, 0]), 1.0) == pytest.approx(2e8)
        assert rp.yield_F(tl.sym([2.25e8, 0, 0, 0, 0, 0]), 0.75) == pytest.approx(3e8)
        assert rp.yield_F(tl.sym([-3e8, 0, 0, 0, 0, 0]), 0.75) == pytest.approx(3e8)
        assert rp.yield_F(np.eye(3) * 1e8, 0.75) == pytest.approx(0.0, abs=1e-6)

    def test_matches_lode_angle_form(self):
        rng = np.random.default_rng(0)
        sig = tl.sym(rng.normal(size=(100, 6)) * 1e8)
        hw = tl.haigh_westergaard(sig)
        k = 0.75
        ref = hw.rho * np.sqrt(3) / (2 * np.sqrt(2)) * (1 + 1 / k - (1 - 1 / k) * np.cos(3 * hw.theta))
        np.testing.assert_allclose(rp.yield_F(sig, k), ref, rtol=1e-12)

    def test_derivatives_finite_difference(self):
        rng = np.random.default_rng(1)
        P = np.eye(6)
        P[:3, :3] -= 1 / 3
        for k in (1.0, 0.75):
            s = P @ (rng.normal(size=6) * 1e8)
            F, n, H = rp.yield_derivatives(s, k)
            h = 1e2
            f = lambda x: rp.yield_derivatives(P @ x, k, hessian=False)  # noqa: E731
            g = np.array([(f(s + h * e)[0] - f(s - h * e)[0]) / (2 * h) for e in np.eye(6)])
            np.testing.assert_allclose(g, n, atol=1e-7 * np.abs(n).max())
            Hfd = np.array([(f(s + h * e)[1] - f(s - h * e)[1]) / (2 * h) for e in np.eye(6)]).T
            np.testing.assert_allclose(Hfd, H @ P, atol=1e-7 * np.abs(H).max())


class TestReturnMap:
    def test_elastic_trial_is_exact(self):
        eps = np.array([[1e-4, -2e-5, 0, 1e-5, 0, 0]])
        r = rp.return_map(eps, np.zeros((1, 6)), np.zeros(1), MAT)
        np.testing.assert_allclose(r.sigma[0], MAT.elastic_voigt() @ eps[0])
        assert not r.plastic[0]
        np.testing.assert_array_equal(r.eps_p, 0.0)

    def test_von_mises_against_radial_return(self):
        rng = np.random.default_rng(2)
        eps = rng.normal(size=(40, 6)) * 5e-3
        eps_p = np.zeros((40, 6))
        ebar = rng.uniform(0, 0.01, 40)
        r = rp.return_map(eps, eps_p, ebar, VM)
        for i in range(40):
            s, eb = _radial_return(eps[i], eps_p[i], ebar[i], VM)
            np.testing.assert_allclose(r.sigma[i], s, rtol=1e-9, atol=1e-9 * np.abs(s).max())
            assert r.ebar[i] == pytest.approx(eb, rel=1e-9, abs=1e-15)

    @pytest.mark.parametrize("k", [1.0, 0.75])
    def test_consistent_tangent_finite_difference(self, k):
        m = rp.ReferenceMaterial(k=k)
        rng = np.random.default_rng(3)
        for _ in range(5):
            eps = rng.normal(size=(1, 6)) * 1e-2
            ebar = np.array([1e-3])
            r = rp.return_map(eps, np.zeros((1, 6)), ebar, m)
            h = 1e-8
            fd = np.zeros((6, 6))
            for j in range(6):
                d = np.zeros((1, 6))
                d[0, j] = h
                hi = rp.return_map(eps + d, np.zeros((1, 6)), ebar, m).sigma[0]
                lo = rp.return_map(eps - d, np.zeros((1, 6)), ebar, m).sigma[0]
                fd[:, j] = (hi - lo) / (2 * h)
            assert np.abs(fd - r.tangent[0]).max() <= 1e-5 * np.abs(r.tangent[0]).max()

    def test_flow_is_deviatoric_and_consistent(self):
        rng = np.random.default_rng(4)
        eps = rng.normal(size=(50, 6)) * 1e-2
        r = rp.return_map(eps, np.zeros((50, 6)), np.zeros(50), MAT)
        assert r.plastic.any()
        np.testing.assert_allclose(r.eps_p[:, :3].sum(axis=1), 0.0, atol=1e-10)
        F = rp.yield_F(tl.from_voigt_stress(r.sigma), MAT.k)
        sy = rp.sigma_y(r.ebar, MAT)
        assert np.all(F <= sy + 1e-8 * MAT.sigma0)
        np.testing.assert_allclose(F[r.plastic], sy[r.plastic], rtol=1e-9)
        # complementarity: no plastic strain growth on the elastic points
        assert np.all(r.ebar[~r.plastic] == 0.0)


class TestUniaxialDriver:
    def test_elastic_path(self):
        path = np.linspace(0, 5e-3, 6)
        e11, e22, s11 = rp.uniaxial_driver(path, MAT)
        np.testing.assert_allclose(s11, MAT.E * path)
        np.testing.assert_allclose(e22, -MAT.nu * path)

    def test_von_mises_against_scalar_oracle(self):
        path = np.concatenate([np.linspace(0, 0.03, 61), np.linspace(0.03, 0.02, 10)])
        _, _, s11 = rp.uniaxial_driver(path, VM)
        np.testing.assert_allclose(s11, _uniaxial_oracle(path, VM), rtol=1e-8, atol=1e-8 * VM.sigma0)

    def test_matches_3d_return_map_with_free_lateral_strain(self):
        path = np.linspace(0, 0.02, 21)
        e11, e22, s11 = rp.uniaxial_driver(path, MAT)
        r = rp.return_map(
            np.column_stack([np.full(1, e11[-1]), np.full(1, e22[-1]), np.full(1, e22[-1]), np.zeros((1, 3))]),
            np.zeros((1, 6)), np.zeros(1), MAT,
        )
        # a single 3D step from zero is not path dependent here: monotone proportional loading
        assert r.sigma[0, 0] == pytest.approx(s11[-1], rel=1e-8)
        assert abs(r.sigma[0, 1]) < 1e-6 * s11[-1]


class TestGlobalSolver:
    def test_single_tet_matches_uniaxial_driver(self):
        prob = bm.BenchmarkProblem(fem.single_tet_mesh())
        path = bm.load_path([bm.LoadSegment(0.02, 0.0, 20), bm.LoadSegment(0.01, 0.0, 5)])
        hist = bm.simulate(rp.ReferenceSolver(prob.points, MAT), prob, path)
        _, e22, s11 = rp.uniaxial_driver(path[:, 0], MAT)
        np.testing.assert_allclose(hist.sigma[1:, 0, 0], s11, rtol=1e-7)
        np.testing.assert_allclose(hist.eps[1:, 0, 1], e22, rtol=1e-7, atol=1e-12)

    def test_equilibrium_and_residual_plastic_strain(self):
        prob = bm.BenchmarkProblem(fem.quarter_plate_mesh(n_theta=2, n_r=3, n_z=1))
        solver = rp.ReferenceSolver(prob.points, MAT)
        for u_bar in (0.02, 0.04, 0.0):
            bc = prob.bc(u_bar, 1e6)
            st = solver.step(bc)
            fint = prob.points.internal_force(st.sigma)
            free = bc.free_dofs()
            assert np.linalg.norm((bc.force - fint)[free]) <= 1e-8 * max(np.linalg.norm(bc.force), np.linalg.norm(fint))
        assert st.ebar.max() > 0
        assert np.all(st.alpha_y >= 1.0)

    def test_elastic_level_is_linear(self):
        prob = bm.BenchmarkProblem(fem.unit_cube_mesh(1, 1, 1))
        solver = rp.ReferenceSolver(prob.points, MAT)
        st = solver.step(prob.bc(1e-4, 0.0))
        np.testing.assert_allclose(st.sigma[:, 0], MAT.E * 1e-4, rtol=1e-9)
        assert st.iterations == 1
