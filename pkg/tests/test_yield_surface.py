import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hwdd import tensor_lab as tl
from hwdd import yield_surface as ys

SY = 3e8


def _samples(n, k=0.75):
    th = np.linspace(0, np.pi / 3, n)
    return th, ys.phi_analytic(th, k, SY)


class TestAnalytic:
    def test_values_at_meridians(self):
        # frozen from closed form: Phi(0) = k sy sqrt(2/3), Phi(pi/3) = sy sqrt(2/3)
        assert ys.phi_analytic(0.0, 0.75, SY) == pytest.approx(183711730.70873842, rel=1e-14)
        assert ys.phi_analytic(np.pi / 3, 0.75, SY) == pytest.approx(244948974.27831787, rel=1e-14)

    def test_von_mises_is_circle(self):
        th = np.linspace(0, np.pi / 3, 11)
        np.testing.assert_allclose(ys.phi_analytic(th, 1.0, SY), np.sqrt(2 / 3) * SY)
        np.testing.assert_allclose(ys.dphi_analytic(th, 1.0, SY), 0.0)

    def test_derivative_matches_finite_difference(self):
        th = np.linspace(0.05, 1.0, 9)
        h = 1e-6
        fd = (ys.phi_analytic(th + h, 0.75, SY) - ys.phi_analytic(th - h, 0.75, SY)) / (2 * h)
        np.testing.assert_allclose(ys.dphi_analytic(th, 0.75, SY), fd, rtol=1e-7)

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            ys.phi_analytic(0.0, 0.0, SY)
        with pytest.raises(ValueError):
            ys.AnalyticYield(-1.0, SY)

    def test_fold(self):
        np.testing.assert_allclose(ys.fold_theta([-0.1, 0.1, np.pi / 3 + 0.1, 2 * np.pi / 3]), [0.1, 0.1, np.pi / 3 - 0.1, 0.0], atol=1e-15)


class TestInterpolator:
    def test_spline_reproduces_samples_and_converges(self):
        th, rho = _samples(12)
        f = ys.YieldSurfaceInterpolator().fit(th, rho)
        np.testing.assert_allclose(f.predict(th), rho, rtol=1e-13)
        grid = np.linspace(0, np.pi / 3, 200)
        err12 = np.abs(f.phi(grid) / ys.phi_analytic(grid, 0.75, SY) - 1).max()
        th, rho = _samples(48)
        err48 = np.abs(ys.fit_yield(np.column_stack([th, rho])).phi(grid) / ys.phi_analytic(grid, 0.75, SY) - 1).max()
        assert err48 < err12 / 50  # fourth-order spline convergence

    def test_zero_slope_at_sector_ends(self):
        th, rho = _samples(9)
        for kind in ("spline", "linear", "nearest"):
            f = ys.YieldSurfaceInterpolator(kind).fit(th, rho)
            np.testing.assert_allclose(f.dphi(np.array([0.0, np.pi / 3])), 0.0, atol=1e-6 * SY)

    def test_spline_derivative_against_finite_difference(self):
        th, rho = _samples(15)
        f = ys.YieldSurfaceInterpolator().fit(th, rho)
        x = np.linspace(0.1, 0.9, 7)
        h = 1e-6
        np.testing.assert_allclose(f.dphi(x), (f.phi(x + h) - f.phi(x - h)) / (2 * h), rtol=1e-5)

    def test_symmetry(self):
        th, rho = _samples(10)
        f = ys.fit_yield(np.column_stack([th, rho]))
        x = np.linspace(0, np.pi / 3, 13)
        np.testing.assert_allclose(f.phi(-x), f.phi(x))
        np.testing.assert_allclose(f.phi(2 * np.pi / 3 - x), f.phi(x))

    def test_unsorted_random_samples(self):
        rng = np.random.default_rng(0)
        th = rng.uniform(0, np.pi / 3, 30)
        f = ys.YieldSurfaceInterpolator().fit(th, ys.phi_analytic(th, 0.75, SY))
        assert f.phi(0.5) == pytest.approx(ys.phi_analytic(0.5, 0.75, SY), rel=1e-3)

    def test_linear_and_nearest(self):
        th, rho = _samples(4, k=1.0)
        for kind in ("linear", "nearest"):
            f = ys.YieldSurfaceInterpolator(kind).fit(th, rho)
            np.testing.assert_allclose(f.phi([0.1, 0.7]), np.sqrt(2 / 3) * SY)

    @pytest.mark.parametrize(
        "theta,rho",
        [([0.1], [1.0]), ([0.1, 0.1], [1.0, 1.0]), ([0.1, 2.0], [1.0, 1.0]), ([0.1, 0.2], [1.0, -1.0])],
    )
    def test_invalid_input(self, theta, rho):
        with pytest.raises(ValueError):
            ys.YieldSurfaceInterpolator().fit(theta, rho)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ys.YieldSurfaceInterpolator("cubic").fit([0.0, 1.0], [1.0, 1.0])

    def test_estimator_api(self):
        est = ys.YieldSurfaceInterpolator(kind="linear")
        assert est.get_params() == {"kind": "linear"}
        assert clone(est).kind == "linear"
        with pytest.raises(NotFittedError):
            est.predict([0.1])


class TestNormals:
    def test_comparison_stress_on_surface(self):
        surf = ys.AnalyticYield(0.75, SY)
        sig = tl.sym([[0.75 * SY, 0, 0, 0, 0, 0], [-SY, 0, 0, 0, 0, 0]])
        np.testing.assert_allclose(ys.comparison_stress(sig, surf), 1.0, rtol=1e-14)
        assert ys.comparison_stress(np.eye(3), surf) == 0.0

    def test_uniaxial_normal(self):
        surf = ys.AnalyticYield(0.75, SY)
        N = ys.stress_normal(tl.sym([SY, 0, 0, 0, 0, 0]), surf)
        np.testing.assert_allclose(N, np.diag([2, -1, -1]) / np.sqrt(6), atol=1e-15)

    def test_normal_is_gradient_direction(self):
        # the yield function rho / Phi(theta) increases fastest along N
        surf = ys.AnalyticYield(0.75, SY)
        rng = np.random.default_rng(1)
        for _ in range(5):
            sig = tl.sym(rng.normal(size=6) * 1e8)
            N = ys.stress_normal(sig, surf)
            h = 1e2
            grad = np.zeros((3, 3))
            for i in range(6):
                e = np.zeros(6)
                e[i] = 1.0
                d = tl.sym(e)
                g = (ys.comparison_stress(sig + h * d, surf) - ys.comparison_stress(sig - h * d, surf)) / (2 * h)
                grad += g * d / tl.ddot(d, d)
            grad = tl.deviator(grad)
            np.testing.assert_allclose(N, grad / tl.frobenius(grad), atol=1e-6)
            assert tl.frobenius(N) == pytest.approx(1.0)
            assert tl.trace(N) == pytest.approx(0.0, abs=1e-14)

    def test_hydrostatic_raises(self):
        with pytest.raises(ys.DegenerateNormalError):
            ys.stress_normal(np.eye(3), ys.AnalyticYield(1.0, SY))
        with pytest.raises(ys.DegenerateNormalError):
            ys.normal_octahedral(0.1, 0.0, 0.0, np.zeros(3))


def test_csv_round_trip(tmp_path):
    pts = np.array([[0.0, 1.5], [0.5, 2.25]])
    ys.write_yield_points(tmp_path / "y.csv", pts)
    np.testing.assert_array_equal(ys.read_yield_points(tmp_path / "y.csv"), pts)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        ys.read_yield_points(tmp_path / "bad.csv")
