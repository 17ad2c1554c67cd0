import numpy as np
import pytest

from fundforms.chart import Chart
from fundforms.errors import DegenerateImmersionError, ShapeMismatchError
from fundforms import fields as F
from fundforms import geometries as G
from fundforms import immersion as I

from conftest import haar_rotation, loglog_slope


class TestInducedMetric:
    def test_chart_embedding(self):
        f = G.plane_immersion(17)
        g = I.induced_metric(f)
        assert np.allclose(g.values, np.eye(2), atol=1e-13)

    def test_cylinder_flat(self):
        f = G.cylinder_immersion(33)
        g = I.induced_metric(f)
        h2 = max(f.chart.spacing) ** 2
        assert np.abs(g.values - np.eye(2)).max() < h2

    def test_scaling(self):
        f = G.plane_immersion(17)
        f2 = F.ImmersionField(f.chart, 2.0 * f.values)
        g2 = I.induced_metric(f2)
        assert np.allclose(g2.values, 4.0 * np.eye(2), atol=1e-12)

    def test_degenerate_reports_points(self, unit_square):
        X, Y = unit_square.meshgrid()
        vals = np.stack([X, 0.0 * Y, X * Y], axis=-1)  # rank 1 in places
        with pytest.raises(DegenerateImmersionError) as err:
            I.induced_metric(F.ImmersionField(unit_square, vals))
        assert len(err.value.points) > 0


class TestNormalField:
    def test_chart_embedding_unit_z(self):
        f = G.plane_immersion(9)
        nu = I.normal_field(f)
        assert np.allclose(nu[..., 0, :], [0.0, 0.0, 1.0], atol=1e-13)

    def test_cylinder_outward(self):
        f = G.cylinder_immersion(33)
        nu = I.normal_field(f)[..., 0, :]
        U, _ = f.chart.meshgrid()
        expected = np.stack([np.cos(U), np.sin(U), np.zeros_like(U)], axis=-1)
        assert np.abs(nu - expected).max() < 1e-3

    def test_sphere_position_vector(self):
        f = G.sphere_cap_immersion(33)
        nu = I.normal_field(f)[..., 0, :]
        assert np.abs(nu - f.values).max() < 1e-3

    def test_positively_oriented(self):
        for gen in (G.plane_immersion, G.cylinder_immersion, G.sphere_cap_immersion, G.graph_xy_immersion):
            f = gen(9)
            df = F.grad_values(f.chart, f.values)
            nu = I.normal_field(f)
            basis = np.concatenate([np.swapaxes(df, -1, -2), np.swapaxes(nu, -1, -2)], axis=-1)
            assert np.all(np.linalg.det(basis) > 0)

    def test_codim_one_cross_product_oracle(self):
        f = G.graph_xy_immersion(17)
        df = F.grad_values(f.chart, f.values)
        nu = I.normal_field(f)[..., 0, :]
        cross = np.cross(df[..., 0, :], df[..., 1, :])
        cross = cross / np.linalg.norm(cross, axis=-1)[..., None]
        assert np.allclose(nu, cross, atol=1e-12)

    def test_codim_two_orthonormal(self):
        f = G.graph_r4_immersion(9)
        df = F.grad_values(f.chart, f.values)
        nu = I.normal_field(f)
        gram = np.einsum("...pa,...qa->...pq", nu, nu)
        assert np.allclose(gram, np.eye(2), atol=1e-12)
        tangency = np.einsum("...pa,...la->...pl", nu, df)
        assert np.abs(tangency).max() < 1e-12


class TestSecondForm:
    def test_plane_zero(self):
        f = G.plane_immersion(9)
        B, nabE = I.second_form(f)
        assert np.abs(B.values).max() < 1e-12
        assert np.abs(nabE.values).max() == 0.0

    def test_cylinder_principal_curvatures(self):
        f = G.cylinder_immersion(33)
        B, _ = I.second_form(f)
        h2 = max(f.chart.spacing) ** 2
        expected = np.zeros((2, 2))
        expected[0, 0] = -1.0
        assert np.abs(B.values[..., 0, :, :] - expected).max() < 2 * h2

    def test_sphere_outward_convention(self):
        # positively-oriented harvest of the standard chart gives B = -g
        f = G.sphere_cap_immersion(33)
        g = I.induced_metric(f)
        B, _ = I.second_form(f)
        assert np.abs(B.values[..., 0, :, :] + g.values).max() < 5e-3

    def test_graph_xy_exact_bilinear(self):
        f = G.graph_xy_immersion(17)
        B, _ = I.second_form(f)
        X, Y = f.chart.meshgrid()
        s = np.sqrt(1.0 + X**2 + Y**2)
        assert np.allclose(B.values[..., 0, 0, 1], 1.0 / s, atol=1e-12)
        assert np.allclose(B.values[..., 0, 0, 0], 0.0, atol=1e-12)

    def test_equivariance_under_rigid_motion(self, rng):
        f = G.graph_xy_immersion(17)
        Q = haar_rotation(rng, 3)
        t = rng.standard_normal(3)
        f2 = F.ImmersionField(f.chart, f.values @ Q.T + t)
        g1 = I.induced_metric(f)
        g2 = I.induced_metric(f2)
        assert np.allclose(g1.values, g2.values, atol=1e-12)
        B1, _ = I.second_form(f)
        B2, _ = I.second_form(f2)
        assert np.allclose(B1.values, B2.values, atol=1e-10)


class TestBestRigidMotion:
    def test_identity_on_equal_inputs(self):
        f = G.graph_xy_immersion(9)
        m = I.best_rigid_motion(f, f)
        assert np.allclose(m.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(m.translation, 0.0, atol=1e-12)

    def test_exact_recovery_of_rigid_pair(self, rng):
        f_ref = G.sphere_cap_immersion(17)
        Q = haar_rotation(rng, 3)
        t = rng.standard_normal(3)
        f = F.ImmersionField(f_ref.chart, f_ref.values @ Q.T + t)
        m = I.best_rigid_motion(f, f_ref)
        aligned = m.apply(f.values)
        assert np.abs(aligned - f_ref.values).max() < 1e-12

    def test_noise_residual_bounded(self, rng):
        f_ref = G.graph_xy_immersion(9)
        eta = 1e-3 * rng.standard_normal(f_ref.values.shape)
        f = F.ImmersionField(f_ref.chart, f_ref.values + eta)
        m = I.best_rigid_motion(f, f_ref)
        resid = np.sqrt(np.sum((m.apply(f.values) - f_ref.values) ** 2))
        assert resid <= np.sqrt(np.sum(eta**2)) + 1e-12

    def test_residual_invariant_under_common_motion(self, rng):
        f_ref = G.graph_xy_immersion(9)
        f = F.ImmersionField(f_ref.chart, f_ref.values + 0.01 * np.sin(f_ref.values))
        Q = haar_rotation(rng, 3)
        t = rng.standard_normal(3)

        def resid(a, b):
            m = I.best_rigid_motion(a, b)
            return np.sqrt(np.sum((m.apply(a.values) - b.values) ** 2))

        fa = F.ImmersionField(f.chart, f.values @ Q.T + t)
        fb = F.ImmersionField(f.chart, f_ref.values @ Q.T + t)
        assert resid(fa, fb) == pytest.approx(resid(f, f_ref), rel=1e-9)

    def test_rotation_validated(self):
        with pytest.raises(ValueError):
            I.RigidMotion(2.0 * np.eye(3), np.zeros(3))
        with pytest.raises(ValueError):
            I.RigidMotion(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


class TestQuotientDistance:
    def test_rigid_image_is_zero(self, rng):
        f_ref = G.sphere_cap_immersion(17)
        Q = haar_rotation(rng, 3)
        t = rng.standard_normal(3)
        f = F.ImmersionField(f_ref.chart, f_ref.values @ Q.T + t)
        assert I.quotient_distance(f, f_ref, 2, 4.0) < 1e-9

    def test_translation_quotiented(self):
        f_ref = G.graph_xy_immersion(9)
        f = F.ImmersionField(f_ref.chart, f_ref.values + np.array([3.0, -1.0, 2.0]))
        assert I.quotient_distance(f, f_ref, 1, 2.0) < 1e-12

    def test_bump_sandwich(self):
        f_ref = G.plane_immersion(17)
        X, Y = f_ref.chart.meshgrid()
        phi = np.zeros(f_ref.chart.shape + (3,))
        phi[..., 2] = np.sin(np.pi * X) * np.sin(np.pi * Y)
        eps = 1e-2
        f = F.ImmersionField(f_ref.chart, f_ref.values + eps * phi)
        qd = I.quotient_distance(f, f_ref, 2, 2.0)
        upper = F.sobolev_norm(eps * phi, 2, 2.0, chart=f_ref.chart)
        assert 0 < qd <= upper + 1e-12

    def test_chart_mismatch(self):
        f1 = G.plane_immersion(9)
        f2 = G.plane_immersion(11)
        with pytest.raises(ShapeMismatchError):
            I.quotient_distance(f1, f2, 1, 2.0)
