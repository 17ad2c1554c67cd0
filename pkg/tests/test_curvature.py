import numpy as np
import pytest

from fundforms.chart import Chart
from fundforms.errors import SPDViolationError
from fundforms import curvature as C
from fundforms import fields as F
from fundforms import geometries as G
from fundforms import immersion as I

from conftest import loglog_slope


def flat_metric(chart, scale=1.0):
    return F.MetricField(chart, np.broadcast_to(scale * np.eye(2), chart.shape + (2, 2)).copy())


def polar_type_chart(n=33):
    return Chart(2, 1, ((1.0, 2.0), (0.0, 1.0)), (n, n))


def polar_type_metric(chart):
    U, _ = chart.meshgrid()
    g = np.zeros(chart.shape + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = U**2
    return F.MetricField(chart, g)


class TestChristoffel:
    def test_identity_metric(self, unit_square):
        gamma = C.christoffel(flat_metric(unit_square))
        assert np.all(gamma.values == 0.0)

    def test_constant_conformal(self, unit_square):
        gamma = C.christoffel(flat_metric(unit_square, scale=2.3))
        assert np.all(gamma.values == 0.0)

    def test_polar_type_oracle(self):
        # g = diag(1, u^2): Gamma^1_22 = -u, Gamma^2_12 = 1/u, others 0
        chart = polar_type_chart()
        gamma = C.christoffel(polar_type_metric(chart)).values
        U, _ = chart.meshgrid()
        assert np.allclose(gamma[..., 0, 1, 1], -U, atol=1e-10)
        assert np.allclose(gamma[..., 1, 0, 1], 1.0 / U, atol=1e-10)
        mask = np.ones((2, 2, 2), dtype=bool)
        mask[0, 1, 1] = mask[1, 0, 1] = mask[1, 1, 0] = False
        assert np.abs(gamma[..., mask]).max() < 1e-10

    def test_scaling_invariance_exact(self):
        # power-of-two conformal factors scale every intermediate exactly
        chart = polar_type_chart(17)
        g = polar_type_metric(chart)
        g4 = F.MetricField(chart, 4.0 * g.values)
        assert np.array_equal(C.christoffel(g).values, C.christoffel(g4).values)

    def test_symmetry_in_lower_indices(self):
        chart = polar_type_chart(9)
        gamma = C.christoffel(polar_type_metric(chart)).values
        assert np.array_equal(gamma, np.swapaxes(gamma, -1, -2))

    def test_spd_violation_raises(self, unit_square):
        vals = np.zeros(unit_square.shape + (2, 2))
        vals[..., 0, 0] = vals[..., 1, 1] = 1e-14
        with pytest.raises(SPDViolationError):
            F.MetricField(unit_square, vals)


class TestRiemann:
    def test_flat_zero(self, unit_square):
        R = C.riemann(flat_metric(unit_square))
        assert np.all(R.values == 0.0)

    def test_scaled_flat_zero(self, unit_square):
        R = C.riemann(flat_metric(unit_square, 4.0))
        assert np.all(R.values == 0.0)

    def test_round_sphere_oracle(self):
        errs, hs = [], []
        for n in (17, 33, 65):
            chart = G.grid_chart(n, ((0.5, 2.5), (0.0, 1.0)))
            g = G.round_metric(chart)
            R = C.riemann(g).values
            P, _ = chart.meshgrid()
            errs.append(np.abs(R[..., 0, 1, 0, 1] - np.sin(P) ** 2).max())
            hs.append(max(chart.spacing))
        assert errs[-1] < 2e-3
        assert loglog_slope(hs, errs) >= 1.9

    def test_symmetries_converge(self):
        errs, hs = [], []
        for n in (65, 129, 257):
            chart = G.grid_chart(n, ((0.5, 2.5), (0.0, 1.0)))
            R = C.riemann(G.round_metric(chart)).values
            anti_ij = np.abs(R + np.swapaxes(R, -4, -3)).max()
            anti_kl = np.abs(R + np.swapaxes(R, -2, -1)).max()
            pair = np.abs(R - np.transpose(R, (0, 1, 4, 5, 2, 3))).max()
            bianchi = np.abs(
                R + np.transpose(R, (0, 1, 3, 4, 2, 5)) + np.transpose(R, (0, 1, 4, 2, 3, 5))
            ).max()
            # index antisymmetry and first Bianchi hold exactly by construction;
            # the metric-compatibility symmetries carry the h^2 truncation error
            assert anti_ij == 0.0 and bianchi < 1e-12
            errs.append(max(anti_kl, pair))
            hs.append(max(chart.spacing))
        assert loglog_slope(hs, errs) >= 1.9


class TestGaussResidual:
    def test_flat_zero_form(self, unit_square):
        B = F.SecondFormField(unit_square, np.zeros(unit_square.shape + (1, 2, 2)))
        assert C.gauss_residual(flat_metric(unit_square), B, 2.0) == 0.0

    def test_sphere_compatible(self):
        errs, hs = [], []
        for n in (17, 33):
            g, B, nabE = G.sphere_cap_forms(n)
            errs.append(C.gauss_residual(g, B, 2.0))
            hs.append(max(g.chart.spacing))
        assert loglog_slope(hs, errs) >= 1.8

    def test_flat_identity_counterexample(self, unit_square):
        g = flat_metric(unit_square)
        B = F.SecondFormField(unit_square, np.broadcast_to(np.eye(2), unit_square.shape + (1, 2, 2)).copy())
        field = C.gauss_residual_field(g, B).values
        assert np.all(field[..., 0, 1, 0, 1] == 1.0)
        assert np.abs(field).max() == 1.0

    def test_quadratic_in_B(self):
        g, B, nabE = G.sphere_cap_forms(17)
        Bneg = F.SecondFormField(g.chart, -B.values)
        assert C.gauss_residual(g, B, 2.0) == pytest.approx(C.gauss_residual(g, Bneg, 2.0))


class TestCodazziResidual:
    def _trivial_nabE(self, chart):
        return F.NormalConnectionField(chart, np.zeros(chart.shape + (2, 1, 1)))

    def test_zero_form(self, unit_square):
        B = F.SecondFormField(unit_square, np.zeros(unit_square.shape + (1, 2, 2)))
        assert C.codazzi_residual(flat_metric(unit_square), B, self._trivial_nabE(unit_square), 2.0) == 0.0

    def test_closed_form_sphere_exactly_compatible(self):
        # for B proportional to g the discrete first-kind Christoffel terms
        # cancel the antisymmetrized dB algebraically, at every resolution
        for n in (17, 33):
            g, B, nabE = G.sphere_cap_forms(n)
            assert C.codazzi_residual(g, B, nabE, np.inf) < 1e-12

    def test_harvested_sphere_converges(self):
        errs, hs = [], []
        for n in (17, 33, 65):
            f = G.sphere_cap_immersion(n)
            g = I.induced_metric(f)
            B, nabE = I.second_form(f)
            errs.append(C.codazzi_residual(g, B, nabE, 2.0))
            hs.append(max(g.chart.spacing))
        assert loglog_slope(hs, errs) >= 1.8

    def test_linear_inhomogeneous_form(self, unit_square):
        # B = diag(y, 0) over a flat metric: the only nonzero residual
        # components are d_2 B_11 - d_1 B_21 = +1 and its (i,j)-mirror
        X, Y = unit_square.meshgrid()
        Bv = np.zeros(unit_square.shape + (1, 2, 2))
        Bv[..., 0, 0, 0] = Y
        B = F.SecondFormField(unit_square, Bv)
        field = C.codazzi_residual_field(flat_metric(unit_square), B, self._trivial_nabE(unit_square)).values
        assert np.allclose(field[..., 0, 1, 0, 0], 1.0, atol=1e-12)
        assert np.allclose(field[..., 0, 0, 1, 0], -1.0, atol=1e-12)
        assert np.abs(field).max() == pytest.approx(1.0, abs=1e-12)
        # developable data B = diag(x, 0) is compatible: residual vanishes
        Bv2 = np.zeros(unit_square.shape + (1, 2, 2))
        Bv2[..., 0, 0, 0] = X
        B2 = F.SecondFormField(unit_square, Bv2)
        assert C.codazzi_residual(flat_metric(unit_square), B2, self._trivial_nabE(unit_square), np.inf) < 1e-12


class TestRicciResidual:
    def test_codimension_one_vacuous(self):
        g, B, nabE = G.sphere_cap_forms(9)
        val, flag = C.ricci_residual(g, B, nabE, 2.0)
        assert val == 0.0
        assert "vacuous" in flag

    def test_zero_data(self):
        chart = Chart(2, 2, ((0, 1), (0, 1)), (9, 9))
        g = F.MetricField(chart, np.broadcast_to(np.eye(2), chart.shape + (2, 2)).copy())
        B = F.SecondFormField(chart, np.zeros(chart.shape + (2, 2, 2)))
        nabE = F.NormalConnectionField(chart, np.zeros(chart.shape + (2, 2, 2)))
        val, flag = C.ricci_residual(g, B, nabE, 2.0)
        assert val == 0.0 and flag == ""

    def test_commuting_constant_forms(self):
        # B^1 = diag(1,0), B^2 = diag(0,1) commute, flat normal connection
        chart = Chart(2, 2, ((0, 1), (0, 1)), (9, 9))
        g = F.MetricField(chart, np.broadcast_to(np.eye(2), chart.shape + (2, 2)).copy())
        Bv = np.zeros(chart.shape + (2, 2, 2))
        Bv[..., 0, 0, 0] = 1.0
        Bv[..., 1, 1, 1] = 1.0
        B = F.SecondFormField(chart, Bv)
        nabE = F.NormalConnectionField(chart, np.zeros(chart.shape + (2, 2, 2)))
        val, _ = C.ricci_residual(g, B, nabE, np.inf)
        assert val == 0.0

    def test_harvested_graph_r4_converges(self):
        errs, hs = [], []
        for n in (17, 33, 65):
            f = G.graph_r4_immersion(n)
            g = I.induced_metric(f)
            B, nabE = I.second_form(f)
            val, _ = C.ricci_residual(g, B, nabE, 2.0)
            errs.append(val)
            hs.append(max(f.chart.spacing))
        # the normal curvature itself is O(1), the residual vanishes at O(h^2)
        scale = np.abs(C.normal_curvature_field(g.chart, nabE)).max()
        assert scale > 0.05
        assert loglog_slope(hs, errs) >= 1.8


class TestResidualReportAndThreshold:
    def test_report_on_harvested_immersions(self):
        for gen in (G.cylinder_immersion, G.sphere_cap_immersion, G.graph_xy_immersion):
            f = gen(33)
            g = I.induced_metric(f)
            B, nabE = I.second_form(f)
            rep = C.residual_report(g, B, nabE, p=2.0)
            thresh = C.compatibility_threshold(g, B)
            assert max(rep.gauss, rep.codazzi, rep.ricci) <= thresh

    def test_incompatible_data_flagged(self):
        g, B, nabE = G.sphere_cap_forms(33)
        Bbad = F.SecondFormField(g.chart, 1.5 * B.values)
        rep = C.residual_report(g, Bbad, nabE, p=2.0)
        assert rep.gauss > C.compatibility_threshold(g, Bbad)

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            C.ResidualReport(gauss=-1.0, codazzi=0.0, ricci=0.0)
