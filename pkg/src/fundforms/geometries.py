"""Closed-form geometries: analytic immersions and compatible form triples.

These are the work-horses of the test suite and the experiment drivers:
surfaces whose metric, second fundamental form and normal connection are
known exactly, plus parameterized families (spheres of varying radius,
wrinkled membranes) whose limits and rates are known in closed form.

Normal orientation convention, used everywhere: the normal frame is chosen
so that (coordinate tangents, normals) is positively oriented in ambient
space.  With that convention the outward-oriented unit sphere patch below
carries B = -g.
"""

from __future__ import annotations

import numpy as np

from .chart import Chart
from .fields import (
    ImmersionField,
    MetricField,
    NormalConnectionField,
    SecondFormField,
)

DEFAULT_CAP_EXTENT = ((0.6, 2.2), (0.2, 1.4))


def grid_chart(resolution, extent, codim_k=1) -> Chart:
    if np.isscalar(resolution):
        resolution = (int(resolution),) * len(extent)
    return Chart(len(extent), codim_k, tuple(extent), tuple(resolution))


# ---------------------------------------------------------------------------
# d = 2, k = 1 fixtures


def plane_immersion(resolution=33, extent=((0.0, 1.0), (0.0, 1.0))) -> ImmersionField:
    chart = grid_chart(resolution, extent)
    X, Y = chart.meshgrid()
    vals = np.stack([X, Y, np.zeros_like(X)], axis=-1)
    return ImmersionField(chart, vals)


def cylinder_immersion(resolution=33, extent=((0.1, 1.6), (0.0, 1.0))) -> ImmersionField:
    chart = grid_chart(resolution, extent)
    U, V = chart.meshgrid()
    vals = np.stack([np.cos(U), np.sin(U), V], axis=-1)
    return ImmersionField(chart, vals)


def graph_xy_immersion(resolution=33, extent=((-0.5, 0.5), (-0.5, 0.5))) -> ImmersionField:
    chart = grid_chart(resolution, extent)
    X, Y = chart.meshgrid()
    vals = np.stack([X, Y, X * Y], axis=-1)
    return ImmersionField(chart, vals)


def sphere_cap_immersion(resolution=33, extent=DEFAULT_CAP_EXTENT, radius=1.0) -> ImmersionField:
    chart = grid_chart(resolution, extent)
    P, T = chart.meshgrid()
    vals = radius * np.stack(
        [np.sin(P) * np.cos(T), np.sin(P) * np.sin(T), np.cos(P)], axis=-1
    )
    return ImmersionField(chart, vals, sphere_valued=(radius == 1.0))


def round_metric(chart: Chart, radius=1.0) -> MetricField:
    """Metric of a radius-r sphere in the polar chart (phi, theta)."""
    P, _ = chart.meshgrid()
    g = np.zeros(chart.shape + (2, 2))
    g[..., 0, 0] = radius**2
    g[..., 1, 1] = (radius * np.sin(P)) ** 2
    return MetricField(chart, g)


def sphere_cap_forms(resolution=33, extent=DEFAULT_CAP_EXTENT, radius=1.0):
    """Closed-form (g, B, nablaE) of the sphere cap, outward-normal convention."""
    chart = grid_chart(resolution, extent)
    g = round_metric(chart, radius)
    B = SecondFormField(chart, -(g.values / radius)[..., None, :, :])
    nablaE = NormalConnectionField(chart, np.zeros(chart.shape + (2, 1, 1)))
    return g, B, nablaE


def cylinder_forms(resolution=33, extent=((0.1, 1.6), (0.0, 1.0))):
    """Closed-form (g, B, nablaE) of the unit cylinder, outward-normal convention."""
    chart = grid_chart(resolution, extent)
    g = MetricField(chart, np.broadcast_to(np.eye(2), chart.shape + (2, 2)).copy())
    Bv = np.zeros(chart.shape + (1, 2, 2))
    Bv[..., 0, 0, 0] = -1.0
    B = SecondFormField(chart, Bv)
    nablaE = NormalConnectionField(chart, np.zeros(chart.shape + (2, 1, 1)))
    return g, B, nablaE


def sphere_family_forms(s, resolution=33, extent=DEFAULT_CAP_EXTENT):
    """Compatible triple of the sphere with radius 1/(1+s), plus its immersion.

    The caps are parameterized by arc length along the meridian (u is
    geodesic distance from the pole, theta the azimuth), so the whole
    closed-form triple g_s = diag(1, r^2 sin^2(u/r)), B_s = -g_s / r varies
    with the radius: both the coframe and the connection form move, and the
    family stays exactly compatible.
    """
    r = 1.0 / (1.0 + s)
    chart = grid_chart(resolution, extent)
    U, T = chart.meshgrid()
    gv = np.zeros(chart.shape + (2, 2))
    gv[..., 0, 0] = 1.0
    gv[..., 1, 1] = (r * np.sin(U / r)) ** 2
    g = MetricField(chart, gv)
    B = SecondFormField(chart, -(gv / r)[..., None, :, :])
    nablaE = NormalConnectionField(chart, np.zeros(chart.shape + (2, 1, 1)))
    fv = r * np.stack(
        [np.sin(U / r) * np.cos(T), np.sin(U / r) * np.sin(T), np.cos(U / r)], axis=-1
    )
    f = ImmersionField(chart, fv)
    return g, B, nablaE, f


# ---------------------------------------------------------------------------
# d = 2, k = 2 fixture (codimension two, curved normal bundle)


def graph_r4_immersion(resolution=33, extent=((-0.5, 0.5), (-0.5, 0.5))) -> ImmersionField:
    """Generic quadratic graph (x, y, p1(x,y), p2(x,y)) in R^4.

    The two shape operators do not commute, so the normal curvature is
    genuinely nonzero: the Ricci equation is exercised non-trivially.
    """
    chart = grid_chart(resolution, extent, codim_k=2)
    X, Y = chart.meshgrid()
    p1 = 0.3 * X**2 + 0.2 * X * Y
    p2 = 0.25 * Y**2 + 0.1 * X * Y
    vals = np.stack([X, Y, p1, p2], axis=-1)
    return ImmersionField(chart, vals)


# ---------------------------------------------------------------------------
# Round chart for the sphere-map rigidity experiments


def sphere_chart_frames(chart: Chart):
    """Reference immersion iota into the unit sphere with its exact differential.

    Returns (iota, d_iota, tangent frame) where d_iota[..., l, a] = d_l iota^a
    and frame[..., i, a] are the orthonormal tangent vectors dual to the
    coframe of the round metric.
    """
    P, T = chart.meshgrid()
    sp, cp, st, ct = np.sin(P), np.cos(P), np.sin(T), np.cos(T)
    iota = np.stack([sp * ct, sp * st, cp], axis=-1)
    d_phi = np.stack([cp * ct, cp * st, -sp], axis=-1)
    d_theta = np.stack([-sp * st, sp * ct, np.zeros_like(P)], axis=-1)
    d_iota = np.stack([d_phi, d_theta], axis=-2)
    frame = np.stack([d_phi, d_theta / sp[..., None]], axis=-2)
    return iota, d_iota, frame


# ---------------------------------------------------------------------------
# Membrane families (codimension one graphs over the unit square)


def wrinkle_immersion(chart: Chart, eps: float, shear: float = 0.0) -> ImmersionField:
    X, Y = chart.meshgrid()
    u = X + shear * Y
    vals = np.stack([u, Y, eps**2 * np.sin(u / eps)], axis=-1)
    return ImmersionField(chart, vals)


WRINKLE_EXTENT = ((0.0, 8.0), (0.0, 1.0))
WRINKLE_RESOLUTION = (2049, 33)


def wrinkle_family(eps_values, resolution=WRINKLE_RESOLUTION, extent=WRINKLE_EXTENT, shear: float = 0.0):
    """Wrinkled-membrane sequence over a long strip.

    Composed immersions (x', y, eps^2 sin(x'/eps)) with x' = x + shear*y;
    the base metric is the constant shear pullback of the flat plane.  Known
    rates: the pullback metric converges at order 1 in W^{1,p'}; the limit
    immersion is the (sheared) flat strip with vanishing second form; the
    graph amplitude decays at order 2 (Richardson order).

    The default strip is long enough that every default sine-dictionary
    mode oscillates slower than the slowest wrinkle (frequencies j pi / 8
    vs 1/eps >= 4), keeping all dictionary pairings in the decaying regime.
    """
    from .asymptotics import MembraneSequence

    chart = grid_chart(resolution, extent)
    S = np.array([[1.0, shear], [0.0, 1.0]])
    g0 = MetricField(chart, np.broadcast_to(S.T @ S, chart.shape + (2, 2)).copy())
    eps_values = tuple(sorted((float(e) for e in eps_values), reverse=True))
    immersions = tuple(wrinkle_immersion(chart, e, shear) for e in eps_values)
    jac = np.broadcast_to(S, chart.shape + (2, 2)).copy()
    jacobians = (jac,) * len(eps_values)
    return MembraneSequence(
        chart=chart,
        eps_values=eps_values,
        immersions=immersions,
        jacobians=jacobians,
        base_metric=g0,
        name="sheared-wrinkles" if shear else "wrinkles",
        richardson_order=2.0,
        metric_decay_rate=1.0,
    )


def limit_wrinkle_immersion(chart: Chart, shear: float = 0.0) -> ImmersionField:
    X, Y = chart.meshgrid()
    u = X + shear * Y
    return ImmersionField(chart, np.stack([u, Y, np.zeros_like(u)], axis=-1))
