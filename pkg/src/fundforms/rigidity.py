"""Geometric rigidity machinery for maps from a Riemannian chart to a sphere.

Pointwise distance of a differential to the orientation-preserving
isometries, the intrinsic cofactor of a differential, the weak divergence
identity it satisfies, optimal sphere rotations, and the experiment that
measures the rigidity inequality on families of nearly-isometric maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import Chart
from .errors import FieldError, ShapeMismatchError
from .fields import (
    MetricField,
    grad_values,
    l2_pairing,
    lp_norm,
    sine_dictionary,
)
from .cartan import orthonormal_frame
from .immersion import RigidMotion

UNIT_TOL = 1e-12
EXACT_ISOMETRY_FLOOR = 1e-11


@dataclass(frozen=True)
class SphereMap:
    """Unit-sphere-valued map on a chart carrying a metric.

    ``differential`` optionally stores the exact differential
    (df[..., l, a] = d_l f^a); when absent the finite-difference gradient is
    used.  ``boundary_ref`` records the boundary values the map is supposed
    to match (the boundary-pinned class of maps); the deviation is reported
    by ``boundary_deviation``.
    """

    chart: Chart
    metric: MetricField
    values: np.ndarray
    differential: np.ndarray = None
    boundary_ref: np.ndarray = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != self.chart.shape + (self.chart.dim_d + 1,):
            raise ShapeMismatchError("sphere map values must have shape grid + (d+1,)")
        radii = np.linalg.norm(arr, axis=-1)
        err = np.max(np.abs(radii - 1.0))
        if err > UNIT_TOL:
            raise FieldError(f"sphere map off the unit sphere by {err:.3e}")
        if self.metric.chart != self.chart:
            raise ShapeMismatchError("metric lives on a different chart")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.differential is not None:
            dfl = np.ascontiguousarray(np.asarray(self.differential, dtype=np.float64))
            if dfl.shape != self.chart.shape + (self.chart.dim_d, self.chart.dim_d + 1):
                raise ShapeMismatchError("differential must have shape grid + (d, d+1)")
            dfl.setflags(write=False)
            object.__setattr__(self, "differential", dfl)

    def df(self) -> np.ndarray:
        if self.differential is not None:
            return self.differential
        return grad_values(self.chart, self.values)

    def boundary_deviation(self) -> float:
        if self.boundary_ref is None:
            return 0.0
        diff = np.abs(self.values - self.boundary_ref)
        d = self.chart.dim_d
        worst = 0.0
        for ax in range(d):
            sl_lo = [slice(None)] * d
            sl_hi = [slice(None)] * d
            sl_lo[ax], sl_hi[ax] = 0, -1
            worst = max(worst, float(diff[tuple(sl_lo)].max()), float(diff[tuple(sl_hi)].max()))
        return worst


@dataclass(frozen=True)
class RigidityReport:
    """Ingredients of the rigidity inequality for one map."""

    defect: float
    best_motion: RigidMotion
    lhs: float
    ratio: float
    flag: str = ""

    def __post_init__(self):
        if self.defect < 0 or self.lhs < 0:
            raise ValueError("defect and lhs must be >= 0")


def sphere_tangent_frames(points: np.ndarray) -> np.ndarray:
    """Orthonormal tangent frames on the sphere at the given unit points.

    The ambient axis most aligned with the point is dropped; the remaining
    axes are projected onto the tangent space and orthonormalized.  The
    frame is oriented so that (tau_1, ..., tau_d, q) is positively oriented
    in R^(d+1).  Returns tau[..., beta, a].
    """
    n = points.shape[-1]
    d = n - 1
    drop = np.argmax(np.abs(points), axis=-1)
    keep = np.argsort(np.where(np.arange(n) == drop[..., None], 2.0, 1.0), axis=-1, kind="stable")
    keep = keep[..., :d]  # ambient axes to project, ascending, excluding `drop`
    basis = np.zeros(points.shape[:-1] + (n, d))
    idx = np.indices(points.shape[:-1])
    for b in range(d):
        basis[(*idx, keep[..., b], b)] = 1.0
    proj = basis - points[..., :, None] * np.einsum("...a,...ab->...b", points, basis)[..., None, :]
    q, _ = np.linalg.qr(proj)
    tau = np.swapaxes(q, -1, -2)  # [..., beta, a]
    full = np.concatenate([q, points[..., :, None]], axis=-1)
    flip = np.linalg.det(full) < 0
    tau[flip, d - 1, :] *= -1.0
    return tau


def _framed_differential(df: np.ndarray, g: MetricField, points: np.ndarray):
    """Express df in the g-orthonormal source frame and the target frames.

    Returns (Fhat, E, L, tau) where Fhat[..., beta, i] are the components of
    df(E_i) along tau_beta.
    """
    E, coframe = orthonormal_frame(g)
    L = coframe.values[..., :, : g.chart.dim_d]
    tau = sphere_tangent_frames(points)
    push = np.einsum("...li,...la->...ia", E, df)  # df(E_i)
    Fhat = np.einsum("...ba,...ia->...bi", tau, push)
    return Fhat, E, L, tau


def signed_so_distance(Fhat: np.ndarray) -> np.ndarray:
    """Frobenius distance to SO(d): sqrt(sum (sigma_i - 1)^2), smallest
    singular value negated when det < 0."""
    sigma = np.linalg.svd(Fhat, compute_uv=False)
    neg = np.linalg.det(Fhat) < 0
    sigma = sigma.copy()
    sigma[neg, ..., -1] *= -1.0
    return np.sqrt(np.sum((sigma - 1.0) ** 2, axis=-1))


def dist_to_SO(df: np.ndarray, g: MetricField, points: np.ndarray) -> np.ndarray:
    """Pointwise distance of df to the orientation-preserving isometries.

    ``points`` are the (unit) image points supplying the target tangent
    spaces.  Returns a scalar field on the chart.
    """
    Fhat, _, _, _ = _framed_differential(df, g, points)
    return signed_so_distance(Fhat)


def _cofactor_matrix(F: np.ndarray) -> np.ndarray:
    """Cofactor matrix C with F adj(F) = det(F) I, C = adj(F)^T = det F^{-T}."""
    d = F.shape[-1]
    if d == 2:
        C = np.empty_like(F)
        C[..., 0, 0] = F[..., 1, 1]
        C[..., 0, 1] = -F[..., 1, 0]
        C[..., 1, 0] = -F[..., 0, 1]
        C[..., 1, 1] = F[..., 0, 0]
        return C
    C = np.empty_like(F)
    rows = np.arange(d)
    for i in range(d):
        for j in range(d):
            minor = F[..., rows != i, :][..., :, rows != j]
            C[..., i, j] = (-1.0) ** (i + j) * np.linalg.det(minor)
    return C


def riemannian_cofactor(df: np.ndarray, g: MetricField, points: np.ndarray) -> np.ndarray:
    """Intrinsic cofactor of df, returned in coordinates (same layout as df).

    Computed as the polynomial adjugate-transpose of the framed
    differential, mapped back through the same frames.
    """
    Fhat, E, L, tau = _framed_differential(df, g, points)
    C = _cofactor_matrix(Fhat)
    return np.einsum("...li,...bi,...ba->...la", L, C, tau)


def oneform_l2_norm(S: np.ndarray, g: MetricField) -> float:
    """L^2(dV_g) norm of an ambient-valued 1-form with the g (x) euc pairing."""
    ginv = np.linalg.inv(g.values)
    dens = np.einsum("...lm,...la,...ma->...", ginv, S, S)
    return float(lp_norm(np.sqrt(np.maximum(dens, 0.0)), 2.0, metric=g, chart=g.chart))


def piola_residual(f: SphereMap, test_dictionary_size: int = 8) -> float:
    """Weak divergence identity mismatch for the cofactor of df.

    Tests, against sine bumps times each ambient axis, the identity
    equating the pairing of the cofactor with test-field gradients to the
    pairing of the traced sphere second form
    (f^*B)(u, v) = f <u, v>  against the test field itself.
    """
    chart = f.chart
    g = f.metric
    df = f.df()
    cof = riemannian_cofactor(df, g, f.values)
    ginv = np.linalg.inv(g.values)
    vol = np.sqrt(np.linalg.det(g.values))
    w = chart.trapezoid_weights() * chart.cell_volume * vol
    # tr_g[(f^*B)(df, cof df)] = f * <df, cof df>_{g (x) euc}
    pairing_density = np.einsum("...lm,...la,...ma->...", ginv, df, cof)
    rhs_field = f.values * pairing_density[..., None]
    nda = chart.dim_d + 1
    worst = 0.0
    for zeta in sine_dictionary(chart, test_dictionary_size):
        dzeta = grad_values(chart, zeta)  # [..., m]
        lhs_density = np.einsum("...lm,...la,...m->...a", ginv, cof, dzeta)
        lhs_vec = (lhs_density * w[..., None]).reshape(-1, nda).sum(axis=0)
        rhs_vec = (rhs_field * (zeta * w)[..., None]).reshape(-1, nda).sum(axis=0)
        # euclidean norm over the ambient test directions keeps the value
        # invariant under rotations of the target
        worst = max(worst, float(np.linalg.norm(lhs_vec - rhs_vec)))
    return worst


def best_sphere_rigid_motion(f: SphereMap, f_ref: SphereMap) -> RigidMotion:
    """Rotation minimizing the volume-weighted L^2 mismatch |Q f_ref - f|.

    Sphere maps carry no translation; the result is a constant special
    orthogonal matrix.
    """
    if f.chart != f_ref.chart:
        raise ShapeMismatchError("sphere maps live on different charts")
    chart = f.chart
    w = chart.trapezoid_weights() * chart.cell_volume * np.sqrt(np.linalg.det(f.metric.values))
    nda = chart.dim_d + 1
    M = np.einsum("xd,xc->dc", (w[..., None] * f_ref.values).reshape(-1, nda), f.values.reshape(-1, nda))
    U, _, Vt = np.linalg.svd(M)
    D = np.ones(M.shape[0])
    D[-1] = np.sign(np.linalg.det((U @ Vt).T))
    Q = (Vt.T * D) @ U.T
    return RigidMotion(Q, np.zeros(M.shape[0]))


def rigidity_report(f: SphereMap, iota_ref: SphereMap) -> RigidityReport:
    """Defect, optimal rigid motion, and rigidity-inequality sides for f.

    The rigid motion is the composition of the optimally aligned rotation
    with the reference isometric immersion; the left-hand side is the
    L^2(dV_g) distance between the differentials.
    """
    g = f.metric
    defect_field = dist_to_SO(f.df(), g, f.values)
    defect = float(lp_norm(defect_field, 2.0, metric=g, chart=f.chart))
    motion = best_sphere_rigid_motion(f, iota_ref)
    dref = np.einsum("ab,...lb->...la", motion.rotation, iota_ref.df())
    lhs = oneform_l2_norm(f.df() - dref, g)
    if defect <= EXACT_ISOMETRY_FLOOR:
        return RigidityReport(defect, motion, lhs, float("nan"), flag="exact isometry")
    return RigidityReport(defect, motion, lhs, lhs / defect)


def rigidity_experiment(family, t_values, iota_ref: SphereMap):
    """Run the rigidity estimate over a family of sphere maps.

    ``family(t)`` must return a SphereMap whose defect vanishes with t.
    Returns the list of RigidityReport, in the order of ``t_values``.
    """
    return [rigidity_report(family(t), iota_ref) for t in t_values]


def lhs_for_rotation(f: SphereMap, iota_ref: SphereMap, Q: np.ndarray) -> float:
    """Rigidity left-hand side for an arbitrary rotation composed with iota_ref."""
    dref = np.einsum("ab,...lb->...la", Q, iota_ref.df())
    return oneform_l2_norm(f.df() - dref, f.metric)


def perturbed_rotation_family(iota_ref: SphereMap, Q0: np.ndarray, bump: np.ndarray, dbump: np.ndarray):
    """Family t -> normalize(Q0 iota + t bump) with exact differentials.

    ``bump`` is an ambient-vector field vanishing on the chart boundary;
    ``dbump`` its analytic differential.  The normalization derivative is
    computed in closed form, so the defect of the t = 0 member is exactly
    zero (no finite-difference floor).
    """
    chart = iota_ref.chart
    base = np.einsum("ab,...b->...a", Q0, iota_ref.values)
    dbase = np.einsum("ab,...lb->...la", Q0, iota_ref.df())

    def make(t: float) -> SphereMap:
        F = base + t * bump
        dF = dbase + t * dbump
        norm = np.linalg.norm(F, axis=-1)
        n = F / norm[..., None]
        radial = np.einsum("...a,...la->...l", n, dF)
        df = (dF - radial[..., :, None] * n[..., None, :]) / norm[..., None, None]
        return SphereMap(chart, iota_ref.metric, n, differential=df, boundary_ref=base)

    return make
