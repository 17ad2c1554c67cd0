"""Forward geometry of an immersion and rigid alignment of immersions.

Given a grid immersion f this module harvests its induced metric, a
positively-oriented orthonormal normal frame, the second fundamental form
and the normal connection.  Rigid alignment (Kabsch / orthogonal
Procrustes) realizes the quotient by orientation-preserving ambient
isometries; quotient distances are Sobolev norms after optimal alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import Chart
from .errors import DegenerateImmersionError, ShapeMismatchError
from .fields import (
    DEFAULT_SPD_TOL,
    ImmersionField,
    MetricField,
    NormalConnectionField,
    SecondFormField,
    TensorField,
    grad_values,
    lp_norm,
    sobolev_norm,
)

ORTHONORMAL_TOL = 1e-9
ROTATION_TOL = 1e-12


@dataclass(frozen=True)
class RigidMotion:
    """Orientation-preserving ambient isometry x -> rotation @ x + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        n = Q.shape[0]
        if Q.shape != (n, n) or t.shape != (n,):
            raise ShapeMismatchError("rotation must be square, translation a matching vector")
        if np.max(np.abs(Q.T @ Q - np.eye(n))) > ROTATION_TOL or np.linalg.det(Q) < 0:
            raise ValueError("rotation must be special orthogonal within 1e-12")
        object.__setattr__(self, "rotation", Q)
        object.__setattr__(self, "translation", t)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return values @ self.rotation.T + self.translation


def _differential(f: ImmersionField) -> np.ndarray:
    """df[..., l, a] = d_l f^a."""
    return grad_values(f.chart, f.values)


def induced_metric(f: ImmersionField, spd_tol=DEFAULT_SPD_TOL) -> MetricField:
    """First fundamental form g = df^T df; raises at degenerate points."""
    df = _differential(f)
    g = np.einsum("...ia,...ja->...ij", df, df)
    det = np.linalg.det(g)
    if np.any(det <= spd_tol):
        bad = np.argwhere(det <= spd_tol)
        raise DegenerateImmersionError(
            f"differential is degenerate at {len(bad)} grid points", points=map(tuple, bad)
        )
    return MetricField(f.chart, g, spd_tol=spd_tol)


def normal_field(f: ImmersionField) -> np.ndarray:
    """Positively-oriented orthonormal basis of the normal space.

    Returns an array nu[..., alpha, a] of k ambient vectors per point with
    (coordinate tangents, nu_1..nu_k) positively oriented; the orientation
    is fixed by flipping the last normal where needed.
    """
    chart = f.chart
    d, k = chart.dim_d, chart.codim_k
    df = _differential(f)  # [..., l, a]
    dfT = np.swapaxes(df, -1, -2)  # [..., a, l]  columns = tangents
    q, r = np.linalg.qr(dfT, mode="complete")
    rank_ok = np.min(np.abs(np.diagonal(r[..., :d, :], axis1=-2, axis2=-1)), axis=-1)
    if np.any(rank_ok < 1e-12):
        bad = np.argwhere(rank_ok < 1e-12)
        raise DegenerateImmersionError(
            f"differential is rank deficient at {len(bad)} grid points",
            points=map(tuple, bad),
        )
    normals = np.swapaxes(q[..., :, d:], -1, -2).copy()  # [..., alpha, a]
    basis = np.concatenate([dfT, np.swapaxes(normals, -1, -2)], axis=-1)
    flip = np.linalg.det(basis) < 0
    normals[flip, k - 1, :] *= -1.0
    return normals


def second_form(f: ImmersionField):
    """Second fundamental form and normal connection of an immersion.

    B^alpha_ij = <d_i d_j f, nu_alpha> (symmetrized; the stencils commute,
    so the reported asymmetry is at rounding level) and
    nablaE[..., i, alpha, beta] = <d_i nu_alpha, nu_beta>.
    Returns (SecondFormField, NormalConnectionField).
    """
    chart = f.chart
    nu = normal_field(f)
    hess = grad_values(chart, _differential(f))  # [..., i, j, a]
    B = np.einsum("...ija,...pa->...pij", hess, nu)
    dnu = grad_values(chart, nu)  # [..., i, alpha, a]
    nabE = np.einsum("...ipa,...qa->...ipq", dnu, nu)
    return SecondFormField(chart, B), NormalConnectionField(chart, nabE)


def kabsch(points: np.ndarray, ref: np.ndarray, weights=None):
    """Weighted orthogonal Procrustes with translation (Kabsch).

    Returns the RigidMotion minimizing sum_x w(x) |Q p(x) + t - ref(x)|^2.
    Ties in the SVD are broken by the fixed LAPACK factorization order.
    """
    P = points.reshape(-1, points.shape[-1])
    R = ref.reshape(-1, ref.shape[-1])
    if weights is None:
        w = np.full(P.shape[0], 1.0 / P.shape[0])
    else:
        w = weights.reshape(-1)
        w = w / w.sum()
    mu_p = w @ P
    mu_r = w @ R
    H = (R - mu_r).T @ ((P - mu_p) * w[:, None])
    U, _, Vt = np.linalg.svd(H)
    D = np.ones(H.shape[0])
    D[-1] = np.sign(np.linalg.det(U @ Vt))
    Q = (U * D) @ Vt
    return RigidMotion(Q, mu_r - Q @ mu_p)


def best_rigid_motion(f: ImmersionField, f_ref: ImmersionField) -> RigidMotion:
    """Least-squares rigid motion carrying f onto f_ref (uniform grid weights)."""
    if f.chart != f_ref.chart:
        raise ShapeMismatchError("immersions live on different charts")
    return kabsch(f.values, f_ref.values)


def quotient_distance(f: ImmersionField, f_ref: ImmersionField, k: int, p) -> float:
    """Sobolev distance between immersions after optimal rigid alignment.

    The alignment minimizes the L^2 position mismatch (closed form); for
    nearby immersions this differs from the W^{k,p}-optimal alignment only
    at second order.
    """
    motion = best_rigid_motion(f, f_ref)
    diff = motion.apply(f.values) - f_ref.values
    return sobolev_norm(diff, k, p, chart=f.chart)


def isometry_defect(f: ImmersionField, g: MetricField) -> float:
    """Max-norm mismatch between the induced metric of f and a target g."""
    df = _differential(f)
    gf = np.einsum("...ia,...ja->...ij", df, df)
    return float(np.max(np.abs(gf - g.values)))
