"""Moving-frame machinery: coframe, connection form, Pfaff and Poincare systems.

The frame field A stores the adapted orthonormal frame row-wise: rows
1..d are the pushed-forward tangent frame vectors, rows d+1..d+k the
normal vectors.  With that storage,

* the connection form has components  W_j[a, b] = <d_j e_a, e_b>,
  i.e. tangential block <nab_j E_i, E_m>, mixed block +B(E_i, d_j) on the
  (tangent, normal) slots, and the normal-connection block;
* the Pfaff system reads  d_j A = W_j A,
* the Poincare system reads  d_j f = w_j A  with w the augmented coframe.

Orientation/sign convention (tested in tests/test_cartan.py): the
reconstructed frame's normal rows are exactly the normals with respect to
which the input second form is measured.  Harvesting (g, B, nablaE) from
an immersion with the positively-oriented normal convention of
``fundforms.immersion`` and integrating therefore reproduces the immersion
up to a proper rigid motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chart import Chart
from .errors import ShapeMismatchError
from .fields import (
    ImmersionField,
    MetricField,
    NormalConnectionField,
    SecondFormField,
    TensorField,
    grad_values,
    lp_norm,
)
from .curvature import christoffel

FRAME_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CoframeField:
    """Augmented coframe: d x (d+k) per point, last k columns zero.

    The first d columns form the lower-triangular Cholesky factor L of g
    (row i = the coefficients of dx^i in the orthonormal coframe).
    """

    chart: Chart
    values: np.ndarray

    def __post_init__(self):
        d, dk = self.chart.dim_d, self.chart.ambient_dim
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.shape != self.chart.shape + (d, dk):
            raise ShapeMismatchError("coframe values must have shape grid + (d, d+k)")
        if np.any(arr[..., :, d:] != 0.0):
            raise ShapeMismatchError("augmented coframe columns d+1..d+k must vanish")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class ConnectionForm:
    """so(d+k)-valued 1-form: d antisymmetric (d+k, d+k) matrices per point."""

    chart: Chart
    values: np.ndarray

    def __post_init__(self):
        d, dk = self.chart.dim_d, self.chart.ambient_dim
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != self.chart.shape + (d, dk, dk):
            raise ShapeMismatchError("connection values must have shape grid + (d, d+k, d+k)")
        arr = 0.5 * (arr - np.swapaxes(arr, -1, -2))
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class FrameField:
    """(d+k) x (d+k) orthogonal matrix per point, det +1."""

    chart: Chart
    values: np.ndarray

    def __post_init__(self):
        dk = self.chart.ambient_dim
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.shape != self.chart.shape + (dk, dk):
            raise ShapeMismatchError("frame values must have shape grid + (d+k, d+k)")
        gram = np.einsum("...ab,...cb->...ac", arr, arr)
        err = np.max(np.abs(gram - np.eye(dk)))
        if err > FRAME_ORTHO_TOL:
            raise ShapeMismatchError(f"frame not orthogonal: max |A A^T - I| = {err:.3e}")
        if np.any(np.linalg.det(arr) < 0):
            raise ShapeMismatchError("frame must be special orthogonal (det +1)")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def cholesky_frame(g: MetricField) -> np.ndarray:
    """Lower Cholesky factor L (positive diagonal) with L L^T = g, per point."""
    return np.linalg.cholesky(g.values)


def orthonormal_frame(g: MetricField):
    """Orthonormal tangent frame and augmented coframe of a metric.

    Returns (E, CoframeField): E[..., :, i] is the i-th frame vector in
    coordinates (E^T g E = I, det E > 0), and the coframe rows are the rows
    of L = chol(g) padded with k zero columns.
    """
    chart = g.chart
    d, k = chart.dim_d, chart.codim_k
    L = cholesky_frame(g)
    E = np.linalg.inv(L)
    E = np.swapaxes(E, -1, -2)  # E = L^{-T}
    w = np.concatenate([L, np.zeros(chart.shape + (d, k))], axis=-1)
    return E, CoframeField(chart, w)


def connection_form(
    g: MetricField, B: SecondFormField, nablaE: NormalConnectionField
) -> ConnectionForm:
    """Assemble the so(d+k)-valued connection 1-form from (g, B, nablaE).

    Tangential block from the Levi-Civita connection conjugated into the
    orthonormal frame, off-diagonal block from B in the orthonormal frame,
    normal block from nablaE.  Exact antisymmetry is enforced by projection
    (the finite-difference tangential block is antisymmetric only to O(h^2)).
    """
    chart = g.chart
    if B.chart != chart or nablaE.chart != chart:
        raise ShapeMismatchError("fields live on different charts")
    d, k = chart.dim_d, chart.codim_k
    E, coframe = orthonormal_frame(g)
    L = coframe.values[..., :, :d]
    gamma = christoffel(g).values
    dE = grad_values(chart, E)  # [..., j, l, i] = d_j E^l_i
    # <nab_j E_i, E_m> = (d_j E^l_i) L_lm + E^l_i Gamma^q_jl L_qm
    tang = np.einsum("...jli,...lm->...jim", dE, L) + np.einsum(
        "...li,...qjl,...qm->...jim", E, gamma, L
    )
    tang = 0.5 * (tang - np.swapaxes(tang, -1, -2))
    # B with the first slot rotated into the orthonormal frame
    b_frame = np.einsum("...li,...alj->...jia", E, B.values)  # [..., j, i, alpha]
    W = np.zeros(chart.shape + (d, d + k, d + k))
    W[..., :, :d, :d] = tang
    W[..., :, :d, d:] = b_frame
    W[..., :, d:, :d] = -np.swapaxes(b_frame, -1, -2)
    W[..., :, d:, d:] = nablaE.values
    return ConnectionForm(chart, W)


def expm_so(batch: np.ndarray) -> np.ndarray:
    """Exponential of antisymmetric matrices: exact rotations.

    Closed forms for 2x2 and 3x3 (Rodrigues); scaling-and-squaring Pade for
    larger sizes.
    """
    n = batch.shape[-1]
    if n == 2:
        theta = batch[..., 1, 0]
        c, s = np.cos(theta), np.sin(theta)
        out = np.empty_like(batch)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        return out
    if n == 3:
        v = np.stack([batch[..., 2, 1], batch[..., 0, 2], batch[..., 1, 0]], axis=-1)
        theta = np.linalg.norm(v, axis=-1)
        theta2 = theta**2
        small = theta < 1e-8
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(small, 1.0 - theta2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
            b = np.where(
                small, 0.5 - theta2 / 24.0, (1.0 - np.cos(theta)) / np.where(small, 1.0, theta2)
            )
        K2 = batch @ batch
        return np.eye(3) + a[..., None, None] * batch + b[..., None, None] * K2
    flat = batch.reshape((-1, n, n))
    out = np.stack([scipy.linalg.expm(m) for m in flat], axis=0)
    return out.reshape(batch.shape)


def polar_project(batch: np.ndarray) -> np.ndarray:
    """Nearest special-orthogonal matrix (polar factor with det correction)."""
    U, _, Vt = np.linalg.svd(batch)
    Q = U @ Vt
    det = np.linalg.det(Q)
    flip = det < 0
    if np.any(flip):
        U = U.copy()
        U[flip, ..., -1] *= -1.0
        Q = U @ Vt
    return Q


def _check_base_point(chart: Chart, x0) -> tuple:
    x0 = chart.corner_index() if x0 is None else tuple(int(i) for i in x0)
    if len(x0) != chart.dim_d or any(not 0 <= i < n for i, n in zip(x0, chart.resolution)):
        raise ShapeMismatchError(f"base point {x0} is off the grid {chart.resolution}")
    return x0


def _sweep_axes(chart: Chart, x0, step, axis_order=None):
    """Visit the grid along the first sweep axis from x0, then along the
    second from each reached point, and so on; ``step(src, dst, axis,
    sign)`` receives index tuples whose not-yet-swept axes are pinned at x0
    (slices elsewhere) and must propagate the state from src to dst.

    The default order is (0, 1, ..., d-1); permuting it changes the path
    tree, and the difference between the resulting integrals is the
    measured path-independence certificate.
    """
    d = chart.dim_d
    axis_order = tuple(range(d)) if axis_order is None else tuple(axis_order)
    if sorted(axis_order) != list(range(d)):
        raise ShapeMismatchError(f"axis_order must permute 0..{d - 1}")
    for pos, axis in enumerate(axis_order):
        n = chart.resolution[axis]
        swept = set(axis_order[:pos])
        idx = [slice(None) if a in swept else x0[a] for a in range(d)]
        j0 = x0[axis]

        def at(j):
            out = list(idx)
            out[axis] = j
            return tuple(out)

        for j in range(j0, n - 1):
            step(at(j), at(j + 1), axis, +1.0)
        for j in range(j0, 0, -1):
            step(at(j), at(j - 1), axis, -1.0)


def integrate_pfaff(W: ConnectionForm, A0=None, x0=None, axis_order=None) -> FrameField:
    """Solve the frame system dA = W A by sweeping edge rotations from x0.

    Each edge step multiplies by the exact rotation exp(sign * h * W_mid)
    with W averaged over the edge endpoints (midpoint rule, O(h^2)); the
    frame is polar-projected back onto SO(d+k) after every step.
    """
    chart = W.chart
    dk = chart.ambient_dim
    x0 = _check_base_point(chart, x0)
    if A0 is None:
        A0 = np.eye(dk)
    A0 = np.asarray(A0, dtype=np.float64)
    if A0.shape != (dk, dk):
        raise ShapeMismatchError(f"A0 must be {(dk, dk)}")
    if np.max(np.abs(A0.T @ A0 - np.eye(dk))) > FRAME_ORTHO_TOL or np.linalg.det(A0) < 0:
        raise ShapeMismatchError("A0 must be special orthogonal")

    A = np.zeros(chart.shape + (dk, dk))
    A[x0] = A0
    Wv = W.values
    spacing = chart.spacing

    def step(src, dst, axis, sign):
        Wmid = 0.5 * (Wv[src + (axis,)] + Wv[dst + (axis,)])
        rot = expm_so(sign * spacing[axis] * Wmid)
        A[dst] = polar_project(rot @ A[src])

    _sweep_axes(chart, x0, step, axis_order=axis_order)
    return FrameField(chart, A)


def integrate_poincare(w: CoframeField, A: FrameField, f0=None, x0=None, axis_order=None) -> ImmersionField:
    """Solve df = w A along the same sweep as the Pfaff system.

    Edge steps use the trapezoidal average of the integrand at the edge
    endpoints (midpoint accuracy O(h^2)).
    """
    chart = w.chart
    if A.chart != chart:
        raise ShapeMismatchError("coframe and frame live on different charts")
    dk = chart.ambient_dim
    x0 = _check_base_point(chart, x0)
    if f0 is None:
        f0 = np.zeros(dk)
    f0 = np.asarray(f0, dtype=np.float64)
    if f0.shape != (dk,):
        raise ShapeMismatchError(f"f0 must be a vector of length {dk}")

    f = np.zeros(chart.shape + (dk,))
    f[x0] = f0
    wv = w.values
    Av = A.values
    spacing = chart.spacing

    def integrand(idx, axis):
        return np.einsum("...a,...ab->...b", wv[idx + (axis,)], Av[idx])

    def step(src, dst, axis, sign):
        inc = 0.5 * (integrand(src, axis) + integrand(dst, axis))
        f[dst] = f[src] + sign * spacing[axis] * inc

    _sweep_axes(chart, x0, step, axis_order=axis_order)
    return ImmersionField(chart, f)


def holonomy_defect(W: ConnectionForm) -> float:
    """Max over grid plaquettes of ||A_loop - I||_F.

    A_loop multiplies the four edge rotations around each elementary grid
    plaquette (in each coordinate plane); it deviates from the identity by
    the plaquette-integrated curvature of the connection, so compatible
    data gives O(h^3) per plaquette while incompatible data leaves an O(h^2)
    area term.
    """
    chart = W.chart
    d = chart.dim_d
    dk = chart.ambient_dim
    Wv = W.values
    spacing = chart.spacing
    worst = 0.0
    grid = np.arange(chart.dim_d)
    for a in range(d):
        for b in range(a + 1, d):
            Wa, Wb = Wv[..., a, :, :], Wv[..., b, :, :]
            ha, hb = spacing[a], spacing[b]
            sl_lo = [slice(None)] * d
            sl_hi = [slice(None)] * d
            sl_lo[a] = slice(0, -1)
            sl_hi[a] = slice(1, None)
            mid_a = 0.5 * (Wa[tuple(sl_lo)] + Wa[tuple(sl_hi)])  # edges along a
            sl_lo2 = [slice(None)] * d
            sl_hi2 = [slice(None)] * d
            sl_lo2[b] = slice(0, -1)
            sl_hi2[b] = slice(1, None)
            mid_b = 0.5 * (Wb[tuple(sl_lo2)] + Wb[tuple(sl_hi2)])  # edges along b
            # plaquette with lower corner (i, j): bottom, right, top, left
            cut_b0 = [slice(None)] * d
            cut_b0[b] = slice(0, -1)
            cut_b1 = [slice(None)] * d
            cut_b1[b] = slice(1, None)
            bottom = mid_a[tuple(cut_b0)]
            top = mid_a[tuple(cut_b1)]
            cut_a0 = [slice(None)] * d
            cut_a0[a] = slice(0, -1)
            cut_a1 = [slice(None)] * d
            cut_a1[a] = slice(1, None)
            left = mid_b[tuple(cut_a0)]
            right = mid_b[tuple(cut_a1)]
            E1 = expm_so(ha * bottom)
            E2 = expm_so(hb * right)
            E3 = expm_so(-ha * top)
            E4 = expm_so(-hb * left)
            loop = E4 @ E3 @ E2 @ E1
            defect = np.sqrt(np.sum((loop - np.eye(dk)) ** 2, axis=(-2, -1)))
            worst = max(worst, float(defect.max()))
    return worst


def first_structural_residual(w: CoframeField, W: ConnectionForm, p=2.0) -> float:
    """Norm of dw - w ^ W over coordinate planes.

    Components: d_i w_j - d_j w_i - (w_i W_j - w_j W_i) for i < j, where
    w_i is the i-th coframe row and W_i the i-th connection matrix.
    """
    chart = w.chart
    if W.chart != chart:
        raise ShapeMismatchError("coframe and connection live on different charts")
    d = chart.dim_d
    dw = grad_values(chart, w.values)  # [..., i, j, a] = d_i w_j
    wedge = np.einsum("...ia,...jab->...ijb", w.values, W.values)
    resid = dw - np.swapaxes(dw, -3, -2) - (wedge - np.swapaxes(wedge, -3, -2))
    rows = [resid[..., i, j, :] for i in range(d) for j in range(i + 1, d)]
    return lp_norm(np.stack(rows, axis=-2), p, chart=chart)


def reconstruct(
    g: MetricField,
    B: SecondFormField,
    nablaE: NormalConnectionField,
    A0=None,
    f0=None,
    x0=None,
):
    """Full pipeline (g, B, nablaE) -> (immersion, frame, diagnostics)."""
    W = connection_form(g, B, nablaE)
    E, w = orthonormal_frame(g)
    A = integrate_pfaff(W, A0=A0, x0=x0)
    f = integrate_poincare(w, A, f0=f0, x0=x0)
    from .immersion import isometry_defect

    diagnostics = {
        "holonomy_defect": holonomy_defect(W),
        "structural_residual": first_structural_residual(w, W),
        "isometry_defect": isometry_defect(f, g),
    }
    return f, A, diagnostics
