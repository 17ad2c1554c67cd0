"""Membrane sequences: pullback geometry, error decomposition, weak limits.

A membrane sequence is a family of codimension-one immersed graphs over a
fixed chart, reparameterized by uniformly bi-Lipschitz maps, whose pullback
metrics approach a base metric.  The diagnostics here measure (i) how fast
the pullback metric converges, (ii) the eight-term decomposition of the
curvature mismatch in a dual-norm surrogate, and (iii) weak convergence of
the pullback second forms through dictionary pairings, with a Richardson
extrapolation supplying the limit object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import Chart
from .errors import FieldError, ShapeMismatchError
from .fields import (
    ImmersionField,
    MetricField,
    SecondFormField,
    grad_values,
    l2_pairing,
    lp_norm,
    negative_norm_estimate,
    sine_dictionary,
    sobolev_norm,
)
from .curvature import (
    christoffel,
    compatibility_threshold,
    gauss_residual,
)
from .immersion import induced_metric, second_form


@dataclass(frozen=True)
class MembraneSequence:
    """Decreasing family of immersed membranes over one chart.

    ``immersions[i]`` is the composed immersion at ``eps_values[i]`` (the
    reparameterization is already applied); ``jacobians[i]`` the pointwise
    Jacobian of the reparameterization, whose determinant range records the
    bi-Lipschitz bound.
    """

    chart: Chart
    eps_values: tuple
    immersions: tuple
    jacobians: tuple
    base_metric: MetricField
    name: str = "membranes"
    richardson_order: float = 2.0
    metric_decay_rate: float = 1.0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        if len(eps) < 1 or any(e <= 0 for e in eps):
            raise FieldError("eps values must be positive")
        if list(eps) != sorted(eps, reverse=True):
            raise FieldError("eps values must be strictly decreasing")
        if len(self.immersions) != len(eps) or len(self.jacobians) != len(eps):
            raise ShapeMismatchError("one immersion and one Jacobian per eps")
        for f in self.immersions:
            if f.chart != self.chart:
                raise ShapeMismatchError("immersion chart mismatch")
        if self.base_metric.chart != self.chart:
            raise ShapeMismatchError("base metric chart mismatch")
        dets = [np.linalg.det(J) for J in self.jacobians]
        lo = min(float(d.min()) for d in dets)
        hi = max(float(d.max()) for d in dets)
        if lo <= 0:
            raise FieldError("reparameterization Jacobians must be orientation-preserving")
        object.__setattr__(self, "eps_values", eps)
        object.__setattr__(self, "_bilip_bound", max(hi, 1.0 / lo))

    @property
    def bilip_bound(self) -> float:
        return self._bilip_bound

    def index_of(self, eps: float) -> int:
        for i, e in enumerate(self.eps_values):
            if abs(e - eps) <= 1e-12 * max(1.0, abs(eps)):
                return i
        raise KeyError(f"eps = {eps} not in sequence {self.eps_values}")


def pullback_metric(seq: MembraneSequence, eps: float) -> MetricField:
    """Induced metric of the composed immersion at eps."""
    return induced_metric(seq.immersions[seq.index_of(eps)])


def pullback_second_form(seq: MembraneSequence, eps: float) -> SecondFormField:
    """Second fundamental form of the composed immersion at eps (codim 1)."""
    B, _ = second_form(seq.immersions[seq.index_of(eps)])
    return B


def metric_gap_norm(seq: MembraneSequence, eps: float, p_conj: float) -> float:
    """W^{1,p'} size of (pullback metric - base metric)."""
    gap = pullback_metric(seq, eps).values - seq.base_metric.values
    return sobolev_norm(gap, 1, p_conj, chart=seq.chart)


def _covariant(chart: Chart, gamma: np.ndarray, X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """(nabla_X V)^m = X^l (d_l V^m + Gamma^m_{ln} V^n)."""
    dV = grad_values(chart, V)  # [..., l, m]
    return np.einsum("...l,...lm->...m", X, dV) + np.einsum(
        "...l,...mln,...n->...m", X, gamma, V
    )


def _lie_bracket(chart: Chart, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    dX = grad_values(chart, X)
    dY = grad_values(chart, Y)
    return np.einsum("...l,...lm->...m", X, dY) - np.einsum("...l,...lm->...m", Y, dX)


def _as_vector_field(chart: Chart, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape == (chart.dim_d,):
        return np.broadcast_to(X, chart.shape + (chart.dim_d,)).copy()
    if X.shape != chart.shape + (chart.dim_d,):
        raise ShapeMismatchError("vector fields must have shape grid + (d,)")
    return X


@dataclass(frozen=True)
class ErrorDecomposition:
    """Dual-norm sizes of the eight curvature-mismatch terms and their sum."""

    terms: tuple
    total: float

    def as_dict(self) -> dict:
        out = {f"J{i+1}": v for i, v in enumerate(self.terms)}
        out["sum"] = self.total
        return out


def error_decomposition(
    seq: MembraneSequence,
    eps: float,
    X,
    Y,
    Z,
    W,
    r: float = 2.0,
    dictionary_size: int = 8,
) -> ErrorDecomposition:
    """Eight-term split of the pullback-curvature mismatch on four fields.

    Every term carries either a (pullback metric - base metric) factor or a
    connection-difference factor, so all eight vanish identically when the
    pullback metric equals the base metric.  Each term is measured in the
    sine-dictionary dual-norm surrogate; the ninth value is the surrogate
    norm of their pointwise sum.
    """
    chart = seq.chart
    X, Y, Z, W = (_as_vector_field(chart, V) for V in (X, Y, Z, W))
    g0 = seq.base_metric
    ghat = pullback_metric(seq, eps)
    gamma0 = christoffel(g0).values
    gammah = christoffel(ghat).values
    dgamma = gammah - gamma0
    gap = ghat.values - g0.values

    def pair(H, U, V):
        return np.einsum("...mn,...m,...n->...", H, U, V)

    def diffconn(U, V):
        return np.einsum("...l,...mln,...n->...m", U, dgamma, V)

    nYZ_h = _covariant(chart, gammah, Y, Z)
    nXZ_h = _covariant(chart, gammah, X, Z)
    nYZ_0 = _covariant(chart, gamma0, Y, Z)
    nXZ_0 = _covariant(chart, gamma0, X, Z)
    XY = _lie_bracket(chart, X, Y)

    J1 = pair(gap, _covariant(chart, gammah, X, nYZ_h), W)
    J2 = pair(g0.values, diffconn(X, nYZ_0), W)
    J3 = pair(g0.values, _covariant(chart, gamma0, X, diffconn(Y, Z)), W)
    J4 = -pair(gap, _covariant(chart, gammah, Y, nXZ_h), W)
    J5 = -pair(g0.values, diffconn(Y, nXZ_0), W)
    J6 = -pair(g0.values, _covariant(chart, gamma0, Y, diffconn(X, Z)), W)
    J7 = -pair(gap, _covariant(chart, gammah, XY, Z), W)
    J8 = -pair(g0.values, diffconn(XY, Z), W)

    terms = (J1, J2, J3, J4, J5, J6, J7, J8)
    norms = tuple(
        negative_norm_estimate(J, r, dictionary_size, chart=chart) for J in terms
    )
    total = negative_norm_estimate(sum(terms), r, dictionary_size, chart=chart)
    return ErrorDecomposition(terms=norms, total=total)


@dataclass(frozen=True)
class WeakLimitReport:
    """Dictionary-pairing convergence diagnostics for the second forms."""

    eps_values: tuple
    pairings: np.ndarray          # (n_eps, n_dict, d, d)
    deltas: tuple                 # successive max-abs pairing gaps
    delta_ratios: tuple           # deltas[i] / deltas[i+1]
    extrapolated: np.ndarray      # (n_dict, d, d) Richardson limit pairings
    limit_pairings: np.ndarray    # pairings of the limit-immersion second form
    consistency_gap: float
    limit_gauss_residual: float
    gauss_threshold: float
    strong_norms: tuple           # ||B_eps - B_limit||_{L^p} per eps
    limit_immersion: ImmersionField
    pairing_scale: float

    def cauchy_ok(self, min_ratio: float = 1.5) -> bool:
        return all(r >= min_ratio for r in self.delta_ratios)


def weak_limit_check(
    seq: MembraneSequence, test_dictionary_size: int = 8, p: float = 4.0
) -> WeakLimitReport:
    """Weak-versus-strong convergence diagnostics for the second forms.

    Pairings of the pullback second forms against the sine dictionary are
    checked for a Cauchy pattern across eps; the last two members are
    Richardson-extrapolated (to the order declared by the sequence) both at
    the pairing level and at the immersion level.  The extrapolated
    immersion supplies the limit second form, whose pairings must agree
    with the extrapolated pairings, and whose Gauss residual against the
    base metric must fall below the compatibility threshold.
    """
    if len(seq.eps_values) < 3:
        raise FieldError("need at least 3 eps values to assess convergence")
    chart = seq.chart
    dictionary = sine_dictionary(chart, test_dictionary_size)
    d = chart.dim_d

    forms = [pullback_second_form(seq, e).values[..., 0, :, :] for e in seq.eps_values]
    pairings = np.stack(
        [
            np.stack([l2_pairing(chart, Bv, z).reshape(d, d) for z in dictionary])
            for Bv in forms
        ]
    )
    gaps = np.abs(np.diff(pairings, axis=0)).max(axis=(1, 2, 3))
    deltas = tuple(float(x) for x in gaps)
    ratios = tuple(
        float(gaps[i] / gaps[i + 1]) for i in range(len(gaps) - 1) if gaps[i + 1] > 0
    )

    q = seq.richardson_order
    ratio = seq.eps_values[-1] / seq.eps_values[-2]
    wgt = ratio**q
    extrapolated = (pairings[-1] - wgt * pairings[-2]) / (1.0 - wgt)

    f_prev = seq.immersions[-2].values
    f_last = seq.immersions[-1].values
    limit_vals = (f_last - wgt * f_prev) / (1.0 - wgt)
    limit_immersion = ImmersionField(chart, limit_vals)
    B_lim_field, _ = second_form(limit_immersion)
    B_lim = B_lim_field.values[..., 0, :, :]
    limit_pairings = np.stack(
        [l2_pairing(chart, B_lim, z).reshape(d, d) for z in dictionary]
    )
    consistency_gap = float(np.abs(extrapolated - limit_pairings).max())

    limit_gauss = gauss_residual(seq.base_metric, B_lim_field, p=2.0)
    threshold = compatibility_threshold(seq.base_metric, B_lim_field)

    strong = tuple(
        float(lp_norm(Bv - B_lim, p, chart=chart)) for Bv in forms
    )
    scale = float(np.abs(pairings[0]).max())
    return WeakLimitReport(
        eps_values=seq.eps_values,
        pairings=pairings,
        deltas=deltas,
        delta_ratios=ratios,
        extrapolated=extrapolated,
        limit_pairings=limit_pairings,
        consistency_gap=consistency_gap,
        limit_gauss_residual=limit_gauss,
        gauss_threshold=threshold,
        strong_norms=strong,
        limit_immersion=limit_immersion,
        pairing_scale=scale,
    )


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    mask = (xs > 0) & (ys > 0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[mask]), np.log(ys[mask]), 1)[0])
