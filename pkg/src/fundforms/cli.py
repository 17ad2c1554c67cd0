"""Command-line front end and experiment drivers.

Subcommands: reconstruct, forms, check-gcr, align, rigidity, depend,
converge.  Every run writes a manifest (hashed inputs, parameters,
versions, seed) next to its outputs; outputs carry full-precision decimal
floats so reruns with identical manifests are bitwise identical.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FieldError
from . import asymptotics as asym
from . import cartan, curvature, fileio, geometries, immersion, rigidity
from .fields import ImmersionField, lp_norm, sobolev_norm

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


@dataclass
class RunConfig:
    subcommand: str
    inputs: list
    output_dir: Path
    p: float = 4.0
    tol: float = None
    dict_size: int = 8
    force: bool = False
    seed: int = 0
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def params(self) -> dict:
        return {
            "p": self.p,
            "tol": self.tol,
            "dict_size": self.dict_size,
            "force": self.force,
            "seed": self.seed,
            **self.extra,
        }


def _parse_config_file(path: Path) -> dict:
    """Flat key-value text: one `key = <json>` per line, # comments."""
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FieldError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        try:
            out[key.strip()] = json.loads(raw.strip())
        except json.JSONDecodeError as exc:
            raise FieldError(f"{path}:{lineno}: bad JSON value: {exc}") from exc
    return out


def _thread_count() -> int:
    raw = os.environ.get("FF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_cases(fn, cases, threads):
    if threads <= 1 or len(cases) <= 1:
        return [fn(c) for c in cases]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, cases))


def _json_dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _haar_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, -1] *= -1.0
    return Q


# ---------------------------------------------------------------------------
# drivers


def run_check_gcr(cfg: RunConfig) -> int:
    if len(cfg.inputs) != 3:
        print("check-gcr needs -i g.json -i B.json -i nablaE.json", file=sys.stderr)
        return EXIT_VALIDATION
    g = fileio.load_field(cfg.inputs[0], "metric")
    B = fileio.load_field(cfg.inputs[1], "second_form")
    nabE = fileio.load_field(cfg.inputs[2], "normal_connection")
    report = curvature.residual_report(g, B, nabE, p=cfg.p)
    out = dict(report.as_dict())
    out["compatibility_threshold"] = curvature.compatibility_threshold(g, B)
    _json_dump(cfg.output_dir / "residual_report.json", out)
    fileio.write_manifest(cfg.output_dir, "check-gcr", cfg.params(), cfg.inputs, cfg.seed)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def run_forms(cfg: RunConfig) -> int:
    if len(cfg.inputs) != 1:
        print("forms needs -i immersion.json", file=sys.stderr)
        return EXIT_VALIDATION
    f = fileio.load_field(cfg.inputs[0], "immersion")
    g = immersion.induced_metric(f)
    B, nabE = immersion.second_form(f)
    fileio.save_field(cfg.output_dir / "g.json", g)
    fileio.save_field(cfg.output_dir / "B.json", B)
    fileio.save_field(cfg.output_dir / "nablaE.json", nabE)
    diag = {
        "min_metric_det": float(np.linalg.det(g.values).min()),
        "max_metric_det": float(np.linalg.det(g.values).max()),
    }
    _json_dump(cfg.output_dir / "forms_diagnostics.json", diag)
    fileio.write_manifest(cfg.output_dir, "forms", cfg.params(), cfg.inputs, cfg.seed)
    return EXIT_OK


def run_align(cfg: RunConfig) -> int:
    if len(cfg.inputs) != 2:
        print("align needs -i f.json -i f_ref.json", file=sys.stderr)
        return EXIT_VALIDATION
    f = fileio.load_field(cfg.inputs[0], "immersion")
    f_ref = fileio.load_field(cfg.inputs[1], "immersion")
    motion = immersion.best_rigid_motion(f, f_ref)
    resid = float(np.sqrt(np.mean(np.sum((motion.apply(f.values) - f_ref.values) ** 2, axis=-1))))
    out = {
        "rotation": motion.rotation.tolist(),
        "translation": motion.translation.tolist(),
        "rms_residual": resid,
        "quotient_distance_w1": immersion.quotient_distance(f, f_ref, 1, cfg.p),
        "quotient_distance_w2": immersion.quotient_distance(f, f_ref, 2, cfg.p),
    }
    _json_dump(cfg.output_dir / "motion.json", out)
    fileio.write_manifest(cfg.output_dir, "align", cfg.params(), cfg.inputs, cfg.seed)
    print(json.dumps({k: out[k] for k in ("rms_residual", "quotient_distance_w2")}, indent=2))
    return EXIT_OK


def run_reconstruct(cfg: RunConfig) -> int:
    if len(cfg.inputs) not in (3, 4):
        print("reconstruct needs -i g.json -i B.json -i nablaE.json [-i init.json]", file=sys.stderr)
        return EXIT_VALIDATION
    g = fileio.load_field(cfg.inputs[0], "metric")
    if cfg.p <= g.chart.dim_d:
        print(f"p = {cfg.p} must exceed the chart dimension d = {g.chart.dim_d}", file=sys.stderr)
        return EXIT_VALIDATION
    B = fileio.load_field(cfg.inputs[1], "second_form")
    nabE = fileio.load_field(cfg.inputs[2], "normal_connection")
    A0 = f0 = x0 = None
    if len(cfg.inputs) == 4:
        init = json.loads(Path(cfg.inputs[3]).read_text())
        A0 = np.asarray(init["A0"], dtype=float) if "A0" in init else None
        f0 = np.asarray(init["f0"], dtype=float) if "f0" in init else None
        x0 = tuple(init["x0"]) if "x0" in init else None

    report = curvature.residual_report(g, B, nabE, p=cfg.p)
    threshold = cfg.tol if cfg.tol is not None else curvature.compatibility_threshold(g, B)
    f, A, diag = cartan.reconstruct(g, B, nabE, A0=A0, f0=f0, x0=x0)
    compatible = (
        max(report.gauss, report.codazzi, report.ricci) <= threshold
        and diag["holonomy_defect"] <= threshold
    )
    fileio.save_field(cfg.output_dir / "f.json", f)
    fileio.save_field(cfg.output_dir / "A.json", cartan.FrameField(A.chart, A.values))
    diagnostics = {
        **diag,
        "residuals": report.as_dict(),
        "compatibility_threshold": threshold,
        "compatible": bool(compatible),
    }
    _json_dump(cfg.output_dir / "reconstruct_diagnostics.json", diagnostics)
    fileio.write_manifest(cfg.output_dir, "reconstruct", cfg.params(), cfg.inputs, cfg.seed)
    print(json.dumps({k: diagnostics[k] for k in ("holonomy_defect", "isometry_defect", "compatible")}, indent=2))
    if not compatible and not cfg.force:
        print("input data fails the compatibility check (use --force to keep going)", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _rigidity_family(cfg: RunConfig, spec: dict):
    resolution = spec.get("resolution", 49)
    extent = tuple(tuple(ab) for ab in spec.get("extent", geometries.DEFAULT_CAP_EXTENT))
    chart = geometries.grid_chart(resolution, extent)
    g = geometries.round_metric(chart)
    iota, d_iota, _ = geometries.sphere_chart_frames(chart)
    ref = rigidity.SphereMap(chart, g, iota, differential=d_iota)
    rng = np.random.default_rng(cfg.seed)
    if "base_rotation" in spec:
        Q0 = np.asarray(spec["base_rotation"], dtype=float)
    else:
        Q0 = _haar_rotation(rng, chart.dim_d + 1)
    X, Y = chart.meshgrid()
    (a1, b1), (a2, b2) = chart.extent
    u = np.pi * (X - a1) / (b1 - a1)
    v = np.pi * (Y - a2) / (b2 - a2)
    modes = spec.get("bump_modes", [[1, 1], [2, 1]])
    vecs = spec.get("bump_vectors", [[0.3, -0.5, 0.8], [0.6, 0.2, -0.4]])
    bump = np.zeros(chart.shape + (3,))
    dbump = np.zeros(chart.shape + (2, 3))
    for (mx, my), vec in zip(modes, vecs):
        vec = np.asarray(vec, dtype=float)
        s = np.sin(mx * u) * np.sin(my * v)
        dsx = mx * np.pi / (b1 - a1) * np.cos(mx * u) * np.sin(my * v)
        dsy = my * np.pi / (b2 - a2) * np.sin(mx * u) * np.cos(my * v)
        bump += s[..., None] * vec
        dbump += np.stack([dsx, dsy], axis=-1)[..., :, None] * vec
    return ref, rigidity.perturbed_rotation_family(ref, Q0, bump, dbump), rng


def run_rigidity(cfg: RunConfig) -> int:
    if len(cfg.inputs) != 1:
        print("rigidity needs -i family_spec.json", file=sys.stderr)
        return EXIT_VALIDATION
    spec = json.loads(Path(cfg.inputs[0]).read_text())
    t_values = [float(t) for t in spec.get("t_values", [2.0**-k for k in range(3, 9)])]
    ref, family, rng = _rigidity_family(cfg, spec)

    def one(t):
        return rigidity.rigidity_report(family(t), ref)

    reports = _map_cases(one, t_values, cfg.threads)
    rows = [(t, r.defect, r.lhs, r.ratio) for t, r in zip(t_values, reports)]
    fileio.write_csv(cfg.output_dir / "rigidity.csv", ["t", "defect", "lhs", "ratio"], rows)
    n_random = int(spec.get("random_rotations", 20))
    for t, rep in zip(t_values, reports):
        f_t = family(t)
        worse = sum(
            rep.lhs <= rigidity.lhs_for_rotation(f_t, ref, _haar_rotation(rng, 3))
            for _ in range(n_random)
        )
        _json_dump(
            cfg.output_dir / f"report_t{t:.6f}.json",
            {
                "t": t,
                "defect": rep.defect,
                "lhs": rep.lhs,
                "ratio": rep.ratio,
                "flag": rep.flag,
                "rotation": rep.best_motion.rotation.tolist(),
                "beats_random_rotations": f"{worse}/{n_random}",
            },
        )
    defects = [r.defect for r in reports]
    lhss = [r.lhs for r in reports]
    summary = {
        "defect_slope": asym.fit_loglog_slope(t_values, defects),
        "lhs_slope": asym.fit_loglog_slope(t_values, lhss),
        "ratio_spread": float(max(r.ratio for r in reports) / min(r.ratio for r in reports)),
    }
    _json_dump(cfg.output_dir / "rigidity_summary.json", summary)
    fileio.write_manifest(cfg.output_dir, "rigidity", cfg.params(), cfg.inputs, cfg.seed)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def run_depend(cfg: RunConfig) -> int:
    spec = {}
    if cfg.inputs:
        spec = json.loads(Path(cfg.inputs[0]).read_text())
    family = spec.get("family", "sphere_radius")
    if family != "sphere_radius":
        print(f"unknown depend family '{family}'", file=sys.stderr)
        return EXIT_VALIDATION
    s_values = [float(s) for s in spec.get("s_values", [2.0**-k for k in range(2, 8)])]
    resolution = spec.get("resolution", 33)
    p = cfg.p
    if p <= 2:
        print("depend requires p > d = 2", file=sys.stderr)
        return EXIT_VALIDATION

    g0, B0, nabE0, _ = geometries.sphere_family_forms(0.0, resolution)
    W0 = cartan.connection_form(g0, B0, nabE0)
    _, w0 = cartan.orthonormal_frame(g0)
    A0f = cartan.integrate_pfaff(W0)
    f0 = cartan.integrate_poincare(w0, A0f)

    def one(s):
        g, B, nabE, _ = geometries.sphere_family_forms(s, resolution)
        W = cartan.connection_form(g, B, nabE)
        _, w = cartan.orthonormal_frame(g)
        A = cartan.integrate_pfaff(W)
        f = cartan.integrate_poincare(w, A)
        t_dist = sobolev_norm(g.values - g0.values, 1, p, chart=g.chart) + lp_norm(
            B.values - B0.values, p, chart=g.chart
        )
        v_dist = immersion.quotient_distance(f, f0, 2, p)
        pfaff_num = sobolev_norm(A.values - A0f.values, 1, p, chart=g.chart)
        pfaff_den = lp_norm(W.values - W0.values, p, chart=g.chart)
        cof_num = sobolev_norm(w.values - w0.values, 1, p, chart=g.chart)
        cof_den = sobolev_norm(g.values - g0.values, 1, p, chart=g.chart)
        return (
            s,
            t_dist,
            v_dist,
            v_dist / t_dist,
            pfaff_num / pfaff_den,
            cof_num / cof_den,
        )

    rows = _map_cases(one, s_values, cfg.threads)
    fileio.write_csv(
        cfg.output_dir / "depend.csv",
        ["s", "T_dist", "V_dist", "ratio", "pfaff_ratio", "coframe_ratio"],
        rows,
    )
    ratios = [r[3] for r in rows]
    pf = [r[4] for r in rows]
    summary = {
        "ratio_spread": max(ratios) / min(ratios),
        "pfaff_ratio_spread": max(pf) / min(pf),
        "V_vs_T_slope": asym.fit_loglog_slope([r[1] for r in rows], [r[2] for r in rows]),
    }
    _json_dump(cfg.output_dir / "depend_summary.json", summary)
    fileio.write_manifest(cfg.output_dir, "depend", cfg.params(), cfg.inputs, cfg.seed)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def converge_vector_fields(chart):
    """Fixed smooth coordinate vector fields for the curvature-mismatch terms."""
    X_, Y_ = chart.meshgrid()
    (a1, b1), (a2, b2) = chart.extent
    u = (X_ - a1) / (b1 - a1)
    v = (Y_ - a2) / (b2 - a2)
    XF = np.stack([1 + 0.3 * np.sin(2 * np.pi * v), 0.2 + 0 * u], axis=-1)
    YF = np.stack([0.1 + 0 * u, 1 + 0.25 * np.cos(2 * np.pi * u)], axis=-1)
    ZF = np.stack([0.7 + 0.2 * u * v, 0.4 - 0.3 * v], axis=-1)
    WF = np.stack([0.5 - 0.2 * v, 0.8 + 0.1 * np.sin(np.pi * u)], axis=-1)
    return XF, YF, ZF, WF


def run_converge(cfg: RunConfig) -> int:
    spec = {}
    if cfg.inputs:
        spec = json.loads(Path(cfg.inputs[0]).read_text())
    generator = spec.get("generator", "wrinkles")
    shear = float(spec.get("shear", 0.3 if generator == "sheared_wrinkles" else 0.0))
    if generator not in ("wrinkles", "sheared_wrinkles"):
        print(f"unknown converge generator '{generator}'", file=sys.stderr)
        return EXIT_VALIDATION
    eps_values = [float(e) for e in spec.get("eps_values", [2.0**-k for k in range(2, 7)])]
    resolution = spec.get("resolution", list(geometries.WRINKLE_RESOLUTION))
    p = cfg.p
    p_conj = p / (p - 1.0)
    seq = geometries.wrinkle_family(eps_values, resolution=tuple(resolution), shear=shear)
    fields4 = converge_vector_fields(seq.chart)

    def one(eps):
        gap = asym.metric_gap_norm(seq, eps, p_conj)
        b_norm = lp_norm(pullback_B(eps).values, p, chart=seq.chart)
        dec = asym.error_decomposition(seq, eps, *fields4, r=2.0, dictionary_size=cfg.dict_size)
        return gap, b_norm, dec

    def pullback_B(eps):
        return asym.pullback_second_form(seq, eps)

    results = _map_cases(one, list(seq.eps_values), cfg.threads)
    wl = asym.weak_limit_check(seq, test_dictionary_size=cfg.dict_size, p=p)
    rows = []
    for i, (eps, (gap, b_norm, dec)) in enumerate(zip(seq.eps_values, results)):
        delta = wl.deltas[i - 1] if i > 0 else float("nan")
        rows.append((eps, gap, b_norm, dec.total, delta, *dec.terms))
    fileio.write_csv(
        cfg.output_dir / "converge.csv",
        ["eps", "metric_gap_W1pc", "B_Lp", "J_sum", "pairing_delta"]
        + [f"J{i}" for i in range(1, 9)],
        rows,
    )
    gaps = [r[1] for r in rows]
    jsums = [r[3] for r in rows]
    summary = {
        "metric_gap_slope": asym.fit_loglog_slope(seq.eps_values, gaps),
        "expected_metric_rate": seq.metric_decay_rate,
        "J_sum_slope": asym.fit_loglog_slope(seq.eps_values, jsums),
        "J_slopes": [
            asym.fit_loglog_slope(seq.eps_values, [r[5 + i] for r in rows]) for i in range(8)
        ],
        "pairing_delta_ratios": list(wl.delta_ratios),
        "pairing_consistency_gap": wl.consistency_gap,
        "limit_gauss_residual": wl.limit_gauss_residual,
        "gauss_threshold": wl.gauss_threshold,
        "strong_norm_floor": wl.strong_norms[-1] / wl.strong_norms[0],
    }
    _json_dump(cfg.output_dir / "converge_summary.json", summary)
    fileio.write_manifest(cfg.output_dir, "converge", cfg.params(), cfg.inputs, cfg.seed)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


_DRIVERS = {
    "check-gcr": run_check_gcr,
    "forms": run_forms,
    "align": run_align,
    "reconstruct": run_reconstruct,
    "rigidity": run_rigidity,
    "depend": run_depend,
    "converge": run_converge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundforms",
        description="Immersion reconstruction and rigidity experiments on gridded charts",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _DRIVERS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", "-i", action="append", default=[], dest="inputs")
        sp.add_argument("--output-dir", type=Path, default=Path("out"))
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--dict-size", type=int, default=None)
        sp.add_argument("--force", action="store_true", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--config", type=Path, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = _parse_config_file(args.config) if args.config else {}

        def pick(flag, key, default):
            if flag is not None:
                return flag
            return file_cfg.get(key, default)

        cfg = RunConfig(
            subcommand=args.subcommand,
            inputs=[Path(p) for p in args.inputs],
            output_dir=args.output_dir,
            p=float(pick(args.p, "p", 4.0)),
            tol=pick(args.tol, "tol", None),
            dict_size=int(pick(args.dict_size, "dict_size", 8)),
            force=bool(pick(args.force, "force", False)),
            seed=int(pick(args.seed, "seed", 0)),
            threads=_thread_count(),
            extra={k: v for k, v in file_cfg.items() if k not in {"p", "tol", "dict_size", "force", "seed"}},
        )
        for p in cfg.inputs:
            if not p.exists():
                print(f"input not found: {p}", file=sys.stderr)
                return EXIT_VALIDATION
        return _DRIVERS[cfg.subcommand](cfg)
    except FieldError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
