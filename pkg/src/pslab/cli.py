"""Experiment runner: validate a JSON config, dispatch, write artifacts.

Usage: pslab <experiment> --config <file> [--jobs N] [--out DIR]

Experiments: classify, hull, quasimode, pseudospectrum, spectrum, pseudomode,
exit-time, blowup.  Validation failures exit with status 2 and name the
offending key; compute failures exit with status 1.  Outputs are
deterministic for a fixed config and seed: CSV files are RFC-4180 with '.'
decimals and 17-significant-digit scientific notation, and the manifest
lists every written file with its SHA-256 hash plus the verbatim config.
The output directory may be overridden by --out or the PSLAB_OUT variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, PslabError
from .geometry import (
    Disk,
    Ellipse,
    FieldSpec,
    Interval,
    Polygon,
    classify_boundary,
)
from .hull import (
    hausdorff_distance,
    predicted_support,
    relative_convex_hull,
    relhull_grid_oracle,
)
from .operators import assemble_1d, assemble_2d, conjugated_spectrum_oracle
from .spectral import (
    eigenvalues,
    fit_exponential_rate,
    pseudomode_localization,
    pseudospectrum_scan,
    smallest_singular_value,
)

EXPERIMENTS = ("classify", "hull", "quasimode", "pseudospectrum", "spectrum",
               "pseudomode", "exit-time", "blowup")


def fnum(x) -> str:
    """17-significant-digit scientific notation: stable for byte replay."""
    return format(float(x), ".16e")


# ===================================================================== #
#  config parsing and validation
# ===================================================================== #

def build_domain(block: dict):
    kind = block.get("type")
    try:
        if kind == "interval":
            return Interval(block["a"], block["b"])
        if kind == "disk":
            return Disk(block["center"], block["radius"])
        if kind == "ellipse":
            return Ellipse(block["center"], block["semi_axes"],
                           block.get("angle", 0.0))
        if kind == "polygon":
            return Polygon(block["vertices"])
    except KeyError as e:
        raise ConfigError(f"domain.{e.args[0]}", "missing key") from e
    except PslabError as e:
        raise ConfigError("domain", str(e)) from e
    raise ConfigError("domain.type", f"unknown domain type {kind!r}")


def build_field(block: dict) -> FieldSpec:
    if "X" not in block:
        raise ConfigError("field.X", "missing key")
    f = FieldSpec(np.asarray(block["X"], dtype=float))
    return f


def require(params: dict, key: str, kind=None):
    if key not in params:
        raise ConfigError(f"params.{key}", "missing key")
    val = params[key]
    if kind is not None:
        try:
            if kind is float:
                return float(val)
            if kind is int:
                iv = int(val)
                if iv != val:
                    raise ValueError
                return iv
        except (TypeError, ValueError):
            raise ConfigError(f"params.{key}", f"expected {kind.__name__}")
    return val


def _region_margin(z: complex, field_norm: float) -> float:
    return z.real - z.imag ** 2 / field_norm ** 2


def validate(config: dict):
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
    domain = build_domain(config.get("domain", {}))
    field = build_field(config.get("field", {"X": [1.0]}))
    if field.norm == 0.0 and exp != "hull":
        raise ConfigError("field.X", "field must be nonzero")
    params = config.get("params", {})
    if exp == "classify":
        n = require(params, "n_samples", int)
        if domain.dimension == 2 and n < 8:
            raise ConfigError("params.n_samples", "need at least 8 samples")
    elif exp == "hull":
        require(params, "generators")
        if domain.dimension != 2:
            raise ConfigError("domain", "hulls need a planar domain")
    elif exp in ("quasimode",):
        z = complex(*require(params, "z"))
        h = require(params, "h", float)
        if h <= 0:
            raise ConfigError("params.h", "h must be positive")
        if _region_margin(z, field.norm) <= 0:
            raise ConfigError(
                "params.z",
                "no-quasimode condition violated: quasimodes exist only for "
                "Re z > (Im z)^2/|X|^2; on the boundary parabola there are none")
    elif exp == "pseudospectrum":
        hs = require(params, "h_list")
        if not hs or any(h <= 0 for h in hs):
            raise ConfigError("params.h_list", "need positive h values")
        rect = require(params, "rect")
        if len(rect) != 4 or rect[1] <= rect[0] or rect[3] <= rect[2]:
            raise ConfigError("params.rect", "need [re0, re1, im0, im1]")
        require(params, "resolution")
        dx_rule = params.get("dx_rule", 8.0)
        if dx_rule < 8.0:
            raise ConfigError("params.dx_rule",
                              "scan requires dx <= h/8 (dx_rule >= 8)")
    elif exp == "spectrum":
        require(params, "h", float)
        require(params, "k", int)
    elif exp == "pseudomode":
        z = complex(*require(params, "z"))
        h = require(params, "h", float)
        if _region_margin(z, field.norm) <= 0:
            raise ConfigError("params.z", "z must be strictly inside the region")
    elif exp == "exit-time":
        h = require(params, "h", float)
        dt = require(params, "dt", float)
        if dt > h * h / 4.0:
            raise ConfigError("params.dt",
                              "dt must not exceed h^2/4 to resolve the dynamics")
        require(params, "n_paths", int)
        require(params, "seed", int)
        require(params, "x0")
        lam = require(params, "lambda", float)
        if lam < 0:
            raise ConfigError("params.lambda", "lambda must be nonnegative")
    elif exp == "blowup":
        h = require(params, "h", float)
        mu = require(params, "mu", float)
        if mu <= 0:
            raise ConfigError("params.mu", "mu must be positive")
        p = require(params, "p", float)
        if p not in (2.0, 3.0):
            raise ConfigError("params.p", "supported powers are 2 and 3")
        require(params, "bump")
    return domain, field, params


# ===================================================================== #
#  artifact writing
# ===================================================================== #

class Artifacts:
    def __init__(self, outdir: Path, raw_config: str):
        self.outdir = outdir
        self.raw_config = raw_config
        self.hashes: dict[str, str] = {}
        outdir.mkdir(parents=True, exist_ok=True)

    def write_bytes(self, name: str, data: bytes):
        path = self.outdir / name
        path.write_bytes(data)
        self.hashes[name] = hashlib.sha256(data).hexdigest()

    def write_csv(self, name: str, header: list[str], rows):
        lines = [",".join(header)]
        for row in rows:
            cells = []
            for c in row:
                if isinstance(c, str):
                    cells.append(c)
                elif isinstance(c, (bool, np.bool_)):
                    cells.append("true" if c else "false")
                elif isinstance(c, (int, np.integer)):
                    cells.append(str(int(c)))
                else:
                    cells.append(fnum(c))
            lines.append(",".join(cells))
        self.write_bytes(name, ("\r\n".join(lines) + "\r\n").encode())

    def write_json(self, name: str, obj):
        self.write_bytes(name, (json.dumps(obj, indent=2, sort_keys=True)
                                + "\n").encode())

    def finish(self):
        manifest = {
            "pslab_version": __version__,
            "config_echo": self.raw_config,
            "files": dict(sorted(self.hashes.items())),
        }
        (self.outdir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ===================================================================== #
#  SVG heatmap
# ===================================================================== #

_STOPS = np.array([
    (68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)
], dtype=float)


def _color(v: float) -> str:
    v = min(max(v, 0.0), 1.0)
    x = v * (len(_STOPS) - 1)
    i = min(int(x), len(_STOPS) - 2)
    f = x - i
    rgb = (1 - f) * _STOPS[i] + f * _STOPS[i + 1]
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def emit_svg_heatmap(re_values, im_values, grid, out_path=None,
                     log_scale: bool = True, field_norm: float | None = None,
                     title: str = "") -> str:
    """Cell-per-value SVG with a log color bar and optional parabola overlay."""
    grid = np.asarray(grid, dtype=float)
    re_values = np.asarray(re_values, dtype=float)
    im_values = np.asarray(im_values, dtype=float)
    if grid.ndim != 2 or grid.shape != (len(im_values), len(re_values)):
        raise ConfigError("grid", "ragged or mismatched heatmap grid")
    vals = np.log10(np.maximum(grid, 1e-300)) if log_scale else grid
    vmin, vmax = float(vals.min()), float(vals.max())
    span = vmax - vmin or 1.0
    W, H, margin = 640, 480, 60
    cw = (W - 2 * margin) / len(re_values)
    ch = (H - 2 * margin) / len(im_values)

    def px(a):
        return margin + (a - re_values[0]) / max(re_values[-1] - re_values[0], 1e-300) \
            * (W - 2 * margin)

    def py(b):
        return H - margin - (b - im_values[0]) / max(im_values[-1] - im_values[0], 1e-300) \
            * (H - 2 * margin)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W + 90}" '
             f'height="{H}" viewBox="0 0 {W + 90} {H}">']
    if title:
        parts.append(f'<text x="{W / 2}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    for j, b in enumerate(im_values):
        for i, a in enumerate(re_values):
            c = _color((vals[j, i] - vmin) / span)
            x = margin + i * cw
            y = H - margin - (j + 1) * ch
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.5:.2f}" '
                         f'height="{ch + 0.5:.2f}" fill="{c}"/>')
    if field_norm is not None:
        pts = []
        for b in np.linspace(im_values[0], im_values[-1], 128):
            a = b * b / field_norm ** 2
            if re_values[0] <= a <= re_values[-1]:
                pts.append(f"{px(a):.2f},{py(b):.2f}")
        if pts:
            parts.append('<polyline points="' + " ".join(pts) +
                         '" fill="none" stroke="red" stroke-dasharray="6,4" '
                         'stroke-width="1.6"/>')
    # axes
    parts.append(f'<rect x="{margin}" y="{margin}" width="{W - 2 * margin}" '
                 f'height="{H - 2 * margin}" fill="none" stroke="black"/>')
    for a in np.linspace(re_values[0], re_values[-1], 5):
        parts.append(f'<text x="{px(a):.1f}" y="{H - margin + 18}" '
                     f'text-anchor="middle" font-size="11">{a:.2f}</text>')
    for b in np.linspace(im_values[0], im_values[-1], 5):
        parts.append(f'<text x="{margin - 8}" y="{py(b):.1f}" '
                     f'text-anchor="end" font-size="11">{b:.2f}</text>')
    parts.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" '
                 f'font-size="12">Re z</text>')
    parts.append(f'<text x="16" y="{H / 2}" font-size="12" '
                 f'transform="rotate(-90 16 {H / 2})">Im z</text>')
    # color bar
    nbar = 32
    for k in range(nbar):
        y = H - margin - (k + 1) * (H - 2 * margin) / nbar
        parts.append(f'<rect x="{W + 10}" y="{y:.2f}" width="18" '
                     f'height="{(H - 2 * margin) / nbar + 0.5:.2f}" '
                     f'fill="{_color(k / (nbar - 1))}"/>')
    label = "log10 sigma_min" if log_scale else "sigma_min"
    parts.append(f'<text x="{W + 36}" y="{margin + 10}" font-size="10">'
                 f'{vmax:.2f}</text>')
    parts.append(f'<text x="{W + 36}" y="{H - margin}" font-size="10">'
                 f'{vmin:.2f}</text>')
    parts.append(f'<text x="{W + 44}" y="{H / 2}" font-size="10" '
                 f'transform="rotate(-90 {W + 44} {H / 2})">{label}</text>')
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg


# ===================================================================== #
#  experiment implementations
# ===================================================================== #

def run_classify(domain, field, params, art: Artifacts):
    n = int(params["n_samples"])
    samples = classify_boundary(domain, field, n,
                                tol=params.get("tol", 1e-10))
    rows = []
    for s in samples:
        x = s.point[0]
        y = s.point[1] if len(s.point) > 1 else 0.0
        nx = s.normal[0]
        ny = s.normal[1] if len(s.normal) > 1 else 0.0
        rows.append((s.t, x, y, nx, ny, s.curvature, s.classification))
    art.write_csv("boundary.csv",
                  ["t", "x", "y", "nu_x", "nu_y", "curvature", "class"], rows)


def run_hull(domain, field, params, art: Artifacts):
    res = params.get("resolution")
    gens = params["generators"]
    if gens == "gamma_plus":
        pred = predicted_support(domain, field,
                                 n_samples=params.get("n_samples", 1024),
                                 resolution=res)
        hull = pred.hull
        art.write_csv("tight_arcs.csv", ["t0", "t1"], pred.tight_arcs)
    else:
        hull = relative_convex_hull(domain, gens, resolution=res)
    art.write_json("hull.geojson", hull.to_geojson())
    art.write_csv("hull_arcs.csv", ["t0", "t1"], hull.boundary_arcs())
    spacing = params.get("oracle_spacing")
    if spacing:
        oracle = relhull_grid_oracle(domain, hull.generators, spacing)
        art.write_csv("oracle_points.csv", ["x", "y"], oracle)
        d = hausdorff_distance(oracle, hull.rasterize(spacing))
        art.write_json("oracle_check.json",
                       {"spacing": spacing, "hausdorff": d,
                        "passed": bool(d <= 2 * spacing)})


def run_quasimode(domain, field, params, art: Artifacts):
    from .wkb import build_quasimode, quasimode_residual
    z = complex(*params["z"])
    h = float(params["h"])
    q = build_quasimode(domain, field, params["x0"], z, h,
                        order=params.get("order", 4),
                        n_max=params.get("n_max", 0),
                        a_param=params.get("a_param", 0.5),
                        eps=params.get("eps", 1.0),
                        radii=tuple(params["radii"]) if "radii" in params else None,
                        backend=params.get("backend", "jet"))
    rep = quasimode_residual(q)
    gp = params.get("grid", {})
    nx, ny = gp.get("nx", 160), gp.get("ny", 120)
    x0c = q.frame.x0
    half = 1.2 * q.cutoff.r_outer
    if domain.dimension == 1:
        xs = np.linspace(max(domain.a, x0c[0] - half),
                         min(domain.b, x0c[0] + half), nx)
        vals = q.evaluate(xs[:, None])
        rows = [(x, 0.0, v.real, v.imag) for x, v in zip(xs, vals)]
    else:
        xs = np.linspace(x0c[0] - half, x0c[0] + half, nx)
        ys = np.linspace(x0c[1] - half, x0c[1] + half, ny)
        GX, GY = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([GX.ravel(), GY.ravel()])
        inside = domain.signed_distance(pts) < 0
        vals = np.zeros(len(pts), dtype=complex)
        vals[inside] = q.evaluate(pts[inside])
        rows = [(p[0], p[1], v.real, v.imag) for p, v in zip(pts, vals)]
    art.write_csv("quasimode_grid.csv", ["x", "y", "re_u", "im_u"], rows)
    seed = q.phases[0].seed
    art.write_json("quasimode_manifest.json", {
        "z": [z.real, z.imag], "h": h,
        "lambda": seed.lam, "c": seed.c,
        "alpha": list(seed.alpha), "beta": list(seed.beta),
        "order": params.get("order", 4), "n_max": params.get("n_max", 0),
        "radii": [q.cutoff.r_inner, q.cutoff.r_outer],
        "norm_u": rep.norm_u, "norm_pzu": rep.norm_pzu, "ratio": rep.ratio,
    })


def _scan_chunk(args):
    domain, X, rect, res_grid, h, dx_rule, rows = args
    grids = pseudospectrum_scan(domain, X, rect, res_grid, [h], dx_rule)
    g = grids[0]
    return [(j, g.sigma[j, :], g.at_floor[j, :]) for j in rows]


def run_pseudospectrum(domain, field, params, art: Artifacts, jobs: int = 1):
    rect = tuple(params["rect"])
    n_re, n_im = params["resolution"]
    dx_rule = params.get("dx_rule", 8.0)
    summary = {}
    for h in params["h_list"]:
        grids = pseudospectrum_scan(domain, field.X, rect, (n_re, n_im), [h],
                                    dx_rule)
        g = grids[0]
        rows = [(a, b, s, flag) for a, b, s, flag in g.rows()]
        name = f"pseudospectrum_h{h:g}.csv"
        art.write_csv(name, ["re_z", "im_z", "sigma_min", "in_region"], rows)
        svg = emit_svg_heatmap(g.re_values, g.im_values, g.sigma,
                               field_norm=field.norm,
                               title=f"log10 sigma_min, h = {h:g}")
        art.write_bytes(f"heatmap_h{h:g}.svg", svg.encode())
        summary[str(h)] = {"min_sigma": float(g.sigma.min()),
                           "max_sigma": float(g.sigma.max())}
    art.write_json("scan_summary.json", summary)


def run_spectrum(domain, field, params, art: Artifacts):
    h = float(params["h"])
    k = int(params["k"])
    if domain.dimension == 1:
        n = params.get("n", 2000)
        op = assemble_1d(domain, h, field.X, n)
    else:
        op = assemble_2d(domain, h, field.X, params.get("dx", h / 8))
    res = eigenvalues(op, k, sigma_shift=params.get("shift", 0.0))
    try:
        oracle = conjugated_spectrum_oracle(domain, h, field.X, k)
    except PslabError:
        oracle = [math.nan] * k
    rows = [(v.real, v.imag, o) for v, o in zip(res.values, oracle)]
    art.write_csv("eigenvalues.csv", ["re", "im", "oracle"], rows)
    art.write_json("spectrum_summary.json",
                   {"converged": res.converged, "k": k, "h": h})


def run_pseudomode(domain, field, params, art: Artifacts):
    z = complex(*params["z"])
    h = float(params["h"])
    if domain.dimension == 1:
        n = params.get("n", int(round(8 / h)))
        op = assemble_1d(domain, h, field.X, n)
    else:
        op = assemble_2d(domain, h, field.X, params.get("dx", h / 8))
    support = None
    pred = None
    if domain.dimension == 2:
        pred = predicted_support(domain, field)
        support = pred.tight_points
    sm, prof = pseudomode_localization(op, z, field, support_points=support)
    art.write_csv("radial_profile.csv", ["r0", "r1", "mass"],
                  [(prof.radial_edges[i], prof.radial_edges[i + 1],
                    prof.radial_mass[i]) for i in range(len(prof.radial_mass))])
    art.write_csv("arc_profile.csv", ["t", "mass", "class"],
                  [(prof.arc_centers[i], prof.arc_mass[i], prof.arc_class[i])
                   for i in range(len(prof.arc_mass))])
    art.write_csv("pseudomode.csv",
                  ["x", "y", "mass"],
                  [(p[0], p[1] if len(p) > 1 else 0.0, m)
                   for p, m in zip(prof.node_points, prof.node_mass)])
    art.write_json("pseudomode_summary.json", {
        "sigma_min": sm.value, "at_floor": sm.at_floor,
        "z": [z.real, z.imag], "h": h,
        "mass_by_class": prof.mass_by_class(),
    })


def run_exit_time(domain, field, params, art: Artifacts):
    from .sde import (default_t_max, exit_mgf_bvp_1d, mgf_estimate,
                      simulate_exit_ensemble, survival_probability)
    h = float(params["h"])
    lam = float(params["lambda"])
    b = params.get("b", (-field.X).tolist())
    bvec = np.atleast_1d(np.asarray(b, dtype=float))
    t_max = params.get("t_max", default_t_max(h, lam) if lam > 0 else 100.0)
    ens = simulate_exit_ensemble(domain, bvec, h, params["x0"],
                                 float(params["dt"]), int(params["seed"]),
                                 int(params["n_paths"]), t_max)
    rows = [(t, p[0], p[1] if len(p) > 1 else 0.0, bool(f))
            for t, p, f in zip(ens.tau, ens.exit_points, ens.truncated)]
    art.write_csv("samples.csv", ["tau", "exit_x", "exit_y", "truncated"], rows)
    lam1 = None
    if domain.dimension == 1 and not callable(b):
        lam1 = conjugated_spectrum_oracle(domain, h, -bvec, 1)[0]
    est = mgf_estimate(ens, lam, h, lambda1=lam1)
    payload = {"lambda": lam, "h": h, "mgf": est.estimate,
               "se": est.std_error, "truncated_fraction": est.truncated_fraction,
               "n_paths": est.n_paths, "t_max": est.t_max}
    if domain.dimension == 1 and not callable(b):
        try:
            payload["bvp_value"] = float(
                exit_mgf_bvp_1d(domain, float(bvec[0]), lam, h)(
                    np.atleast_1d(params["x0"])[0]))
        except PslabError:
            payload["bvp_value"] = None
    art.write_json("estimate.json", payload)
    if "survival_s" in params:
        rows = []
        for s in params["survival_s"]:
            sv = survival_probability(ens, float(s), lam)
            rows.append((s, sv.probability, sv.lower, sv.upper))
        art.write_csv("survival.csv", ["s", "prob", "lo", "hi"], rows)


def run_blowup(domain, field, params, art: Artifacts):
    from .evolution import (BumpSpec, bump_initial_data, evolve,
                            subsolution_check)
    h = float(params["h"])
    mu = float(params["mu"])
    p = float(params["p"])
    bp = params["bump"]
    spec = BumpSpec(center=bp["center"], inner_radius=bp["a"],
                    delta=bp["delta"], cap_constant=bp.get("cap_constant"),
                    amplitude=bp.get("amplitude"))
    n = params.get("n", 2000)
    op = assemble_1d(domain, h, field.X, n)
    rep = bump_initial_data(spec, op.points, h, domain=domain, X=field.X)
    snaps = params.get("snapshot_times",
                       list(np.round(np.arange(0.05, spec.delta, 0.05), 10)))
    res = evolve(op, mu, p, (1.0 + params.get("margin", 0.02)) * rep.values,
                 float(params.get("dt", 2e-4)),
                 float(params.get("t_end", 1.0)), snapshot_times=snaps)
    lam = eigenvalues(op, 5, sigma_shift=mu + 0.05).values
    spectral_bound = float(np.max(-(lam.real - mu)))
    rows = []
    for t in sorted(res.snapshots):
        u = res.snapshots[t]
        for x, v in zip(op.points[:, 0], u):
            rows.append((t, x, v))
    art.write_csv("trajectory.csv", ["t", "x", "u"], rows)
    report = {
        "blew_up": res.blew_up, "t_blowup": res.t_blowup,
        "threshold": res.threshold, "spectral_bound": spectral_bound,
        "parameters": {"h": h, "mu": mu, "p": p, "bump": bp},
        "bump_peak": rep.peak, "bump_cap": rep.cap,
    }
    alpha = params.get("alpha")
    if alpha is not None:
        comp = subsolution_check(res, spec, float(alpha), field.X, op.points)
        report["subsolution"] = {
            "ok": comp.ok, "through_t": max(comp.checked_times, default=0.0),
            "worst_margin": comp.worst_margin,
        }
    art.write_json("blowup_report.json", report)


# ===================================================================== #
#  entry point
# ===================================================================== #

def run(config_path: str, out_dir: str | None = None, jobs: int = 1) -> int:
    path = Path(config_path)
    if not path.exists():
        print(f"config not found: {config_path}", file=sys.stderr)
        return 2
    raw = path.read_text()
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as e:
        print(f"config does not parse: {e}", file=sys.stderr)
        return 2
    try:
        domain, field, params = validate(config)
    except ConfigError as e:
        print(f"validation failed: {e}", file=sys.stderr)
        return 2
    out = Path(os.environ.get("PSLAB_OUT") or out_dir
               or config.get("output_dir", "pslab_out"))
    art = Artifacts(out, raw)
    exp = config["experiment"]
    try:
        if exp == "classify":
            run_classify(domain, field, params, art)
        elif exp == "hull":
            run_hull(domain, field, params, art)
        elif exp == "quasimode":
            run_quasimode(domain, field, params, art)
        elif exp == "pseudospectrum":
            run_pseudospectrum(domain, field, params, art, jobs=jobs)
        elif exp == "spectrum":
            run_spectrum(domain, field, params, art)
        elif exp == "pseudomode":
            run_pseudomode(domain, field, params, art)
        elif exp == "exit-time":
            run_exit_time(domain, field, params, art)
        elif exp == "blowup":
            run_blowup(domain, field, params, art)
    except PslabError as e:
        print(f"compute failed: {e}", file=sys.stderr)
        return 1
    art.finish()
    print(f"wrote {len(art.hashes) + 1} files to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pslab",
        description="desk-scale experiments on boundary-driven pseudospectra")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    # the experiment name on the command line must match the config
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"config unreadable: {e}", file=sys.stderr)
        return 2
    if cfg.get("experiment") != args.experiment:
        print(f"config experiment {cfg.get('experiment')!r} does not match "
              f"command {args.experiment!r}", file=sys.stderr)
        return 2
    return run(args.config, out_dir=args.out, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
