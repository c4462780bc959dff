"""Command-line interface: ``dunkkit <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import geometry as geo
from .assembly import MaterialError, MaterialField, assemble
from .cases import Case, builtin
from .lumped import LumpedCoefficients, SWEEP_COLUMNS, sweep_row
from .mesh import MeshError, mesh_domain, refine_times
from .reproduce import TABLE_IDS, Options, ReproduceError, parallel_map, reproduce, rows_to_csv
from .robin_bounds import BoundsError, RobinField, bounds_run
from .sensitivity import (NotInCatalog, SensitivityError, closed_form_all, mu_payne_weinberger_lb,
                          phi_convergence, phi_lower_bound_F, phi_upper_bound_sigma, solve_sensitivity)
from .spectral import ConvergenceError, first_eigenpair, lambda_approximants, second_neumann_eigenvalue
from .transient import step_heat


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _region_map(text: str) -> dict[int, float]:
    """``0:1000,1:1`` -> {0: 1000.0, 1: 1.0}; a bare number means region 0."""
    out = {}
    try:
        for item in text.split(","):
            if ":" in item:
                k, v = item.split(":", 1)
                out[int(k)] = float(v)
            else:
                out[0] = float(item)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad region map {text!r}") from exc
    return out


@dataclass
class RunConfig:
    subcommand: str
    case: Case
    material: MaterialField
    Bs: list[float]
    T_final: float
    T0: float
    n_steps: int
    levels: int
    h: float | None
    out: str | None
    fmt: str

    def validate(self) -> None:
        if any(not (b >= 0 and math.isfinite(b)) for b in self.Bs):
            raise ConfigError("B values must be finite and nonnegative")
        if not self.T_final > 0:
            raise ConfigError("--tfinal must be positive")
        if not 0 < self.T0 <= 1:
            raise ConfigError("--t0 must lie in (0, 1]")
        if self.n_steps < 2:
            raise ConfigError("--steps must be at least 2")
        if self.levels < 0:
            raise ConfigError("--levels must be nonnegative")
        if self.h is not None and not self.h > 0:
            raise ConfigError("--h must be positive")

    def mesh(self):
        return refine_times(self.case.mesh(self.h), self.levels)


def _case_from_args(a) -> Case:
    if a.builtin and a.geometry:
        raise ConfigError("give either --builtin or --geometry, not both")
    if a.geometry:
        return Case("file", geo.load_domain(a.geometry))
    return builtin(a.builtin or "sart1")


def _config(a) -> RunConfig:
    case = _case_from_args(a)
    mat = case.material
    if a.sigma or a.kappa:
        mat = MaterialField(a.sigma or dict(mat.sigma_by_region), a.kappa or dict(mat.kappa_by_region))
    cfg = RunConfig(a.cmd, case, mat, a.B or [1e-2], a.tfinal, a.t0, 1600 if a.steps is None else a.steps, a.levels, a.h, a.out, a.format)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# output


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table_text(header: Sequence[str], rows: Sequence[Sequence[float]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(header, map(float, r))) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{float(x):.3e}" for x in r])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# subcommands


def cmd_geometry(cfg: RunConfig) -> dict:
    d = cfg.case.domain
    info = {"domain": d.to_json(), "volume": d.volume, "boundary": d.boundary, "gamma": d.gamma,
            "diameter": d.diameter}
    if d.is_polygon:
        body = cfg.case.body()
        info["features"] = geo.features(body)
        m = cfg.mesh()
        info["mesh"] = {"vertices": len(m.vertices), "triangles": len(m.triangles), "dofs": m.n_dofs,
                        "h_max": m.h_max, "area_mismatch": abs(m.area - d.volume) / d.volume}
        if cfg.out:
            m.save(cfg.out)
            info["mesh"]["path"] = cfg.out
    return info


def cmd_phi(cfg: RunConfig) -> dict:
    d = cfg.case.domain
    out: dict = {"case": cfg.case.name}
    if not d.is_polygon:
        out.update(closed_form_all(d))
        out["e_phi"] = 0.0
        return out
    m = cfg.mesh()
    mat = cfg.material.normalize(m)
    best, hist = phi_convergence(m, mat, 3)
    out.update(best.to_json())
    out["phi_levels"] = [r.phi for r in hist]
    body = cfg.case.body()
    smin = min(mat.sigma(m.regions))
    kmax = max(mat.kappa(m.regions))
    out["F_lower_bound"] = phi_lower_bound_F(body, smin, kmax)
    if geo.is_convex(body.vertices):
        out["mu_lower_bound"] = mu_payne_weinberger_lb(body.diameter)
    var = mat.sigma_variance(m)
    out["sigma_variance"] = var
    if var > 0:
        forms = assemble(m, mat)
        mu = second_neumann_eigenvalue(forms)
        try:
            uni = closed_form_all(d)["phi"]
        except NotInCatalog:
            uni = phi_convergence(m, MaterialField({r: 1.0 for r in np.unique(m.regions)},
                                                   {r: 1.0 for r in np.unique(m.regions)}), 3)[0].phi
        out["mu"] = mu
        out["phi_uniform"] = uni
        out["phi_UB"] = phi_upper_bound_sigma(uni, mu, var, forms.gamma)
    return out


def cmd_spectrum(cfg: RunConfig) -> str:
    m = cfg.mesh()
    forms = assemble(m, cfg.material.normalize(m))
    s = solve_sensitivity(forms)
    mu = second_neumann_eigenvalue(forms)

    def one(B):
        lam = first_eigenpair(forms, B).lambda1
        ap = lambda_approximants(B, forms.gamma, s.phi)
        return [B, lam, ap["lambda1_first"], ap["lambda1_second"], ap["lambda1_pade"], mu]

    rows = parallel_map(one, cfg.Bs)
    header = ["B", "lambda1", "lambda1_first", "lambda1_second", "lambda1_pade", "mu"]
    return _table_text(header, rows, cfg.fmt)


def cmd_transient(cfg: RunConfig) -> str:
    if len(cfg.Bs) != 1:
        raise ConfigError("transient takes a single --B value")
    m = cfg.mesh()
    forms = assemble(m, cfg.material.normalize(m))
    q = step_heat(forms, cfg.Bs[0], cfg.T_final, cfg.n_steps)
    header = ["T", "u_avg", "u_boundary_avg", "u_delta"]
    return _table_text(header, list(q.rows()), cfg.fmt)


def cmd_estimate(cfg: RunConfig) -> str:
    m = cfg.mesh()
    forms = assemble(m, cfg.material.normalize(m))
    s = solve_sensitivity(forms)

    def one(B):
        if not B > 0:
            raise ConfigError("estimate needs B > 0")
        q = step_heat(forms, B, cfg.T_final, cfg.n_steps)
        row = sweep_row(q, LumpedCoefficients.from_sensitivity(s, B, cfg.T0))
        return [row[k] for k in SWEEP_COLUMNS]

    rows = parallel_map(one, cfg.Bs)
    return _table_text(SWEEP_COLUMNS, rows, cfg.fmt)


def cmd_bounds(cfg: RunConfig) -> str:
    """Piecewise coefficient: the --B values are dealt to the boundary edges in turn."""
    m = cfg.mesh()
    forms = assemble(m, cfg.material.normalize(m))
    s = solve_sensitivity(forms)
    vals = np.resize(np.asarray(cfg.Bs, dtype=float), len(m.boundary))
    field = RobinField.on_mesh(m, vals)
    b = bounds_run(forms, field, s.phi, cfg.T_final, cfg.n_steps)
    rows = [[x if x is not None else math.nan for x in r] for r in b.rows()]
    return _table_text(b.COLUMNS, rows, cfg.fmt)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dunkkit", description="Small-Biot transient conduction toolkit.")
    sub = p.add_subparsers(dest="cmd", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--builtin", help="named case (e.g. sart1, rect, recthi, gear-1.6-32)")
    common.add_argument("--geometry", help="JSON domain description")
    common.add_argument("--sigma", type=_region_map, help="heat capacity per region, e.g. 0:1000,1:1")
    common.add_argument("--kappa", type=_region_map, help="conductivity per region")
    common.add_argument("--B", type=_float_list, help="comma-separated heat-transfer coefficients")
    common.add_argument("--tfinal", type=float, default=2.0, help="final slow time")
    common.add_argument("--t0", type=float, default=0.2, help="slow-time cut-off for the U_delta error")
    common.add_argument("--steps", type=int, default=None,
                        help="time steps (default 1600; reproduce sweeps default to 12800)")
    common.add_argument("--levels", type=int, default=3, help="uniform refinements of the base mesh")
    common.add_argument("--h", type=float, help="base mesh size")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    for name, text in (("geometry", "domain description, features and mesh"),
                       ("phi", "sensitivity functionals and bounds"),
                       ("spectrum", "first Robin eigenvalue and approximants"),
                       ("transient", "time series of the domain and boundary means"),
                       ("estimate", "lumped-model error sweep"),
                       ("bounds", "envelope for a non-uniform coefficient")):
        sub.add_parser(name, parents=[common], help=text)
    r = sub.add_parser("reproduce", parents=[common], help="regenerate a reference table with pass/fail")
    r.add_argument("table_id", help=", ".join(TABLE_IDS))
    r.add_argument("--strict", action="store_true", help="exit with status 1 when any row fails")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        if a.cmd == "reproduce":
            if a.table_id not in TABLE_IDS:
                raise ConfigError(f"unknown id {a.table_id!r}; choose from {', '.join(TABLE_IDS)}")
            opts = Options(levels=a.levels, T_final=a.tfinal, T0=a.t0)
            if a.steps is not None:
                opts.n_steps = max(a.steps, 2)
            if a.B:
                opts.Bs = tuple(a.B)
            rows = reproduce(a.table_id, opts)
            if (a.format or "csv") == "json":
                text = json.dumps([_json_safe({"table": r.table, "row": r.row, "quantity": r.quantity,
                                               "computed": r.computed,
                                               "expected": r.expected.value if r.expected else None,
                                               "pass": r.passed}) for r in rows], indent=2) + "\n"
            else:
                text = rows_to_csv(rows)
            _emit(text, a.out)
            failed = [r for r in rows if r.passed is False]
            print(f"{a.table_id}: {len(rows) - len(failed)}/{len(rows)} rows pass", file=sys.stderr)
            return 1 if (a.strict and failed) else 0

        cfg = _config(a)
        if a.cmd in ("geometry", "phi"):
            cfg.fmt = cfg.fmt or "json"
            res = cmd_geometry(cfg) if a.cmd == "geometry" else cmd_phi(cfg)
            text = json.dumps(_json_safe(res), indent=2) + "\n"
            _emit(text, None if a.cmd == "geometry" else cfg.out)
            return 0
        cfg.fmt = cfg.fmt or "csv"
        handler = {"spectrum": cmd_spectrum, "transient": cmd_transient, "estimate": cmd_estimate,
                   "bounds": cmd_bounds}[a.cmd]
        _emit(handler(cfg), cfg.out)
        return 0
    except (ConfigError, ReproduceError, geo.GeometryError, MeshError, MaterialError, BoundsError,
            SensitivityError, ConvergenceError, KeyError, OSError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"dunkkit: error: {msg}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
