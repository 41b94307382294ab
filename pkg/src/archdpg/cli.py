"""Command-line front end: solve, converge, stability, compare-fem, oracle.

Configurations are JSON files validated strictly (unknown keys are rejected
with the offending key named).  All CSV output uses '.' decimals, scientific
notation with 16 significant digits, a header row and trailing newline, and
is byte-stable across repeated runs.  Unless --no-plot is given, each report
also renders a matplotlib figure next to its CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import plots
from .assembly import DiscretizationConfig, EnrichmentError
from .core import TWO_PI, ArchConfig, ArchParameters, BcPair, Mesh, stability_constants
from .fem import FemSolveError, fem_l2_errors, fem_solve
from .loads import COMPONENTS, Expr, LoadSpec, PointLoad, TrigTerm
from .oracle import solve_reference
from .solver import SolveError, convergence_study, l2_errors, solve

EXIT_CONFIG = 2
EXIT_SOLVER = 3


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.15e}"


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    return path


def _require_keys(d: dict, allowed, path: str):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'" if path else f"unknown key '{key}'")


def _number(d: dict, key: str, path: str, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"missing key '{path}.{key}'")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{path}.{key}' must be a number")
    return float(v)


def _parse_expr(d, path: str) -> Expr:
    if not isinstance(d, dict):
        raise ConfigError(f"'{path}' must be an object with 'poly' and/or 'trig'")
    _require_keys(d, {"poly", "trig"}, path)
    poly = d.get("poly", [])
    if not isinstance(poly, list) or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in poly):
        raise ConfigError(f"'{path}.poly' must be a list of numbers")
    trig = []
    for i, t in enumerate(d.get("trig", [])):
        tp = f"{path}.trig[{i}]"
        if not isinstance(t, dict):
            raise ConfigError(f"'{tp}' must be an object")
        _require_keys(t, {"kind", "amplitude", "frequency", "phase"}, tp)
        kind = t.get("kind", "cos")
        if kind not in ("cos", "sin"):
            raise ConfigError(f"'{tp}.kind' must be 'cos' or 'sin'")
        try:
            trig.append(TrigTerm(_number(t, "amplitude", tp, required=True),
                                 _number(t, "frequency", tp, required=True),
                                 _number(t, "phase", tp, default=0.0), kind))
        except ValueError as exc:
            raise ConfigError(f"'{tp}': {exc}") from exc
    return Expr(poly=tuple(float(c) for c in poly), trig=tuple(trig))


def _parse_load(d, path: str) -> LoadSpec:
    _require_keys(d, {"distributed_u", "distributed_w", "point_loads"}, path)
    f_u = _parse_expr(d["distributed_u"], f"{path}.distributed_u") if "distributed_u" in d else Expr.zero()
    f_w = _parse_expr(d["distributed_w"], f"{path}.distributed_w") if "distributed_w" in d else Expr.zero()
    points = []
    for i, p in enumerate(d.get("point_loads", [])):
        pp = f"{path}.point_loads[{i}]"
        if not isinstance(p, dict):
            raise ConfigError(f"'{pp}' must be an object")
        _require_keys(p, {"endpoint", "component", "magnitude"}, pp)
        endpoint = p.get("endpoint")
        if endpoint not in (0, 1):
            raise ConfigError(f"'{pp}.endpoint' must be 0 or 1")
        try:
            points.append(PointLoad(endpoint, p.get("component", "w"),
                                    _number(p, "magnitude", pp, required=True)))
        except ValueError as exc:
            raise ConfigError(f"'{pp}': {exc}") from exc
    return LoadSpec(distributed_u=f_u, distributed_w=f_w, point_loads=tuple(points))


@dataclass
class RunConfig:
    """Validated CLI problem description."""

    arch: ArchConfig
    disc: DiscretizationConfig
    mesh_n: int | None
    mesh_nodes: np.ndarray | None
    out_dir: str | None
    plot: bool

    def mesh(self) -> Mesh:
        if self.mesh_nodes is not None:
            return Mesh(self.mesh_nodes)
        return Mesh.uniform(self.mesh_n if self.mesh_n is not None else 8)


def parse_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _require_keys(raw, {"parameters", "bc", "load", "discretization", "mesh", "output"}, "")

    pd = raw.get("parameters")
    if not isinstance(pd, dict):
        raise ConfigError("missing or invalid 'parameters' section")
    _require_keys(pd, {"epsilon", "mu", "lambda"}, "parameters")
    try:
        params = ArchParameters(
            _number(pd, "epsilon", "parameters", required=True),
            _number(pd, "mu", "parameters", default=0.0),
            _number(pd, "lambda", "parameters", required=True),
        )
    except ValueError as exc:
        raise ConfigError(f"parameters: {exc}") from exc

    bc_code = raw.get("bc")
    if not isinstance(bc_code, str):
        raise ConfigError("missing or invalid 'bc' code")
    try:
        bc = BcPair.from_code(bc_code)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    load = _parse_load(raw.get("load", {}), "load") if isinstance(raw.get("load", {}), dict) \
        else _bad("load")

    dd = raw.get("discretization", {})
    if not isinstance(dd, dict):
        raise ConfigError("'discretization' must be an object")
    _require_keys(dd, {"p", "delta_p", "test_norm", "tau_num", "third_term"}, "discretization")
    test_norm = dd.get("test_norm", "standard")
    if test_norm not in ("standard", "scaled_graph"):
        raise ConfigError("'discretization.test_norm' must be 'standard' or 'scaled_graph'")
    try:
        disc = DiscretizationConfig(
            p=int(_number(dd, "p", "discretization", default=1)),
            delta_p=(int(dd["delta_p"]) if "delta_p" in dd else None),
            test_norm=test_norm,
            tau_num=_number(dd, "tau_num", "discretization", default=1e-5),
            third_term=dd.get("third_term", "adjoint"),
        )
    except ValueError as exc:
        raise ConfigError(f"discretization: {exc}") from exc

    md = raw.get("mesh", {})
    if not isinstance(md, dict):
        raise ConfigError("'mesh' must be an object")
    _require_keys(md, {"n", "nodes"}, "mesh")
    if "n" in md and "nodes" in md:
        raise ConfigError("'mesh' takes either 'n' or 'nodes', not both")
    mesh_n = mesh_nodes = None
    if "nodes" in md:
        try:
            mesh_nodes = np.asarray(md["nodes"], dtype=float)
            Mesh(mesh_nodes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mesh.nodes: {exc}") from exc
    else:
        mesh_n = int(_number(md, "n", "mesh", default=8))
        if mesh_n < 1:
            raise ConfigError("'mesh.n' must be at least 1")

    od = raw.get("output", {})
    if not isinstance(od, dict):
        raise ConfigError("'output' must be an object")
    _require_keys(od, {"dir", "plot"}, "output")
    plot = od.get("plot", True)
    if not isinstance(plot, bool):
        raise ConfigError("'output.plot' must be a boolean")

    return RunConfig(arch=ArchConfig(params, bc, load), disc=disc,
                     mesh_n=mesh_n, mesh_nodes=mesh_nodes,
                     out_dir=od.get("dir"), plot=plot)


def _bad(section):
    raise ConfigError(f"'{section}' must be an object")


def _out_dir(args, run: RunConfig | None = None) -> str:
    out = args.out or (run.out_dir if run is not None else None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _want_plot(args, run: RunConfig | None = None) -> bool:
    if args.no_plot:
        return False
    return run.plot if run is not None else True


def _parse_n_list(text: str):
    try:
        values = [int(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise ConfigError(f"invalid N list {text!r}") from exc
    if not values or any(v < 1 for v in values) or any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("N list must be strictly increasing positive integers")
    return values


def _stability_rows(params: ArchParameters, bc: BcPair):
    report = stability_constants(params, bc)
    return report


def cmd_solve(args) -> int:
    run = parse_config(args.config)
    out = _out_dir(args, run)
    mesh = run.mesh()
    sol = solve(run.arch, mesh, run.disc, point_load_mode=args.point_load_mode,
                threads=args.threads)

    samples = args.samples_per_element
    xi = np.linspace(-1.0, 1.0, samples)
    xs, values = [], []
    for j in range(mesh.n_elements):
        a, b = mesh.element(j)
        xs.append(a + 0.5 * (b - a) * (xi + 1.0))
        # per-element evaluation keeps both one-sided values at shared nodes
        values.append(np.polynomial.legendre.legval(xi, sol.fields.coeffs[j].T))
    x_all = np.concatenate(xs)
    v_all = np.concatenate(values, axis=1)
    fields_csv = write_csv(os.path.join(out, "fields.csv"),
                           ["x", "u", "w", "theta", "n", "q", "m"],
                           [(x_all[i], *v_all[:, i]) for i in range(x_all.size)])
    traces_csv = write_csv(os.path.join(out, "traces.csv"),
                           ["x", "u_hat", "w_hat", "theta_hat", "n_hat", "q_hat", "m_hat"],
                           [(mesh.nodes[i], *sol.traces[:, i]) for i in range(mesh.nodes.size)])

    report = stability_constants(run.arch.params, run.arch.bc)
    n_nodes = mesh.n_elements + 1
    summary = {
        "bc": run.arch.bc.code,
        "parameters": {"epsilon": run.arch.params.epsilon, "mu": run.arch.params.mu,
                       "lambda": run.arch.params.lam},
        "discretization": {"p": run.disc.p, "delta_p": run.disc.delta_p,
                           "test_norm": run.disc.test_norm, "tau_num": run.disc.tau_num,
                           "third_term": run.disc.third_term},
        "n_elements": mesh.n_elements,
        "dofs": {"trace_total": 6 * n_nodes, "trace_free": 6 * n_nodes - 6,
                 "field": 6 * (run.disc.p + 1) * mesh.n_elements},
        "indicator": sol.indicator,
        "stability": {"c_n": report.c_n, "c_q": report.c_q, "c_q0": report.c_q0,
                      "c_stab": None if math.isnan(report.c_stab) else report.c_stab,
                      "regime": report.regime_label},
    }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {fields_csv}, {traces_csv}, summary.json")
    print(f"indicator = {sol.indicator:.6e}; "
          f"C_stab({run.arch.bc.code}) = {report.c_stab:.6g} [{report.regime_label}]")
    if _want_plot(args, run):
        plots.save_solution_figure(x_all, v_all, os.path.join(out, "fields.png"),
                                   title=f"bc={run.arch.bc.code}, N={mesh.n_elements}, p={run.disc.p}")
        print(f"wrote {os.path.join(out, 'fields.png')}")
    return 0


def cmd_converge(args) -> int:
    run = parse_config(args.config)
    n_list = _parse_n_list(args.n_list)
    out = _out_dir(args, run)
    report = convergence_study(run.arch, run.disc, n_list, threads=args.threads)
    rows = []
    for i, n in enumerate(report.n_values):
        rows.append((n, report.h_max[i], *report.errors[i], report.indicators[i],
                     *report.rates[i]))
    header = (["N", "h_max"] + [f"err_{c}" for c in COMPONENTS] + ["indicator"]
              + [f"rate_{c}" for c in COMPONENTS])
    path = write_csv(os.path.join(out, "convergence.csv"), header, rows)
    print(f"wrote {path}")
    print("least-squares rates (last 3 points):",
          " ".join(f"{c}={r:.3f}" for c, r in zip(COMPONENTS, report.lsq_rates)))
    if _want_plot(args, run):
        plots.save_convergence_figure(report.n_values, report.errors, report.indicators,
                                      os.path.join(out, "convergence.png"))
        print(f"wrote {os.path.join(out, 'convergence.png')}")
    return 0


def cmd_stability(args) -> int:
    out = _out_dir(args)
    lo, hi, step = args.lambda_min, args.lambda_max, args.lambda_step
    if not (0.0 < lo <= hi < TWO_PI) or step <= 0.0:
        raise ConfigError("lambda grid must satisfy 0 < min <= max < 2*pi with positive step")
    lams = np.arange(lo, hi + 0.5 * step, step)
    lams = lams[lams < TWO_PI]
    codes = [c.strip() for c in args.bc_codes.split(",") if c.strip()]
    if not codes:
        raise ConfigError("no bc codes given")
    written = []
    for code in codes:
        bc = BcPair.from_code(code)
        rows = []
        cns, cqs, cq0s, cstabs = [], [], [], []
        for lam in lams:
            params = ArchParameters(args.epsilon, args.mu, float(lam))
            rep = stability_constants(params, bc)
            rows.append((float(lam), rep.c_n, rep.c_q, rep.c_q0, rep.c_stab, rep.regime_label))
            cns.append(rep.c_n)
            cqs.append(rep.c_q)
            cq0s.append(rep.c_q0)
            cstabs.append(rep.c_stab)
        path = write_csv(os.path.join(out, f"stability_{code}.csv"),
                         ["lambda", "C_n", "C_q", "C_q0", "C_stab", "regime"], rows)
        written.append(path)
        if not args.no_plot:
            plots.save_stability_figure(lams, cns, cqs, cq0s,
                                        os.path.join(out, f"stability_{code}.png"),
                                        c_stab=cstabs, code=code)
    print("wrote " + ", ".join(written))
    return 0


def cmd_compare_fem(args) -> int:
    run = parse_config(args.config)
    if run.arch.params.mu <= 0.0:
        raise ConfigError("compare-fem requires mu > 0 (shear-deformable model)")
    n_list = _parse_n_list(args.n_list)
    out = _out_dir(args, run)
    ref = solve_reference(run.arch)
    rows = []
    dpg_err = np.zeros((len(n_list), 6))
    red_err = np.zeros((len(n_list), 3))
    unred_err = np.zeros((len(n_list), 3))
    for i, n in enumerate(n_list):
        mesh = Mesh.uniform(n)
        sol = solve(run.arch, mesh, run.disc, threads=args.threads)
        dpg_err[i] = l2_errors(sol, ref.evaluate).errors
        red_err[i] = fem_l2_errors(fem_solve(run.arch, mesh, reduced=True), ref.evaluate)
        unred_err[i] = fem_l2_errors(fem_solve(run.arch, mesh, reduced=False), ref.evaluate)
        n_kin = (len(run.arch.bc.left.kinematic_components)
                 + len(run.arch.bc.right.kinematic_components))
        rows.append((n, 6 * (n + 1) - 6, 3 * (n + 1) - n_kin, *dpg_err[i],
                     *red_err[i], *unred_err[i]))
    header = (["N", "dofs_dpg", "dofs_fem"]
              + [f"err_dpg_{c}" for c in COMPONENTS]
              + [f"err_fem_red_{c}" for c in ("u", "w", "theta")]
              + [f"err_fem_unred_{c}" for c in ("u", "w", "theta")])
    path = write_csv(os.path.join(out, "compare_fem.csv"), header, rows)
    print(f"wrote {path}")
    if _want_plot(args, run):
        plots.save_comparison_figure(n_list, dpg_err, red_err, unred_err,
                                     os.path.join(out, "compare_fem.png"))
        print(f"wrote {os.path.join(out, 'compare_fem.png')}")
    return 0


def cmd_oracle(args) -> int:
    run = parse_config(args.config)
    out = _out_dir(args, run)
    ref = solve_reference(run.arch)
    x = np.linspace(0.0, 1.0, args.samples)
    vals = ref.evaluate(x)
    path = write_csv(os.path.join(out, "reference.csv"),
                     ["x", "u", "w", "theta", "n", "q", "m"],
                     [(x[i], *vals[:, i]) for i in range(x.size)])
    print(f"wrote {path}")
    print(f"richardson_delta = {ref.richardson_delta:.3e}, "
          f"residual_bound = {ref.residual_bound:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="archdpg",
                                 description="Ultra-weak DPG solver for the scaled circular arch")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, config=True, n_list=False):
        if config:
            sp.add_argument("--config", required=True, help="path to a JSON problem config")
        if n_list:
            sp.add_argument("--n-list", required=True, help="comma-separated element counts, e.g. 8,16,32")
        sp.add_argument("--out", default=None, help="output directory (default: config output.dir or '.')")
        sp.add_argument("--no-plot", action="store_true", help="skip figure rendering")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for element assembly")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for randomized property drivers (reserved)")

    sp = sub.add_parser("solve", help="solve one configuration and emit field/trace CSVs")
    common(sp)
    sp.add_argument("--samples-per-element", type=int, default=21)
    sp.add_argument("--point-load-mode", choices=("functional", "trace"), default="functional")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("converge", help="convergence study against the reference oracle")
    common(sp, n_list=True)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("stability", help="tabulate stability constants over a lambda grid")
    common(sp, config=False)
    sp.add_argument("--bc-codes", default="cf", help="comma-separated two-letter codes")
    sp.add_argument("--lambda-min", type=float, default=0.1)
    sp.add_argument("--lambda-max", type=float, default=6.0)
    sp.add_argument("--lambda-step", type=float, default=0.1)
    sp.add_argument("--epsilon", type=float, default=1e-4)
    sp.add_argument("--mu", type=float, default=1.0)
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("compare-fem", help="DPG vs reduced/unreduced displacement FEM")
    common(sp, n_list=True)
    sp.set_defaults(func=cmd_compare_fem)

    sp = sub.add_parser("oracle", help="dump the collocation reference solution")
    common(sp)
    sp.add_argument("--samples", type=int, default=1001)
    sp.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolveError, FemSolveError, EnrichmentError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
