"""Global DPG solve, field recovery, residual indicator and error tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as nleg
from scipy.linalg import cho_solve, cho_solve_banded, cholesky_banded

from .assembly import N_FIELDS, DiscretizationConfig, GlobalSystem, assemble_global
from .basis import quad_rule
from .core import ArchConfig, Mesh
from .loads import COMPONENTS


class SolveError(RuntimeError):
    """Raised when the condensed trace system cannot be factorized."""


@dataclass
class FieldSolution:
    """Per-element Legendre coefficients of the six field unknowns."""

    mesh: Mesh
    coeffs: np.ndarray  # shape (N, 6, p+1)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[2] - 1

    def evaluate(self, x) -> np.ndarray:
        """Field values at arbitrary points, shape (6, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = self.mesh.locate(x)
        out = np.empty((N_FIELDS, x.size))
        nodes = self.mesh.nodes
        for j in np.unique(idx):
            sel = idx == j
            a, b = nodes[j], nodes[j + 1]
            xi = 2.0 * (x[sel] - a) / (b - a) - 1.0
            out[:, sel] = nleg.legval(xi, self.coeffs[j].T)
        return out


@dataclass
class Solution:
    """DPG approximation: fields, traces and the built-in error indicator."""

    fields: FieldSolution
    traces: np.ndarray  # shape (6, N+1)
    indicator: float
    per_element_indicator: np.ndarray

    @property
    def mesh(self) -> Mesh:
        return self.fields.mesh

    def evaluate(self, x) -> np.ndarray:
        return self.fields.evaluate(x)


@dataclass
class ErrorTable:
    """Per-field relative L2 errors against a reference evaluator."""

    errors: np.ndarray  # shape (6,)
    ref_norms: np.ndarray  # shape (6,)

    def as_dict(self) -> dict:
        return {c: float(e) for c, e in zip(COMPONENTS, self.errors)}

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors))


def solve_system(gs: GlobalSystem, refine: int = 2) -> Solution:
    """Factorize the banded trace system and recover fields and indicator.

    ``refine`` iterative-refinement passes recompute the least-squares
    residual from the whitened element data and re-solve for a correction;
    this restores accuracy lost to the squared conditioning of the normal
    equations on fine meshes.
    """
    try:
        factor = cholesky_banded(gs.ab, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolveError(
            f"trace system factorization failed for bc code '{gs.config.bc.code}'; "
            "the boundary conditions may leave the problem singular, or the "
            f"enrichment delta_p={gs.disc.delta_p} may be too small (try increasing it)"
        ) from exc
    trace_flat = cho_solve_banded((factor, True), gs.rhs)

    n_el = gs.mesh.n_elements
    nf = gs.disc.n_field_dofs
    fields_flat = np.empty((n_el, nf))
    for j, rec in enumerate(gs.recoveries):
        u_t = trace_flat[N_FIELDS * j : N_FIELDS * j + 12]
        fields_flat[j] = rec.interior_rhs - rec.solve_interior @ u_t

    for _ in range(max(refine, 0)):
        grad_trace = np.zeros(gs.n_dofs)
        grads_field = np.empty((n_el, nf))
        for j, rec in enumerate(gs.recoveries):
            u_t = trace_flat[N_FIELDS * j : N_FIELDS * j + 12]
            resid = rec.l_white - rec.b_white @ np.concatenate([fields_flat[j], u_t])
            g = rec.b_white.T @ resid
            grads_field[j] = g[:nf]
            gf_solved = cho_solve(rec.field_factor, g[:nf])
            # condensed gradient: g_t - S_tf S_ff^-1 g_f with S_tf = Bt^T Bf
            grad_trace[N_FIELDS * j : N_FIELDS * j + 12] += (
                g[nf:] - (rec.b_white[:, :nf] @ gf_solved) @ rec.b_white[:, nf:]
            )
        grad_trace[gs.essential] = 0.0
        delta_t = cho_solve_banded((factor, True), grad_trace)
        trace_flat = trace_flat + delta_t
        for j, rec in enumerate(gs.recoveries):
            dt = delta_t[N_FIELDS * j : N_FIELDS * j + 12]
            df = cho_solve(rec.field_factor, grads_field[j]) - rec.solve_interior @ dt
            fields_flat[j] = fields_flat[j] + df

    p1 = gs.disc.p + 1
    coeffs = fields_flat.reshape(n_el, N_FIELDS, p1)
    eta = np.empty(n_el)
    for j, rec in enumerate(gs.recoveries):
        u_t = trace_flat[N_FIELDS * j : N_FIELDS * j + 12]
        resid = rec.l_white - rec.b_white @ np.concatenate([fields_flat[j], u_t])
        eta[j] = float(np.linalg.norm(resid))

    traces = trace_flat.reshape(n_el + 1, N_FIELDS).T.copy()
    return Solution(
        fields=FieldSolution(gs.mesh, coeffs),
        traces=traces,
        indicator=float(np.sqrt(np.sum(eta**2))),
        per_element_indicator=eta,
    )


def solve(config: ArchConfig, mesh: Mesh, disc: DiscretizationConfig,
          point_load_mode: str = "functional", threads: int = 1) -> Solution:
    gs = assemble_global(config, mesh, disc, point_load_mode=point_load_mode, threads=threads)
    return solve_system(gs)


def l2_errors(sol: Solution, reference, quad_order: int | None = None) -> ErrorTable:
    """Relative per-field L2 errors of a Solution against a reference.

    ``reference`` is a callable mapping points in [0,1] to a (6, n) array.
    Falls back to absolute errors where the reference norm is below 1e-14.
    """
    mesh = sol.mesh
    g = quad_order if quad_order is not None else sol.fields.degree + 8
    rule = quad_rule(g)
    err2 = np.zeros(N_FIELDS)
    ref2 = np.zeros(N_FIELDS)
    for j in range(mesh.n_elements):
        a, b = mesh.element(j)
        x, w = rule.map_to(a, b)
        approx = nleg.legval(rule.points, sol.fields.coeffs[j].T)
        exact = np.asarray(reference(x), dtype=float)
        err2 += ((approx - exact) ** 2) @ w
        ref2 += (exact**2) @ w
    ref_norms = np.sqrt(ref2)
    denom = np.where(ref_norms < 1e-14, 1.0, ref_norms)
    return ErrorTable(errors=np.sqrt(err2) / denom, ref_norms=ref_norms)


def _lsq_slope(log_n: np.ndarray, log_e: np.ndarray) -> float:
    if np.any(~np.isfinite(log_e)):
        return math.nan
    a = np.vstack([log_n, np.ones_like(log_n)]).T
    coef, *_ = np.linalg.lstsq(a, log_e, rcond=None)
    return float(coef[0])


@dataclass
class ConvergenceReport:
    """Errors, indicators and observed rates across a refinement sequence."""

    n_values: list
    h_max: list
    errors: np.ndarray  # shape (R, 6)
    indicators: np.ndarray  # shape (R,)
    rates: np.ndarray = field(init=False)  # consecutive-pair, nan in row 0
    indicator_rates: np.ndarray = field(init=False)
    lsq_rates: np.ndarray = field(init=False)  # over the last (up to) 3 rows
    lsq_indicator_rate: float = field(init=False)

    def __post_init__(self):
        r = len(self.n_values)
        logn = np.log(np.asarray(self.n_values, dtype=float))
        self.rates = np.full((r, N_FIELDS), math.nan)
        self.indicator_rates = np.full(r, math.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i in range(1, r):
                dn = logn[i] - logn[i - 1]
                self.rates[i] = np.log(self.errors[i - 1] / self.errors[i]) / dn
                self.indicator_rates[i] = (
                    math.log(self.indicators[i - 1] / self.indicators[i]) / dn
                    if self.indicators[i] > 0 else math.nan
                )
        tail = slice(max(0, r - 3), r)
        with np.errstate(divide="ignore"):
            log_err = np.log(self.errors[tail])
            self.lsq_rates = np.array(
                [-_lsq_slope(logn[tail], log_err[:, c]) for c in range(N_FIELDS)]
            )
            self.lsq_indicator_rate = -_lsq_slope(logn[tail], np.log(self.indicators[tail]))


def convergence_study(config: ArchConfig, disc: DiscretizationConfig, n_list,
                      reference=None, point_load_mode: str = "functional",
                      threads: int = 1) -> ConvergenceReport:
    """Solve on uniform meshes for each N and tabulate errors and rates.

    ``reference`` defaults to the high-accuracy collocation oracle for the
    given configuration.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("N list must be strictly increasing")
    if reference is None:
        from .oracle import solve_reference

        reference = solve_reference(config).evaluate
    errors = np.zeros((len(n_list), N_FIELDS))
    indicators = np.zeros(len(n_list))
    h_max = []
    for i, n in enumerate(n_list):
        mesh = Mesh.uniform(n)
        sol = solve(config, mesh, disc, point_load_mode=point_load_mode, threads=threads)
        table = l2_errors(sol, reference)
        errors[i] = table.errors
        indicators[i] = sol.indicator
        h_max.append(float(np.max(mesh.lengths)))
    return ConvergenceReport(n_values=n_list, h_max=h_max, errors=errors, indicators=indicators)
