"""Element assembly and static condensation for the ultra-weak DPG scheme.

Per element, trial data are six L2 field polynomials of degree p plus the
twelve nodal traces touching the element; test functions are broken
polynomials of degree p + delta_p.  The practical scheme forms the normal
equations S = B^T G^-1 B elementwise, condenses out the field unknowns and
sums the 12x12 trace blocks into a banded symmetric global system.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .basis import basis, quad_rule
from .core import ArchConfig, Mesh, stability_constants
from .loads import COMPONENTS, CONJUGATE_STRESS, LoadSpec

N_FIELDS = 6
TRACE_BANDWIDTH = 11  # element trace blocks span two consecutive nodes

TEST_NORM_STANDARD = "standard"
TEST_NORM_SCALED_GRAPH = "scaled_graph"

# index of the test component each trace variable is paired with in b(.,.)
TRACE_TEST_PAIR = (3, 4, 5, 0, 1, 2)  # u->dn, w->dq, theta->dm, n->du, q->dw, m->dtheta


class EnrichmentError(RuntimeError):
    """Raised when the condensed field block is singular (delta_p too small)."""


class UncoveredBcWarning(UserWarning):
    """The requested boundary-condition code is outside the covered theory."""


@dataclass(frozen=True)
class DiscretizationConfig:
    """Trial degree, test enrichment and the test-space norm."""

    p: int
    delta_p: int | None = None
    test_norm: str = TEST_NORM_STANDARD
    tau_num: float = 1e-5
    third_term: str = "adjoint"

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("trial degree p must be nonnegative")
        if self.test_norm not in (TEST_NORM_STANDARD, TEST_NORM_SCALED_GRAPH):
            raise ValueError(f"unknown test norm {self.test_norm!r}")
        if self.delta_p is None:
            # graph-norm local problems need more enrichment headroom
            dp = 2 if self.test_norm == TEST_NORM_STANDARD else 4
            object.__setattr__(self, "delta_p", dp)
        if self.delta_p < 1:
            raise ValueError("enrichment delta_p must be at least 1")
        if self.test_norm == TEST_NORM_SCALED_GRAPH and not self.tau_num > 0.0:
            raise ValueError("tau_num must be positive for the scaled graph norm")
        if self.third_term not in ("adjoint", "paper-literal"):
            raise ValueError(f"unknown third_term {self.third_term!r}")

    @property
    def test_degree(self) -> int:
        return self.p + self.delta_p

    @property
    def n_field_dofs(self) -> int:
        return N_FIELDS * (self.p + 1)

    @property
    def n_test_dofs(self) -> int:
        return N_FIELDS * (self.test_degree + 1)


@dataclass
class ElementSystem:
    """Trial-to-test matrix, test Gram matrix and load vector of one element."""

    B: np.ndarray
    G: np.ndarray
    l: np.ndarray


@dataclass
class ElementRecovery:
    """Data to recover condensed field dofs and the local residual."""

    solve_interior: np.ndarray  # X = S_ff^-1 S_ft
    interior_rhs: np.ndarray  # y = S_ff^-1 s_f
    b_white: np.ndarray  # L^-1 B with G = L L^T
    l_white: np.ndarray  # L^-1 l
    field_factor: tuple  # Cholesky factor of S_ff for refinement solves


@dataclass
class GlobalSystem:
    """Banded condensed trace system with boundary conditions applied."""

    ab: np.ndarray  # lower-banded storage for scipy.linalg.solveh_banded
    rhs: np.ndarray
    essential: np.ndarray  # bool mask over trace dofs
    essential_values: np.ndarray
    recoveries: list
    mesh: Mesh
    disc: DiscretizationConfig
    config: ArchConfig
    warnings: list = field(default_factory=list)

    @property
    def n_dofs(self) -> int:
        return self.rhs.size

    @property
    def n_free_dofs(self) -> int:
        return int(np.count_nonzero(~self.essential))


def _reference_tables(disc: DiscretizationConfig):
    """Quadrature and basis tables shared by all elements."""
    g = disc.test_degree + 2
    rule = quad_rule(g)
    v_trial, _ = basis(disc.p).eval(rule.points)
    v_test, dv_test = basis(disc.test_degree).eval(rule.points)
    w = rule.weights
    # M[i,a] = int P_i P_a, D[i,a] = int P_i' P_a  (reference interval)
    m_mat = v_test.T @ (w[:, None] * v_trial)
    d_mat = dv_test.T @ (w[:, None] * v_trial)
    k_test = dv_test.T @ (w[:, None] * dv_test)
    m_test = v_test.T @ (w[:, None] * v_test)
    return rule, m_mat, d_mat, m_test, k_test, v_test, dv_test


def element_b_matrix(params, h: float, disc: DiscretizationConfig) -> np.ndarray:
    """All nine volume couplings plus the twelve nodal trace couplings."""
    _, m_mat, d_mat, *_ = _reference_tables(disc)
    nt = disc.test_degree + 1
    np_ = disc.p + 1
    eps2 = params.epsilon**2
    lam = params.lam
    mu = params.mu
    mh = 0.5 * h * m_mat

    b = np.zeros((N_FIELDS * nt, N_FIELDS * np_ + 2 * N_FIELDS))

    def blk(test_c, trial_c, mat):
        b[test_c * nt : (test_c + 1) * nt, trial_c * np_ : (trial_c + 1) * np_] += mat

    # volume terms: trial component against the operator acting on tests
    blk(3, 0, d_mat)            # (u, dn')
    blk(4, 0, lam * mh)         # (u, lam dq)
    blk(4, 1, d_mat)            # (w, dq')
    blk(3, 1, -lam * mh)        # (w, -lam dn)
    blk(5, 2, d_mat)            # (theta, dm')
    blk(4, 2, mh)               # (theta, dq)
    blk(3, 3, eps2 * mh)        # (n, eps^2 dn)
    blk(0, 3, d_mat)            # (n, du')
    blk(1, 3, lam * mh)         # (n, lam dw)
    blk(4, 4, mu * eps2 * mh)   # (q, mu eps^2 dq)
    blk(1, 4, d_mat)            # (q, dw')
    blk(0, 4, -lam * mh)        # (q, -lam du)
    blk(2, 4, -mh)              # (q, -dtheta)
    blk(5, 5, mh)               # (m, dm)
    blk(2, 5, d_mat)            # (m, dtheta')

    # nodal trace couplings from -<z_hat, dz>: +dz at the left endpoint,
    # -dz at the right endpoint, paired per TRACE_TEST_PAIR
    k = np.arange(nt)
    left_vals = (-1.0) ** k   # P_k(-1)
    right_vals = np.ones(nt)  # P_k(+1)
    off = N_FIELDS * np_
    for tc, test_c in enumerate(TRACE_TEST_PAIR):
        rows = slice(test_c * nt, (test_c + 1) * nt)
        b[rows, off + tc] += left_vals
        b[rows, off + N_FIELDS + tc] -= right_vals
    return b


def gram_standard(disc: DiscretizationConfig, h: float) -> np.ndarray:
    """Broken-H1 Gram matrix: block diagonal over the six test components."""
    _, _, _, m_test, k_test, _, _ = _reference_tables(disc)
    block = 0.5 * h * m_test + (2.0 / h) * k_test
    nt = disc.test_degree + 1
    g = np.zeros((N_FIELDS * nt, N_FIELDS * nt))
    for c in range(N_FIELDS):
        g[c * nt : (c + 1) * nt, c * nt : (c + 1) * nt] = block
    return g


def gram_graph(params, disc: DiscretizationConfig, h: float) -> np.ndarray:
    """Scaled adjoint-graph Gram matrix (couples test components)."""
    rule, _, _, m_test, _, v_test, dv_test = _reference_tables(disc)
    nt = disc.test_degree + 1
    ndof = N_FIELDS * nt
    nq = rule.order
    eps2 = params.epsilon**2
    lam = params.lam
    mu = params.mu

    val = np.zeros((N_FIELDS, nq, ndof))
    der = np.zeros((N_FIELDS, nq, ndof))
    for c in range(N_FIELDS):
        cols = slice(c * nt, (c + 1) * nt)
        val[c, :, cols] = v_test
        der[c, :, cols] = (2.0 / h) * dv_test

    du, dw, dth, dn, dq, dm = val
    ops = [
        der[3] + lam * dq,                      # dn' + lam dq
        der[4] - lam * dn,                      # dq' - lam dn
        (der[5] if disc.third_term == "adjoint" else der[3]) + dq,
        eps2 * dn + der[0] + lam * dw,          # eps^2 dn + du' + lam dw
        mu * eps2 * dq + der[1] - lam * du - dth,
        dm + der[2],                            # dm + dtheta'
    ]
    wts = 0.5 * h * rule.weights
    g = np.zeros((ndof, ndof))
    for op in ops:
        g += op.T @ (wts[:, None] * op)
    mass_block = 0.5 * h * m_test
    for c in range(N_FIELDS):
        sl = slice(c * nt, (c + 1) * nt)
        g[sl, sl] += disc.tau_num * mass_block
    return g


def element_gram(params, disc: DiscretizationConfig, h: float) -> np.ndarray:
    if disc.test_norm == TEST_NORM_STANDARD:
        return gram_standard(disc, h)
    return gram_graph(params, disc, h)


def element_load(load: LoadSpec, disc: DiscretizationConfig, element: tuple,
                 mesh_span: tuple = (0.0, 1.0), point_load_mode: str = "functional") -> np.ndarray:
    """Load vector in the enriched test space for one element."""
    a, b = element
    h = b - a
    nt = disc.test_degree + 1
    l = np.zeros(N_FIELDS * nt)
    data = load.volume_data()
    if data:
        rule = quad_rule(disc.test_degree + 6)
        v_test, _ = basis(disc.test_degree).eval(rule.points)
        x, w = rule.map_to(a, b)
        for comp, expr in data.items():
            c = COMPONENTS.index(comp)
            l[c * nt : (c + 1) * nt] += v_test.T @ (w * expr(x))
    if point_load_mode == "functional":
        k = np.arange(nt)
        for pl in load.point_loads:
            c = COMPONENTS.index(pl.component)
            if pl.endpoint == 0 and a == mesh_span[0]:
                l[c * nt : (c + 1) * nt] += pl.magnitude * (-1.0) ** k
            elif pl.endpoint == 1 and b == mesh_span[1]:
                l[c * nt : (c + 1) * nt] += pl.magnitude * np.ones(nt)
    return l


def element_system(config: ArchConfig, mesh: Mesh, j: int, disc: DiscretizationConfig,
                   point_load_mode: str = "functional") -> ElementSystem:
    a, b = mesh.element(j)
    h = b - a
    B = element_b_matrix(config.params, h, disc)
    G = element_gram(config.params, disc, h)
    l = element_load(config.load, disc, (a, b),
                     mesh_span=(float(mesh.nodes[0]), float(mesh.nodes[-1])),
                     point_load_mode=point_load_mode)
    return ElementSystem(B=B, G=G, l=l)


def condense(es: ElementSystem, disc: DiscretizationConfig):
    """Schur complement onto the 12 trace dofs.

    Returns (schur, rhs, recovery).  Uses a diagonally equilibrated Cholesky
    factorization of G; S = B^T G^-1 B is formed as Bw^T Bw with Bw = L^-1 B.
    """
    d = 1.0 / np.sqrt(np.diag(es.G))
    g_eq = es.G * d[:, None] * d[None, :]
    try:
        l_eq = cholesky(g_eq, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise EnrichmentError("test Gram matrix is not positive definite") from exc
    b_white = solve_triangular(l_eq, d[:, None] * es.B, lower=True)
    l_white = solve_triangular(l_eq, d * es.l, lower=True)

    s_full = b_white.T @ b_white
    s_rhs = b_white.T @ l_white
    nf = disc.n_field_dofs
    s_ff = s_full[:nf, :nf]
    s_ft = s_full[:nf, nf:]
    s_tt = s_full[nf:, nf:]
    try:
        c_ff = cho_factor(s_ff, lower=True)
    except np.linalg.LinAlgError as exc:
        raise EnrichmentError(
            "condensed field block is singular; enrichment delta_p "
            f"{disc.delta_p} is too small for trial degree p={disc.p}"
        ) from exc
    x = cho_solve(c_ff, s_ft)
    y = cho_solve(c_ff, s_rhs[:nf])
    schur = s_tt - s_ft.T @ x
    schur = 0.5 * (schur + schur.T)
    rhs = s_rhs[nf:] - s_ft.T @ y
    return schur, rhs, ElementRecovery(x, y, b_white, l_white, c_ff)


def _essential_dofs(config: ArchConfig, mesh: Mesh, point_load_mode: str):
    """(dof, value) pairs for the prescribed trace components."""
    n_nodes = mesh.n_elements + 1
    values = dict(config.trace_value_map())
    if point_load_mode == "trace":
        for pl in config.load.point_loads:
            conj = CONJUGATE_STRESS[pl.component]
            kind = config.bc.left if pl.endpoint == 0 else config.bc.right
            if COMPONENTS.index(conj) not in kind.essential_components:
                raise ValueError(
                    f"trace realization of a point load on {pl.component!r} needs the "
                    f"conjugate stress {conj!r} to be essential at endpoint {pl.endpoint}"
                )
            key = (pl.endpoint, conj)
            sign = -1.0 if pl.endpoint == 0 else 1.0
            values[key] = values.get(key, 0.0) + sign * pl.magnitude
    out = []
    for comp_idx in config.bc.left.essential_components:
        out.append((comp_idx, values.get((0, COMPONENTS[comp_idx]), 0.0)))
    for comp_idx in config.bc.right.essential_components:
        out.append((6 * (n_nodes - 1) + comp_idx, values.get((1, COMPONENTS[comp_idx]), 0.0)))
    return out


def _band_get(ab: np.ndarray, r: int, c: int) -> float:
    lo, hi = min(r, c), max(r, c)
    return ab[hi - lo, lo] if hi - lo <= TRACE_BANDWIDTH else 0.0


def apply_essential(ab: np.ndarray, rhs: np.ndarray, pairs) -> tuple:
    """Eliminate prescribed dofs in banded storage (identity row/col trick)."""
    n = rhs.size
    essential = np.zeros(n, dtype=bool)
    values = np.zeros(n)
    for dof, val in pairs:
        essential[dof] = True
        values[dof] = val
    for dof, val in pairs:
        if val != 0.0:
            for r in range(max(0, dof - TRACE_BANDWIDTH), min(n, dof + TRACE_BANDWIDTH + 1)):
                if r != dof:
                    rhs[r] -= _band_get(ab, r, dof) * val
    for dof, val in pairs:
        for k in range(1, TRACE_BANDWIDTH + 1):
            if dof + k < n:
                ab[k, dof] = 0.0
            if dof - k >= 0:
                ab[k, dof - k] = 0.0
        ab[0, dof] = 1.0
        rhs[dof] = val
    return essential, values


def assemble_global(config: ArchConfig, mesh: Mesh, disc: DiscretizationConfig,
                    point_load_mode: str = "functional", threads: int = 1) -> GlobalSystem:
    """Condensed trace system over 6(N+1) dofs with boundary conditions."""
    if point_load_mode not in ("functional", "trace"):
        raise ValueError(f"unknown point_load_mode {point_load_mode!r}")
    n_el = mesh.n_elements
    n_dofs = N_FIELDS * (n_el + 1)
    ab = np.zeros((TRACE_BANDWIDTH + 1, n_dofs))
    rhs = np.zeros(n_dofs)

    def build(j):
        es = element_system(config, mesh, j, disc, point_load_mode)
        return condense(es, disc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pieces = list(pool.map(build, range(n_el)))
    else:
        pieces = [build(j) for j in range(n_el)]

    recoveries = []
    for j, (schur, local_rhs, rec) in enumerate(pieces):
        base = N_FIELDS * j
        for col in range(12):
            c = base + col
            rows = np.arange(col, 12)
            ab[rows - col, c] += schur[rows, col]
        rhs[base : base + 12] += local_rhs
        recoveries.append(rec)

    pairs = _essential_dofs(config, mesh, point_load_mode)
    essential, values = apply_essential(ab, rhs, pairs)

    notes = []
    report = stability_constants(config.params, config.bc)
    if not report.covered:
        msg = (f"boundary-condition code '{config.bc.code}' is not covered by the "
               "stability theory; the solve may fail or lose accuracy")
        notes.append(msg)
        warnings.warn(msg, UncoveredBcWarning, stacklevel=2)
    if math.isinf(report.c_stab):
        msg = (f"stability constant is infinite for code '{config.bc.code}' at "
               f"lambda={config.params.lam} (cos(lambda) = 0)")
        notes.append(msg)
        warnings.warn(msg, UncoveredBcWarning, stacklevel=2)

    return GlobalSystem(ab=ab, rhs=rhs, essential=essential, essential_values=values,
                        recoveries=recoveries, mesh=mesh, disc=disc, config=config,
                        warnings=notes)
