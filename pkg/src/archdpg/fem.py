"""Displacement FEM baseline: continuous P1 fields, optional strain reduction.

Minimizes the strain energy

    F(u, w, theta) = 1/2 ( eps^-2 ||Pi(u' + lam w)||^2
                         + (mu eps^2)^-1 ||Pi(w' - lam u - theta)||^2
                         + ||theta'||^2 ) - (f_u, u) - (f_w, w) - point work

over continuous piecewise-linear displacements with the kinematic boundary
constraints.  With reduction, Pi is the L2 projection onto piecewise
constants (midpoint strains); without it Pi is the identity and the scheme
locks for small eps.  Axial and shear forces are recovered as the projected
strains scaled by the stiffnesses, so they are elementwise constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .basis import quad_rule
from .core import ArchConfig, Mesh
from .loads import COMPONENTS

N_DISP = 3  # u, w, theta
FEM_BANDWIDTH = 5
# mu = 0 removes the shear compliance; enforce the Euler-Bernoulli constraint
# by a small fixed penalty compliance instead (non-paper extension)
MU_ZERO_PENALTY = 1e-3


class FemSolveError(RuntimeError):
    """Raised when the kinematic constraints leave a rigid mode."""


@dataclass
class FemSolution:
    """Nodal displacements plus elementwise-constant recovered stresses."""

    mesh: Mesh
    displacements: np.ndarray  # shape (3, N+1): u, w, theta
    n: np.ndarray  # shape (N,)
    q: np.ndarray  # shape (N,)
    m: np.ndarray  # shape (N,)
    energy: float
    reduced: bool

    def evaluate_displacements(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([np.interp(x, self.mesh.nodes, self.displacements[c])
                         for c in range(N_DISP)])


def _stiffness_coeffs(config: ArchConfig) -> tuple:
    eps2 = config.params.epsilon**2
    mu = config.params.mu
    a_membrane = 1.0 / eps2
    shear_compliance = mu * eps2 if mu > 0.0 else eps2 * MU_ZERO_PENALTY
    return a_membrane, 1.0 / shear_compliance


def _strain_vectors(h: float, lam: float, xi: float) -> tuple:
    """Strain-displacement rows at reference point xi for local dofs
    [u0, w0, th0, u1, w1, th1]."""
    n0 = 0.5 * (1.0 - xi)
    n1 = 0.5 * (1.0 + xi)
    b_mem = np.array([-1.0 / h, lam * n0, 0.0, 1.0 / h, lam * n1, 0.0])
    b_shr = np.array([-lam * n0, -1.0 / h, -n0, -lam * n1, 1.0 / h, -n1])
    b_bnd = np.array([0.0, 0.0, -1.0 / h, 0.0, 0.0, 1.0 / h])
    return b_mem, b_shr, b_bnd


def _element_stiffness(h: float, lam: float, a_mem: float, a_shr: float,
                       reduced: bool) -> np.ndarray:
    if reduced:
        b_mem, b_shr, b_bnd = _strain_vectors(h, lam, 0.0)
        return h * (a_mem * np.outer(b_mem, b_mem)
                    + a_shr * np.outer(b_shr, b_shr)
                    + np.outer(b_bnd, b_bnd))
    rule = quad_rule(2)
    k = np.zeros((6, 6))
    for xi, wt in zip(rule.points, rule.weights):
        b_mem, b_shr, _ = _strain_vectors(h, lam, xi)
        k += 0.5 * h * wt * (a_mem * np.outer(b_mem, b_mem) + a_shr * np.outer(b_shr, b_shr))
    _, _, b_bnd = _strain_vectors(h, lam, 0.0)
    k += h * np.outer(b_bnd, b_bnd)
    return k


def _load_vector(config: ArchConfig, mesh: Mesh) -> np.ndarray:
    n_nodes = mesh.n_elements + 1
    f = np.zeros(N_DISP * n_nodes)
    rule = quad_rule(10)
    data = {"u": config.load.distributed_u, "w": config.load.distributed_w}
    for comp, expr in data.items():
        if expr.is_zero:
            continue
        c = ("u", "w").index(comp)
        for j in range(mesh.n_elements):
            a, b = mesh.element(j)
            x, w = rule.map_to(a, b)
            fx = expr(x)
            n0 = (b - x) / (b - a)
            n1 = (x - a) / (b - a)
            f[N_DISP * j + c] += np.sum(w * fx * n0)
            f[N_DISP * (j + 1) + c] += np.sum(w * fx * n1)
    for pl in config.load.point_loads:
        node = 0 if pl.endpoint == 0 else mesh.n_elements
        c = ("u", "w", "theta").index(pl.component)
        f[N_DISP * node + c] += pl.magnitude
    return f


def _kinematic_constraints(config: ArchConfig, mesh: Mesh):
    values = config.trace_value_map()
    pairs = []
    n_nodes = mesh.n_elements + 1
    for endpoint, kind, node in ((0, config.bc.left, 0), (1, config.bc.right, n_nodes - 1)):
        for comp_idx in kind.kinematic_components:
            val = values.get((endpoint, COMPONENTS[comp_idx]), 0.0)
            pairs.append((N_DISP * node + comp_idx, val))
    return pairs


def fem_solve(config: ArchConfig, mesh: Mesh, reduced: bool = True) -> FemSolution:
    """Minimize the (optionally reduced) strain energy over P1 displacements."""
    lam = config.params.lam
    a_mem, a_shr = _stiffness_coeffs(config)
    n_el = mesh.n_elements
    n_dofs = N_DISP * (n_el + 1)
    ab = np.zeros((FEM_BANDWIDTH + 1, n_dofs))
    for j in range(n_el):
        h = float(mesh.lengths[j])
        k_el = _element_stiffness(h, lam, a_mem, a_shr, reduced)
        base = N_DISP * j
        for col in range(6):
            rows = np.arange(col, 6)
            ab[rows - col, base + col] += k_el[rows, col]
    rhs = _load_vector(config, mesh)

    pairs = _kinematic_constraints(config, mesh)
    for dof, val in pairs:
        if val != 0.0:
            for r in range(max(0, dof - FEM_BANDWIDTH), min(n_dofs, dof + FEM_BANDWIDTH + 1)):
                if r != dof:
                    lo, hi = min(r, dof), max(r, dof)
                    entry = ab[hi - lo, lo] if hi - lo <= FEM_BANDWIDTH else 0.0
                    rhs[r] -= entry * val
    for dof, val in pairs:
        for k in range(1, FEM_BANDWIDTH + 1):
            if dof + k < n_dofs:
                ab[k, dof] = 0.0
            if dof - k >= 0:
                ab[k, dof - k] = 0.0
        ab[0, dof] = 1.0
        rhs[dof] = val

    try:
        disp_flat = solveh_banded(ab, rhs, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FemSolveError(
            f"kinematic constraints of bc code '{config.bc.code}' leave a rigid "
            "mode; the displacement FEM needs a support fixing it"
        ) from exc

    disp = disp_flat.reshape(n_el + 1, N_DISP).T.copy()
    n_arr = np.empty(n_el)
    q_arr = np.empty(n_el)
    m_arr = np.empty(n_el)
    for j in range(n_el):
        h = float(mesh.lengths[j])
        local = disp_flat[N_DISP * j : N_DISP * j + 6]
        b_mem, b_shr, b_bnd = _strain_vectors(h, lam, 0.0)
        n_arr[j] = a_mem * (b_mem @ local)
        q_arr[j] = a_shr * (b_shr @ local)
        m_arr[j] = b_bnd @ local

    sol = FemSolution(mesh=mesh, displacements=disp, n=n_arr, q=q_arr, m=m_arr,
                      energy=0.0, reduced=reduced)
    sol.energy = fem_energy(sol, config)
    return sol


def fem_energy(sol: FemSolution, config: ArchConfig) -> float:
    """Evaluate the energy functional (matching the solution's reduction mode)."""
    lam = config.params.lam
    a_mem, a_shr = _stiffness_coeffs(config)
    disp_flat = sol.displacements.T.reshape(-1)
    strain = 0.0
    rule = quad_rule(2)
    for j in range(sol.mesh.n_elements):
        h = float(sol.mesh.lengths[j])
        local = disp_flat[N_DISP * j : N_DISP * j + 6]
        if sol.reduced:
            b_mem, b_shr, b_bnd = _strain_vectors(h, lam, 0.0)
            strain += h * (a_mem * (b_mem @ local) ** 2 + a_shr * (b_shr @ local) ** 2
                           + (b_bnd @ local) ** 2)
        else:
            for xi, wt in zip(rule.points, rule.weights):
                b_mem, b_shr, _ = _strain_vectors(h, lam, xi)
                strain += 0.5 * h * wt * (a_mem * (b_mem @ local) ** 2
                                          + a_shr * (b_shr @ local) ** 2)
            _, _, b_bnd = _strain_vectors(h, lam, 0.0)
            strain += h * (b_bnd @ local) ** 2
    work = float(_load_vector(config, sol.mesh) @ disp_flat)
    return 0.5 * strain - work


def fem_l2_errors(sol: FemSolution, reference, quad_order: int = 10) -> np.ndarray:
    """Relative L2 errors of (u, w, theta) against a 6-field reference."""
    rule = quad_rule(quad_order)
    err2 = np.zeros(N_DISP)
    ref2 = np.zeros(N_DISP)
    for j in range(sol.mesh.n_elements):
        a, b = sol.mesh.element(j)
        x, w = rule.map_to(a, b)
        approx = sol.evaluate_displacements(x)
        exact = np.asarray(reference(x), dtype=float)[:N_DISP]
        err2 += ((approx - exact) ** 2) @ w
        ref2 += (exact**2) @ w
    ref_norm = np.sqrt(ref2)
    denom = np.where(ref_norm < 1e-14, 1.0, ref_norm)
    return np.sqrt(err2) / denom
