"""Model data for the scaled circular arch.

Scaled first-order system on (0,1) for (u, w, theta, n, q, m):

    eps^2 n - u' - lam w = 0        -n' - lam q = f_u
    mu eps^2 q - w' + lam u + theta = 0   -q' + lam n = f_w
    m - theta' = 0                  -m' - q = 0

with slenderness eps > 0, shear/axial stiffness ratio mu >= 0 and curvature
lam in (0, 2 pi).  This module holds the parameter and boundary-condition
types, the curvature-dependent stability constants, the closed-form kernel
stress fields used as test oracles, meshes and the two discrete trace norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .loads import COMPONENTS, CONJUGATE_STRESS, Expr, LoadSpec, PointLoad

TWO_PI = 2.0 * math.pi

# trace components each boundary kind pins (indices into COMPONENTS)
ESSENTIAL_MASKS = {
    "c": (0, 1, 2),  # u, w, theta
    "p": (0, 1, 5),  # u, w, m
    "s": (1, 2, 3),  # w, theta, n
    "d": (0, 4, 5),  # u, q, m
    "r": (2, 3, 4),  # theta, n, q
    "f": (3, 4, 5),  # n, q, m
}

# displacement components each kind constrains in the displacement FEM
KINEMATIC_MASKS = {
    "c": (0, 1, 2),
    "p": (0, 1),
    "s": (1, 2),
    "d": (0,),
    "r": (2,),
    "f": (),
}

_CASE_GENERAL = frozenset({"cc", "cp", "pc", "cs", "sc", "ps", "sp"})
_CASE_SD = frozenset({"sd", "ds"})
_CASE_CD = frozenset({"cd", "dc"})
_CASE_UNIT = frozenset({"cr", "rc", "cf", "fc", "pr", "rp"})


@dataclass(frozen=True)
class ArchParameters:
    """Dimensionless model parameters (slenderness, anisotropy, curvature)."""

    epsilon: float
    mu: float
    lam: float

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.mu < 0.0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if not 0.0 < self.lam < TWO_PI:
            raise ValueError(f"lambda must lie in (0, 2*pi), got {self.lam}")


@dataclass(frozen=True)
class BoundaryKind:
    """One of the six endpoint support types c, p, s, d, r, f."""

    code: str

    def __post_init__(self):
        if self.code not in ESSENTIAL_MASKS:
            raise ValueError(f"unknown boundary kind {self.code!r}; expected one of c,p,s,d,r,f")

    @property
    def essential_components(self) -> tuple:
        return ESSENTIAL_MASKS[self.code]

    @property
    def kinematic_components(self) -> tuple:
        return KINEMATIC_MASKS[self.code]


@dataclass(frozen=True)
class BcPair:
    """Boundary kinds at the left and right endpoints, e.g. code 'cf'."""

    left: BoundaryKind
    right: BoundaryKind

    @staticmethod
    def from_code(code: str) -> "BcPair":
        if not (isinstance(code, str) and len(code) == 2 and code == code.lower()):
            raise ValueError(f"bc code must be two lowercase letters, got {code!r}")
        return BcPair(BoundaryKind(code[0]), BoundaryKind(code[1]))

    @property
    def code(self) -> str:
        return self.left.code + self.right.code

    def swapped(self) -> "BcPair":
        return BcPair(self.right, self.left)


def c_n(lam: float) -> float:
    return lam**2 + (1.0 / lam + lam) ** 2


def c_q(lam: float) -> float:
    s = abs(math.sin(lam))
    return (lam + s) / (lam - s)


def c_q0(lam: float) -> float:
    s2 = math.sin(2.0 * lam)
    return (2.0 * lam - s2) / (2.0 * lam + s2)


@dataclass(frozen=True)
class StabilityReport:
    """Curvature constants and the case-resolved stability number.

    ``c_stab`` is nan when the boundary-condition code is not covered by the
    theory (regime_label == "uncovered") and +inf for the flagged sd/ds
    degeneracy at cos(lambda) = 0.
    """

    c_n: float
    c_q: float
    c_q0: float
    c_stab: float
    regime_label: str

    @property
    def covered(self) -> bool:
        return self.regime_label != "uncovered"


def stability_constants(params: ArchParameters, bc: BcPair) -> StabilityReport:
    lam = params.lam
    cn, cq, cq0 = c_n(lam), c_q(lam), c_q0(lam)
    inv_eps2 = params.epsilon**-2
    inv_mueps2 = math.inf if params.mu == 0.0 else inv_eps2 / params.mu
    code = bc.code
    if code in _CASE_GENERAL:
        c_stab = max(min(inv_eps2, cn), min(inv_mueps2, cq * cn), 1.0)
        regime = "covered-case-1"
    elif code in _CASE_SD:
        # |cos| below 1e-12 counts as the degenerate cos(lambda) = 0 case
        # (exact zero is unattainable in floating point)
        cos_lam = math.cos(lam)
        base = max(min(inv_eps2, cq0 * cn), 1.0)
        c_stab = math.inf if abs(cos_lam) <= 1e-12 else base / cos_lam**2
        regime = "covered-sd-ds"
    elif code in _CASE_CD:
        c_stab = max(min(inv_eps2, cq0 * cn), 1.0)
        regime = "covered-cd-dc"
    elif code in _CASE_UNIT:
        c_stab = 1.0
        regime = "covered-unit"
    else:
        c_stab = math.nan
        regime = "uncovered"
    return StabilityReport(cn, cq, cq0, c_stab, regime)


def eigen_bounds(lam: float) -> tuple:
    """Extreme eigenvalues (1 -+ |sin lam|/lam) of the kernel norm matrices."""
    if not 0.0 < lam < TWO_PI:
        raise ValueError(f"lambda must lie in (0, 2*pi), got {lam}")
    t = abs(math.sin(lam)) / lam
    return (1.0 - t, 1.0 + t)


def extremal_kernel_direction(lam: float) -> tuple:
    """(n0, q0) maximizing ||q||^2 / ||n||^2 over kernel fields.

    This is the eigenvector of Lambda_n for its smallest eigenvalue; the
    ratio along it equals C_q(lambda) exactly.
    """
    s2 = math.sin(2.0 * lam) / (2.0 * lam)
    ss = math.sin(lam) ** 2 / lam
    t = abs(math.sin(lam)) / lam
    v = np.array([ss, s2 + t])
    nrm = math.hypot(*v)
    if nrm == 0.0:  # lam = pi: both matrices are the identity
        return (1.0, 0.0)
    return (v[0] / nrm, v[1] / nrm)


@dataclass(frozen=True)
class KernelField:
    """Stress field in the kernel of the equilibrium operator.

    n(x) = n0 cos(lam x) - q0 sin(lam x)
    q(x) = q0 cos(lam x) + n0 sin(lam x)
    m(x) = m0 + (n(x) - n0) / lam
    """

    n0: float
    q0: float
    m0: float
    lam: float


def kernel_evaluate(k: KernelField, x) -> tuple:
    x = np.asarray(x, dtype=float)
    c, s = np.cos(k.lam * x), np.sin(k.lam * x)
    n = k.n0 * c - k.q0 * s
    q = k.q0 * c + k.n0 * s
    m = k.m0 + (n - k.n0) / k.lam
    return n, q, m


def kernel_norm_matrices(lam: float) -> tuple:
    """The 2x2 matrices Lambda_n, Lambda_q of the kernel L2 norms."""
    s2 = math.sin(2.0 * lam) / (2.0 * lam)
    ss = math.sin(lam) ** 2 / lam
    lam_n = np.array([[1.0 + s2, -ss], [-ss, 1.0 - s2]])
    lam_q = np.array([[1.0 - s2, ss], [ss, 1.0 + s2]])
    return lam_n, lam_q


def kernel_l2_norms(k: KernelField) -> tuple:
    """Closed-form (||n||^2, ||q||^2) over (0,1)."""
    lam_n, lam_q = kernel_norm_matrices(k.lam)
    v = np.array([k.n0, k.q0])
    return 0.5 * float(v @ lam_n @ v), 0.5 * float(v @ lam_q @ v)


@dataclass(frozen=True)
class Mesh:
    """Partition of [0,1] into N elements by strictly increasing nodes."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("mesh needs at least two nodes")
        if abs(nodes[0]) > 1e-14 or abs(nodes[-1] - 1.0) > 1e-14:
            raise ValueError("mesh must span [0, 1]")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("mesh nodes must be strictly increasing")

    @staticmethod
    def uniform(n_elements: int) -> "Mesh":
        if n_elements < 1:
            raise ValueError("need at least one element")
        return Mesh(np.linspace(0.0, 1.0, n_elements + 1))

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def element(self, j: int) -> tuple:
        return float(self.nodes[j]), float(self.nodes[j + 1])

    def locate(self, x) -> np.ndarray:
        """Element index containing each point (right-closed at x = 1)."""
        idx = np.searchsorted(self.nodes, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)


def trace_norm_gamma(hat_z, mesh: Mesh) -> float:
    """Discrete trace norm: elementwise h/3-weighted mean-square + jump term."""
    z = np.asarray(hat_z, dtype=float)
    if z.shape != (mesh.n_elements + 1,):
        raise ValueError(f"expected {mesh.n_elements + 1} trace values, got {z.shape}")
    h = mesh.lengths
    z0, z1 = z[:-1], z[1:]
    total = np.sum(h / 3.0 * (z0**2 + z0 * z1 + z1**2) + (z0 - z1) ** 2 / h)
    return math.sqrt(total)


def trace_norm_minimal_extension(hat_z, mesh: Mesh) -> float:
    """Exact minimal broken-H1 extension norm of nodal values.

    The per-element minimizer solves -z'' + z = 0, giving the energy
    ((z0^2 + z1^2) cosh h - 2 z0 z1) / sinh h.
    """
    z = np.asarray(hat_z, dtype=float)
    if z.shape != (mesh.n_elements + 1,):
        raise ValueError(f"expected {mesh.n_elements + 1} trace values, got {z.shape}")
    h = mesh.lengths
    z0, z1 = z[:-1], z[1:]
    total = np.sum(((z0**2 + z1**2) * np.cosh(h) - 2.0 * z0 * z1) / np.sinh(h))
    return math.sqrt(max(total, 0.0))


@dataclass(frozen=True)
class ArchConfig:
    """A complete problem statement: parameters, supports and loading.

    ``trace_values`` optionally prescribes nonzero values for essential trace
    components, keyed by (endpoint, component name); unset entries are zero.
    """

    params: ArchParameters
    bc: BcPair
    load: LoadSpec = field(default_factory=LoadSpec)
    trace_values: tuple = ()

    def __post_init__(self):
        for (endpoint, comp), _ in self.trace_values:
            if endpoint not in (0, 1):
                raise ValueError("trace values are prescribed at endpoints 0 and 1 only")
            if comp not in COMPONENTS:
                raise ValueError(f"unknown trace component {comp!r}")
            kind = self.bc.left if endpoint == 0 else self.bc.right
            if COMPONENTS.index(comp) not in kind.essential_components:
                raise ValueError(
                    f"component {comp!r} is not essential at endpoint {endpoint} "
                    f"for boundary kind {kind.code!r}"
                )

    def trace_value_map(self) -> dict:
        return {key: val for key, val in self.trace_values}


# sign of each field under the reflection x -> 1-x (u, theta, q flip)
MIRROR_SIGNS = np.array([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0])


def mirror_problem(config: ArchConfig) -> ArchConfig:
    """Reflected problem: BC pair swapped, loads pulled back through x -> 1-x.

    If fields(x) solve the original problem, then
    MIRROR_SIGNS * fields(1-x) solve the mirrored one.
    """
    signs = {comp: MIRROR_SIGNS[i] for i, comp in enumerate(COMPONENTS)}
    values = tuple(
        ((1 - endpoint, comp), signs[comp] * val) for (endpoint, comp), val in config.trace_values
    )
    return ArchConfig(
        params=config.params,
        bc=config.bc.swapped(),
        load=config.load.mirrored(),
        trace_values=values,
    )
