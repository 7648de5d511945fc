"""Planar Timoshenko beam model of a monopile-supported wind turbine.

The monopile and tower are treated as one tubular beam running from the pile
toe (axial coordinate ``z = 0``) to the tower top.  The embedded part rests on
a Winkler foundation: distributed lateral (p-y) springs of constant stiffness
per unit length plus one axial (q-z) spring at the toe.  Scour removes the
springs from the top ``scour_depth`` metres of the embedded length.

Each node carries three DOFs, ordered ``(u, w, theta)``: axial displacement,
lateral displacement and cross-section rotation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

DOFS_PER_NODE = 3
AXIAL, LATERAL, ROTATION = 0, 1, 2
# relative to the largest eigenvalue; 0.1 m elements put lambda_max near 1e10
RIGID_TOL = 1e-12

# 4-point Gauss-Legendre on [0, 1]; exact for the degree-6 products of cubic shape functions
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


class InvalidGeometryError(ValueError):
    pass


class Environment(str, enum.Enum):
    EMBEDDED = "embedded"
    SUBMERGED = "submerged"
    AIR = "air"


class ModeKind(str, enum.Enum):
    BENDING = "bending"
    AXIAL = "axial"
    RIGID_BODY = "rigid_body"


@dataclass(frozen=True)
class Material:
    youngs_modulus: float
    shear_modulus: float
    density: float

    def __post_init__(self):
        if min(self.youngs_modulus, self.shear_modulus, self.density) <= 0:
            raise InvalidGeometryError("material constants must be strictly positive")
        if self.shear_modulus >= self.youngs_modulus:
            raise InvalidGeometryError("shear modulus must be smaller than Young's modulus")

    @property
    def poisson_ratio(self) -> float:
        return self.youngs_modulus / (2.0 * self.shear_modulus) - 1.0


@dataclass(frozen=True)
class TubularSegment:
    length: float
    outer_diameter_bottom: float
    outer_diameter_top: float
    wall_thickness: float
    material: Material
    environment: Environment = Environment.AIR

    def __post_init__(self):
        object.__setattr__(self, "environment", Environment(self.environment))
        if not self.length > 0:
            raise InvalidGeometryError(f"segment length must be positive, got {self.length}")
        if self.wall_thickness <= 0:
            raise InvalidGeometryError("wall thickness must be positive")
        if self.wall_thickness >= 0.5 * min(self.outer_diameter_bottom, self.outer_diameter_top):
            raise InvalidGeometryError("wall thickness must be below half the outer diameter")

    def diameter_at(self, s: float) -> float:
        """Outer diameter at distance ``s`` from the segment bottom."""
        t = s / self.length
        return (1.0 - t) * self.outer_diameter_bottom + t * self.outer_diameter_top


@dataclass(frozen=True)
class TurbineGeometry:
    segments: tuple[TubularSegment, ...]
    tip_mass: float = 0.0
    water_density: float = 1025.0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise InvalidGeometryError("geometry needs at least one segment")
        if self.tip_mass < 0:
            raise InvalidGeometryError("tip mass must be non-negative")
        order = {Environment.EMBEDDED: 0, Environment.SUBMERGED: 1, Environment.AIR: 2}
        ranks = [order[s.environment] for s in self.segments]
        if ranks != sorted(ranks):
            raise InvalidGeometryError(
                "segments must run embedded -> submerged -> air from the base upwards")

    @property
    def embedded_length(self) -> float:
        return sum(s.length for s in self.segments if s.environment is Environment.EMBEDDED)

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)


@dataclass(frozen=True)
class FoundationModel:
    lateral_stiffness: float = 2.5e7  # N/m per m of embedded length
    base_axial_stiffness: float = 1e9  # N/m

    def __post_init__(self):
        if self.lateral_stiffness < 0 or self.base_axial_stiffness < 0:
            raise InvalidGeometryError("spring stiffnesses must be non-negative")


@dataclass(frozen=True)
class TurbineModel:
    """Everything needed to assemble the global matrices for one structure.

    ``eigen_solver`` selects between the dense Cholesky reduction and a sparse
    shift-invert Lanczos solve; both return the same lowest modes.
    """

    geometry: TurbineGeometry
    foundation: FoundationModel = field(default_factory=FoundationModel)
    target_element_length: float = 1.0
    embedded_element_length: float = 0.1
    added_mass_coefficient: float = 1.0
    rotary_inertia: bool = True
    shear_stiffness_scale: float = 1.0
    clamped_base: bool = False
    eigen_solver: str = "sparse"

    def with_foundation(self, **kwargs) -> "TurbineModel":
        return replace(self, foundation=replace(self.foundation, **kwargs))


@dataclass(frozen=True)
class Section:
    outer_diameter: float
    wall_thickness: float
    material: Material

    def __post_init__(self):
        if self.wall_thickness <= 0 or self.wall_thickness >= 0.5 * self.outer_diameter:
            raise InvalidGeometryError(
                f"degenerate tube: D={self.outer_diameter}, t={self.wall_thickness}")

    @property
    def inner_diameter(self) -> float:
        return self.outer_diameter - 2.0 * self.wall_thickness

    @property
    def area(self) -> float:
        return math.pi / 4.0 * (self.outer_diameter**2 - self.inner_diameter**2)

    @property
    def second_moment(self) -> float:
        return math.pi / 64.0 * (self.outer_diameter**4 - self.inner_diameter**4)


@dataclass(frozen=True)
class Element:
    z_bottom: float
    length: float
    section: Section
    environment: Environment
    added_mass: float = 0.0  # kg/m, lateral only


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray
    elements: tuple[Element, ...]
    mudline: float  # z coordinate of the seabed

    @property
    def n_dof(self) -> int:
        return DOFS_PER_NODE * len(self.nodes)

    def dof(self, node: int, kind: int) -> int:
        return DOFS_PER_NODE * node + kind


@dataclass(frozen=True)
class ModalResult:
    frequencies: np.ndarray  # Hz, ascending
    eigenvalues: np.ndarray  # (rad/s)^2
    mode_shapes: np.ndarray  # columns, mass-normalised
    kinds: tuple[ModeKind, ...]

    def first(self, kind: ModeKind = ModeKind.BENDING) -> float:
        for f, k in zip(self.frequencies, self.kinds):
            if k is kind:
                return float(f)
        raise LookupError(f"no {kind.value} mode among the {len(self.kinds)} computed")


# --------------------------------------------------------------------------
# element level
# --------------------------------------------------------------------------

def shear_coefficient(section: Section) -> float:
    """Cowper's shear coefficient for a hollow circular section."""
    nu = section.material.poisson_ratio
    m = section.inner_diameter / section.outer_diameter
    m2 = m * m
    a = (1.0 + m2) ** 2
    return 6.0 * (1.0 + nu) * a / ((7.0 + 6.0 * nu) * a + (20.0 + 12.0 * nu) * m2)


def shear_parameter(section: Section, length: float, shear_scale: float = 1.0) -> float:
    """Phi = 12 EI / (kappa G A L^2)."""
    mat = section.material
    kga = shear_coefficient(section) * mat.shear_modulus * section.area * shear_scale
    return 12.0 * mat.youngs_modulus * section.second_moment / (kga * length**2)


def shape_functions(xi, length: float, phi: float):
    """Interdependent Timoshenko interpolation at ``xi = x / L``.

    Returns ``(n_w, n_theta)`` with trailing axis over ``(w1, theta1, w2, theta2)``.
    At ``phi = 0`` these reduce to Hermite cubics and ``n_theta = d n_w / dx``.
    """
    xi = np.asarray(xi, dtype=float)
    L, c = length, 1.0 / (1.0 + phi)
    xi2, xi3 = xi * xi, xi * xi * xi
    n_w = np.stack([
        c * (2 * xi3 - 3 * xi2 - phi * xi + 1 + phi),
        c * L * (xi3 - (2 + phi / 2) * xi2 + (1 + phi / 2) * xi),
        c * (-2 * xi3 + 3 * xi2 + phi * xi),
        c * L * (xi3 - (1 - phi / 2) * xi2 - (phi / 2) * xi),
    ], axis=-1)
    n_t = np.stack([
        c * 6.0 / L * (xi2 - xi),
        c * (3 * xi2 - (4 + phi) * xi + 1 + phi),
        -c * 6.0 / L * (xi2 - xi),
        c * (3 * xi2 - (2 - phi) * xi),
    ], axis=-1)
    return n_w, n_t


def _integrate_outer(fn_values, weights):
    # sum_g w_g * N_g^T N_g, symmetrised so assembly stays exactly symmetric
    out = np.einsum("g,gi,gj->ij", weights, fn_values, fn_values)
    return 0.5 * (out + out.T)


_LAT = [1, 2, 4, 5]  # lateral/rotation entries of the local 6-vector
_AX = [0, 3]


def timoshenko_element_matrices(element: Element, rotary_inertia: bool = True,
                                shear_scale: float = 1.0):
    """Local stiffness and consistent mass, DOF order ``(u1, w1, th1, u2, w2, th2)``."""
    sec, L = element.section, element.length
    A, I = sec.area, sec.second_moment
    if A <= 0 or I <= 0 or L <= 0:
        raise InvalidGeometryError("element needs positive area, inertia and length")
    E, rho = sec.material.youngs_modulus, sec.material.density
    phi = shear_parameter(sec, L, shear_scale)

    ke = np.zeros((6, 6))
    ke[np.ix_(_AX, _AX)] = E * A / L * np.array([[1.0, -1.0], [-1.0, 1.0]])
    kb = np.array([
        [12.0, 6 * L, -12.0, 6 * L],
        [6 * L, (4 + phi) * L**2, -6 * L, (2 - phi) * L**2],
        [-12.0, -6 * L, 12.0, -6 * L],
        [6 * L, (2 - phi) * L**2, -6 * L, (4 + phi) * L**2],
    ])
    ke[np.ix_(_LAT, _LAT)] = E * I / ((1 + phi) * L**3) * kb

    me = np.zeros((6, 6))
    me[np.ix_(_AX, _AX)] = rho * A * L / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    n_w, n_t = shape_functions(_GAUSS_X, L, phi)
    m_lat = rho * A + element.added_mass
    mb = m_lat * L * _integrate_outer(n_w, _GAUSS_W)
    if rotary_inertia:
        mb = mb + rho * I * L * _integrate_outer(n_t, _GAUSS_W)
    me[np.ix_(_LAT, _LAT)] = mb
    return ke, me


def added_mass_per_length(section: Section, water_density: float,
                          environment: Environment = Environment.SUBMERGED,
                          coefficient: float = 1.0) -> float:
    """Hydrodynamic added mass per unit length of a submerged cylinder."""
    if Environment(environment) is not Environment.SUBMERGED:
        return 0.0
    return coefficient * water_density * math.pi * (0.5 * section.outer_diameter) ** 2


def distributed_spring_matrix(k_s: float, element: Element, coverage,
                              shear_scale: float = 1.0) -> np.ndarray:
    """Winkler spring matrix ``k_s * int N_w^T N_w dx`` over ``coverage = (a, b)``.

    ``coverage`` is in local element coordinates, ``0 <= a <= b <= L``.
    """
    L = element.length
    a, b = coverage
    tol = 1e-12 * L
    if a < -tol or b > L + tol or a > b + tol:
        raise ValueError(f"coverage {coverage} outside element of length {L}")
    out = np.zeros((6, 6))
    a, b = max(a, 0.0), min(b, L)
    if k_s == 0 or b <= a:
        return out
    phi = shear_parameter(element.section, L, shear_scale)
    xi = (a + (b - a) * _GAUSS_X) / L
    n_w, _ = shape_functions(xi, L, phi)
    out[np.ix_(_LAT, _LAT)] = k_s * (b - a) * _integrate_outer(n_w, _GAUSS_W)
    return out


# --------------------------------------------------------------------------
# mesh and assembly
# --------------------------------------------------------------------------

def build_mesh(geometry: TurbineGeometry, target_element_length: float = 1.0,
               embedded_element_length: float = 0.1,
               added_mass_coefficient: float = 1.0) -> Mesh:
    if target_element_length <= 0 or embedded_element_length <= 0:
        raise ValueError("element lengths must be positive")
    nodes = [0.0]
    elements = []
    z0 = 0.0
    for seg in geometry.segments:
        if not seg.length > 0:
            raise InvalidGeometryError("zero-length segment")
        h = target_element_length
        if seg.environment is Environment.EMBEDDED:
            h = min(h, embedded_element_length)
        # tolerance keeps 36 / 0.1 from rounding up to 361
        n = max(1, math.ceil(seg.length / h - 1e-9))
        local = np.linspace(0.0, seg.length, n + 1)
        for i in range(n):
            s_mid = 0.5 * (local[i] + local[i + 1])
            sec = Section(seg.diameter_at(s_mid), seg.wall_thickness, seg.material)
            am = added_mass_per_length(sec, geometry.water_density, seg.environment,
                                       added_mass_coefficient)
            elements.append(Element(z0 + local[i], local[i + 1] - local[i], sec,
                                    seg.environment, am))
            nodes.append(z0 + local[i + 1])
        z0 += seg.length
    return Mesh(np.array(nodes), tuple(elements), geometry.embedded_length)


@lru_cache(maxsize=8)
def model_mesh(model: TurbineModel) -> Mesh:
    return build_mesh(model.geometry, model.target_element_length,
                      model.embedded_element_length, model.added_mass_coefficient)


def _element_dofs(i: int) -> np.ndarray:
    return np.arange(DOFS_PER_NODE * i, DOFS_PER_NODE * (i + 2))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=8)
def _structural_matrices(model: TurbineModel):
    """K and M without the p-y springs (those depend on k_s and scour)."""
    mesh = model_mesh(model)
    n = mesh.n_dof
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for i, el in enumerate(mesh.elements):
        ke, me = timoshenko_element_matrices(el, model.rotary_inertia,
                                             model.shear_stiffness_scale)
        idx = _element_dofs(i)
        K[np.ix_(idx, idx)] += ke
        M[np.ix_(idx, idx)] += me
    K[AXIAL, AXIAL] += model.foundation.base_axial_stiffness
    top = len(mesh.nodes) - 1
    for kind in (AXIAL, LATERAL):
        M[mesh.dof(top, kind), mesh.dof(top, kind)] += model.geometry.tip_mass
    return _frozen(K), _frozen(M)


@lru_cache(maxsize=64)
def _unit_spring_matrix(model: TurbineModel, scour_depth: float) -> np.ndarray:
    mesh = model_mesh(model)
    n = mesh.n_dof
    S = np.zeros((n, n))
    z_top = mesh.mudline - scour_depth  # springs act on [0, z_top]
    for i, el in enumerate(mesh.elements):
        if el.environment is not Environment.EMBEDDED or el.z_bottom >= z_top:
            continue
        cover = (0.0, min(el.length, z_top - el.z_bottom))
        idx = _element_dofs(i)
        S[np.ix_(idx, idx)] += distributed_spring_matrix(1.0, el, cover,
                                                         model.shear_stiffness_scale)
    return _frozen(S)


def assemble(model: TurbineModel, k_s: float | None = None, scour_depth: float = 0.0):
    """Global ``(K, M)`` for lateral spring stiffness ``k_s`` and a scour depth.

    The structure is softly supported: no DOFs are removed unless
    ``model.clamped_base`` is set, in which case the toe node is fixed and its
    three DOFs are dropped from the returned matrices.
    """
    k_s, scour_depth = _check_inputs(model, k_s, scour_depth)
    K0, M = _structural_matrices(model)
    K = K0 + k_s * _unit_spring_matrix(model, scour_depth)
    M = M.copy()
    if model.clamped_base:
        K, M = K[DOFS_PER_NODE:, DOFS_PER_NODE:], M[DOFS_PER_NODE:, DOFS_PER_NODE:]
    return K, M


# --------------------------------------------------------------------------
# eigen solution
# --------------------------------------------------------------------------

def _classify(lam, vecs, M, lam_scale, dof_kinds):
    axial = np.where(dof_kinds == AXIAL, 1.0, 0.0)
    kinds = []
    for j in range(len(lam)):
        if lam[j] < RIGID_TOL * lam_scale:
            kinds.append(ModeKind.RIGID_BODY)
            continue
        v = vecs[:, j] * axial
        # M has no axial/lateral coupling, so this is the axial share of phi^T M phi = 1
        frac = float(v @ (M @ v))
        kinds.append(ModeKind.AXIAL if frac > 0.5 else ModeKind.BENDING)
    return tuple(kinds)


def solve_modes(K, M, n_modes: int = 6, method: str = "dense", shift: float = -1.0,
                dof_kinds=None) -> ModalResult:
    """Lowest ``n_modes`` of ``K phi = lam M phi``.

    ``method="dense"`` reduces to a standard symmetric problem through the
    Cholesky factor of M; ``method="sparse"`` uses shift-invert Lanczos about
    ``shift`` (rad^2/s^2), which must lie below the lowest eigenvalue.
    Either method accepts dense arrays or scipy sparse matrices.
    """
    n = K.shape[0]
    if not 1 <= n_modes <= n:
        raise ValueError(f"n_modes={n_modes} outside [1, {n}]")
    if dof_kinds is None:
        dof_kinds = np.arange(n) % DOFS_PER_NODE
    dof_kinds = np.asarray(dof_kinds)
    if method == "sparse" and n_modes >= n - 1:
        method = "dense"

    if method == "dense":
        K = K.toarray() if scipy.sparse.issparse(K) else np.asarray(K, dtype=float)
        M = M.toarray() if scipy.sparse.issparse(M) else np.asarray(M, dtype=float)
        try:
            L = scipy.linalg.cholesky(M, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("mass matrix is not positive definite") from exc
        X = scipy.linalg.solve_triangular(L, K, lower=True)
        A = scipy.linalg.solve_triangular(L, X.T, lower=True)
        A = 0.5 * (A + A.T)
        lam, y = scipy.linalg.eigh(A, subset_by_index=[0, n_modes - 1])
        vecs = scipy.linalg.solve_triangular(L, y, lower=True, trans="T")
        # the reduction carries absolute error ~eps*lambda_max; the Rayleigh
        # quotient of the recovered vectors is accurate to second order
        lam = np.einsum("ij,ij->j", vecs, K @ vecs) / np.einsum("ij,ij->j", vecs, M @ vecs)
    elif method == "sparse":
        K = scipy.sparse.csc_matrix(K)
        M = scipy.sparse.csc_matrix(M)
        # fixed start vector keeps ARPACK deterministic
        v0 = np.ones(n) / math.sqrt(n)
        lam, vecs = scipy.sparse.linalg.eigsh(K, k=n_modes, M=M, sigma=shift,
                                              which="LM", v0=v0, tol=1e-14)
        order = np.argsort(lam)
        lam, vecs = lam[order], vecs[:, order]
    else:
        raise ValueError(f"unknown eigen method {method!r}")

    norms = np.sqrt(np.einsum("ij,ij->j", vecs, M @ vecs))
    vecs = vecs / norms
    # sign convention: largest component positive
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            vecs[:, j] = -col
    # Rayleigh quotients of unit vectors: a cheap lower bound on lambda_max
    diag_k = K.diagonal() if scipy.sparse.issparse(K) else np.diag(K)
    diag_m = M.diagonal() if scipy.sparse.issparse(M) else np.diag(M)
    lam_scale = float(np.max(diag_k / diag_m))
    kinds = _classify(lam, vecs, M, lam_scale, dof_kinds)
    freqs = np.sqrt(np.clip(lam, 0.0, None)) / (2.0 * math.pi)
    return ModalResult(freqs, lam, vecs, kinds)


@lru_cache(maxsize=8)
def _sparse_structural(model: TurbineModel):
    K0, M = _structural_matrices(model)
    return scipy.sparse.csc_matrix(K0), scipy.sparse.csc_matrix(M)


@lru_cache(maxsize=64)
def _sparse_spring(model: TurbineModel, scour_depth: float):
    return scipy.sparse.csc_matrix(_unit_spring_matrix(model, scour_depth))


def _check_inputs(model, k_s, scour_depth):
    if k_s is None:
        k_s = model.foundation.lateral_stiffness
    if not np.isfinite(k_s) or k_s < 0:
        raise ValueError(f"lateral stiffness must be finite and non-negative, got {k_s}")
    emb = model.geometry.embedded_length
    if not 0.0 <= scour_depth <= emb + 1e-12:
        raise ValueError(f"scour depth {scour_depth} outside [0, {emb}]")
    return float(k_s), float(scour_depth)


def modal_analysis(model: TurbineModel, k_s: float | None = None, scour_depth: float = 0.0,
                   n_modes: int = 6) -> ModalResult:
    if model.eigen_solver == "dense":
        K, M = assemble(model, k_s, scour_depth)
        return solve_modes(K, M, n_modes, method="dense")
    k_s, scour_depth = _check_inputs(model, k_s, scour_depth)
    K0, M = _sparse_structural(model)
    K = K0 + k_s * _sparse_spring(model, scour_depth)
    if model.clamped_base:
        K, M = K[DOFS_PER_NODE:, DOFS_PER_NODE:], M[DOFS_PER_NODE:, DOFS_PER_NODE:]
    return solve_modes(K, M, n_modes, method=model.eigen_solver)


def first_bending_frequency(model: TurbineModel, k_s: float | None = None,
                            scour_depth: float = 0.0) -> float:
    """First bending natural frequency in Hz, straight from the FE model."""
    return modal_analysis(model, k_s, scour_depth, n_modes=4).first(ModeKind.BENDING)
