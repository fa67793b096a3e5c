"""Meshes, Legendre bases, velocity quadratures, material data, and solution state.

Fields are stored cell-major as flat numpy arrays of length n_cells *
dofs_per_cell, holding modal coefficients in the unnormalized Legendre basis
phi_0 = 1, phi_1 = xi, phi_2 = (3 xi^2 - 1)/2 on the reference cell [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MAX_DEGREE = 2

# Reference-cell mass (1/2) * int phi_i phi_j dxi is diagonal for this basis.
REF_MASS = np.array([1.0, 1.0 / 3.0, 1.0 / 5.0])

# K[i, j] = int_{-1}^{1} phi_j(xi) phi_i'(xi) dxi  (solution index j, test index i)
REF_STIFFNESS = np.array([
    [0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0],
    [0.0, 2.0, 0.0],
])


def legendre_vals(xi, degree: int) -> np.ndarray:
    """Values of phi_0..phi_degree at points xi, shape (len(xi), degree+1)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    cols = [np.ones_like(xi)]
    if degree >= 1:
        cols.append(xi)
    if degree >= 2:
        cols.append(0.5 * (3.0 * xi * xi - 1.0))
    return np.stack(cols, axis=-1)


def basis_trace(degree: int, side: str) -> np.ndarray:
    """phi values at the cell endpoint, side in {'left', 'right'}."""
    xi = -1.0 if side == "left" else 1.0
    return legendre_vals(np.array([xi]), degree)[0]


def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


def check_degree(degree: int) -> int:
    if degree not in (0, 1, 2):
        raise ValueError(f"polynomial degree must be 0, 1 or 2, got {degree}")
    return degree


@dataclass(frozen=True)
class Mesh1D:
    """Partition of [x_left, x_right] into cells; periodic or inflow in x."""

    edges: np.ndarray
    boundary_kind: str = "periodic"

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "edges", edges)
        if edges.ndim != 1 or edges.size < 3:
            raise ValueError("mesh needs at least 2 cells")
        if not np.all(np.diff(edges) > 0.0):
            raise ValueError("mesh edges must be strictly increasing")
        if self.boundary_kind not in ("periodic", "inflow"):
            raise ValueError(f"unknown boundary kind {self.boundary_kind!r}")

    @classmethod
    def uniform(cls, x_left: float, x_right: float, n: int,
                boundary_kind: str = "periodic") -> "Mesh1D":
        if n < 2:
            raise ValueError("need n >= 2 cells")
        return cls(np.linspace(x_left, x_right, n + 1), boundary_kind)

    @classmethod
    def from_segments(cls, segments: Sequence[tuple[float, float, int]],
                      boundary_kind: str = "periodic") -> "Mesh1D":
        """Piecewise-uniform mesh from (x0, x1, n_cells) segments."""
        edges = [float(segments[0][0])]
        for x0, x1, n in segments:
            if abs(x0 - edges[-1]) > 1e-14 * max(1.0, abs(x0)):
                raise ValueError("segments must be contiguous")
            edges.extend(np.linspace(x0, x1, n + 1)[1:])
        return cls(np.asarray(edges), boundary_kind)

    @property
    def n_cells(self) -> int:
        return self.edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def h_max(self) -> float:
        return float(self.widths.max())

    @property
    def h_min(self) -> float:
        return float(self.widths.min())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def x_left(self) -> float:
        return float(self.edges[0])

    @property
    def x_right(self) -> float:
        return float(self.edges[-1])

    def cell_points(self, xi: np.ndarray) -> np.ndarray:
        """Map reference points xi in [-1,1] to every cell, shape (n_cells, len(xi))."""
        xi = np.asarray(xi, dtype=float)
        return self.centers[:, None] + 0.5 * self.widths[:, None] * xi[None, :]


@dataclass(frozen=True)
class VelocityQuadrature:
    """Discrete ordinates {v_l, w_l} with sum(w) = 1 and exact second moment."""

    nodes: np.ndarray
    weights: np.ndarray
    v_sq_exact: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes/weights must be matching 1d arrays")
        if abs(weights.sum() - 1.0) > 1e-13:
            raise ValueError("ordinate weights must sum to 1")
        # zero-mean projections of odd data need a node mirror with equal weight
        order = np.argsort(nodes)
        v, w = nodes[order], weights[order]
        if not (np.allclose(v, -v[::-1], atol=1e-14) and
                np.allclose(w, w[::-1], atol=1e-14)):
            raise ValueError("ordinates must be symmetric about v = 0")

    @classmethod
    def slab(cls, n: int = 16) -> "VelocityQuadrature":
        """Gauss-Legendre ordinates on [-1,1] under the normalized measure dv/2."""
        v, w = gauss_rule(n)
        return cls(v, 0.5 * w, 1.0 / 3.0)

    @classmethod
    def telegraph(cls) -> "VelocityQuadrature":
        """Two-speed model: v in {-1, +1} with weights 1/2."""
        return cls(np.array([-1.0, 1.0]), np.array([0.5, 0.5]), 1.0)

    @property
    def n_ordinates(self) -> int:
        return self.nodes.size

    @property
    def v_inf(self) -> float:
        return float(np.abs(self.nodes).max())

    @property
    def v_sq_discrete(self) -> float:
        return float(np.sum(self.weights * self.nodes ** 2))


def _zero_coefficient(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class MaterialCoefficients:
    """Scattering/absorption coefficients, isotropic source, and Knudsen number."""

    sigma_s: Callable[[np.ndarray], np.ndarray]
    sigma_a: Callable[[np.ndarray], np.ndarray]
    epsilon: float
    source: Callable[[np.ndarray], np.ndarray] = field(default=_zero_coefficient)
    sigma_m: float | None = None  # declared lower bound of sigma_s; sampled if None

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


@dataclass
class KineticState:
    """Macroscopic density rho and per-ordinate micro parts g at time t."""

    rho: np.ndarray           # (n_cells * dofs,)
    g: np.ndarray             # (n_ordinates, n_cells * dofs)
    t: float = 0.0

    def copy(self) -> "KineticState":
        return KineticState(self.rho.copy(), self.g.copy(), self.t)

    def g_mean(self, quad: VelocityQuadrature) -> np.ndarray:
        """Ordinate average <g>_h as a field; zero for valid states."""
        return quad.weights @ self.g


def mass_diag(mesh: Mesh1D, degree: int) -> np.ndarray:
    """Diagonal of the DG mass matrix, flat (n_cells * dofs,)."""
    d = degree + 1
    return (mesh.widths[:, None] * REF_MASS[None, :d]).ravel()


def project_function(f: Callable[[np.ndarray], np.ndarray], mesh: Mesh1D,
                     degree: int, n_gauss: int | None = None) -> np.ndarray:
    """Per-cell L2 projection of f onto the modal basis.

    Uses a Gauss rule with degree+3 points per cell unless overridden; exact
    for the polynomial data used in the shipped experiments.
    """
    check_degree(degree)
    d = degree + 1
    npts = n_gauss if n_gauss is not None else degree + 3
    xi, w = gauss_rule(npts)
    phi = legendre_vals(xi, degree)                    # (npts, d)
    x = mesh.cell_points(xi)                           # (N, npts)
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    # coef_m = (2m+1)/2 * sum_q w_q f(x_q) phi_m(xi_q)
    scale = (2.0 * np.arange(d) + 1.0) / 2.0
    coefs = np.einsum("nq,qm->nm", fx * w[None, :], phi) * scale[None, :]
    return coefs.ravel()


def project_initial(rho0: Callable[[np.ndarray], np.ndarray],
                    g0: Callable[[np.ndarray, float], np.ndarray],
                    mesh: Mesh1D, degree: int, quad: VelocityQuadrature,
                    n_gauss: int | None = None) -> KineticState:
    """L2-project initial data (rho0(x), g0(x, v)) onto the DG space."""
    rho = project_function(rho0, mesh, degree, n_gauss)
    g = np.stack([project_function(lambda x, v=v: g0(x, v), mesh, degree, n_gauss)
                  for v in quad.nodes])
    return KineticState(rho, g, 0.0)


def field_values(coef: np.ndarray, mesh: Mesh1D, degree: int,
                 xi: np.ndarray) -> np.ndarray:
    """Evaluate a field at reference points xi in every cell, shape (N, len(xi))."""
    d = degree + 1
    phi = legendre_vals(xi, degree)                    # (npts, d)
    return coef.reshape(mesh.n_cells, d) @ phi.T


def trace_left_boundary(coef: np.ndarray, degree: int) -> float:
    """Interior trace at the left domain edge, x_{1/2}^+."""
    d = degree + 1
    return float(coef[:d] @ basis_trace(degree, "left"))


def trace_right_boundary(coef: np.ndarray, degree: int) -> float:
    """Interior trace at the right domain edge, x_{N+1/2}^-."""
    d = degree + 1
    return float(coef[-d:] @ basis_trace(degree, "right"))


def l2_norm(coef: np.ndarray, mesh: Mesh1D, degree: int) -> float:
    """L2(Omega_x) norm of a DG field from its modal coefficients."""
    return float(np.sqrt(np.sum(mass_diag(mesh, degree) * coef * coef)))


def total_mass(coef: np.ndarray, mesh: Mesh1D, degree: int) -> float:
    """Integral of the field over the domain (only the mean modes contribute)."""
    d = degree + 1
    return float(mesh.widths @ coef.reshape(mesh.n_cells, d)[:, 0])
