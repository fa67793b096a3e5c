"""Assembly and application of the DG mass and discrete derivative operators.

Three derivative stencils are used, all stored in weak form (no inverse mass):

* ``dminus`` takes the left interface trace (the alternating flux for rho),
* ``dplus`` takes the right interface trace (for the ordinate-averaged flux),
* ``dup_pos``/``dup_neg`` are the upwind stencils for v >= 0 / v < 0; the
  velocity factor is applied per ordinate at application time.

With periodic closure dplus = -dminus^T entrywise.  With inflow closure the
matrices keep only interior-trace couplings (boundary data enters through
lift vectors supplied by the boundary module), chosen so the adjoint pair
property still holds and the Schur operator stays symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import (
    REF_MASS,
    REF_STIFFNESS,
    MaterialCoefficients,
    Mesh1D,
    VelocityQuadrature,
    basis_trace,
    check_degree,
    gauss_rule,
    legendre_vals,
    mass_diag,
)


def _block_banded(n_cells: int, d: int, diag_blocks, sub_block=None,
                  super_block=None, wrap_sub=None, wrap_super=None) -> sp.csr_matrix:
    """Assemble a block-banded (optionally cyclic) matrix from d x d blocks.

    diag_blocks is (n_cells, d, d); sub/super blocks are shared d x d stencils.
    wrap_sub goes to (0, n-1), wrap_super to (n-1, 0).
    """
    rows, cols, vals = [], [], []

    def add(ci, cj, block):
        i0, j0 = ci * d, cj * d
        ii, jj = np.nonzero(np.ones((d, d), dtype=bool))
        rows.append(i0 + ii)
        cols.append(j0 + jj)
        vals.append(np.asarray(block, dtype=float)[ii, jj])

    for c in range(n_cells):
        add(c, c, diag_blocks[c])
    if sub_block is not None:
        for c in range(1, n_cells):
            add(c, c - 1, sub_block)
    if super_block is not None:
        for c in range(n_cells - 1):
            add(c, c + 1, super_block)
    if wrap_sub is not None:
        add(0, n_cells - 1, wrap_sub)
    if wrap_super is not None:
        add(n_cells - 1, 0, wrap_super)

    n = n_cells * d
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsr()


def _weighted_mass_blocks(mesh: Mesh1D, degree: int, coeff_fn,
                          n_gauss: int) -> np.ndarray:
    """Per-cell blocks of int sigma(x) phi_i phi_j dx, shape (N, d, d)."""
    d = degree + 1
    xi, w = gauss_rule(n_gauss)
    phi = legendre_vals(xi, degree)                  # (q, d)
    x = mesh.cell_points(xi)                         # (N, q)
    sig = np.asarray(coeff_fn(x), dtype=float)
    if sig.shape != x.shape:
        sig = np.broadcast_to(sig, x.shape)
    jac = 0.5 * mesh.widths                          # dx = (h/2) dxi
    return np.einsum("nq,qi,qj->nij", sig * w[None, :] * jac[:, None], phi, phi)


class CellBlockOp:
    """Block-diagonal operator with per-cell d x d blocks.

    Application is specialized for the common cases: identically zero blocks
    and diagonal blocks (constant-in-cell coefficients under the orthogonal
    basis), which dominate the run time of long sweeps otherwise.
    """

    def __init__(self, blocks: np.ndarray):
        self.blocks = np.asarray(blocks, dtype=float)
        n, d, _ = self.blocks.shape
        self.n_cells, self.d = n, d
        scale = np.abs(self.blocks).max() if self.blocks.size else 0.0
        self.is_zero = scale == 0.0
        off = self.blocks - self.blocks * np.eye(d)[None, :, :]
        # quadrature roundoff leaves ~1e-17 dirt on off-diagonals of
        # constant-coefficient blocks; treat those as diagonal
        self.diag = None
        if not self.is_zero and np.abs(off).max() <= 1e-14 * scale:
            self.diag = self.blocks[:, np.arange(d), np.arange(d)].ravel()

    def apply(self, fields: np.ndarray) -> np.ndarray:
        """Apply to flat (..., n_cells * d) arrays."""
        if self.is_zero:
            return np.zeros_like(fields)
        if self.diag is not None:
            return self.diag * fields
        d = self.d
        shp = fields.shape
        f = fields.reshape(shp[:-1] + (self.n_cells, d))
        out = np.zeros_like(f)
        for i in range(d):
            for j in range(d):
                out[..., :, i] += self.blocks[:, i, j] * f[..., :, j]
        return out.reshape(shp)

    def to_sparse(self) -> sp.csr_matrix:
        return sp.block_diag(self.blocks, format="csr")


@dataclass
class DGOperatorSet:
    """Assembled mass/weighted-mass matrices and derivative stencils on a mesh."""

    mesh: Mesh1D
    degree: int
    mass: np.ndarray              # diagonal of M, flat (N*d,)
    mass_inv: np.ndarray
    sigma_s_blocks: np.ndarray    # (N, d, d)
    sigma_a_blocks: np.ndarray
    dminus: sp.csr_matrix         # weak-form matrices
    dplus: sp.csr_matrix
    dup_pos: sp.csr_matrix
    dup_neg: sp.csr_matrix
    lift_left: np.ndarray         # basis traces at the domain edges, flat (N*d,)
    lift_right: np.ndarray
    sigma_m_sampled: float

    @property
    def dofs(self) -> int:
        return self.mass.size

    @property
    def dofs_per_cell(self) -> int:
        return self.degree + 1

    def __post_init__(self):
        self._sigma_s_op = CellBlockOp(self.sigma_s_blocks)
        self._sigma_a_op = CellBlockOp(self.sigma_a_blocks)

    def apply_sigma_s(self, fields: np.ndarray) -> np.ndarray:
        """Weak-form Sigma_s @ fields for flat (..., N*d) arrays."""
        return self._sigma_s_op.apply(fields)

    def apply_sigma_a(self, fields: np.ndarray) -> np.ndarray:
        return self._sigma_a_op.apply(fields)

    @property
    def sigma_a_is_zero(self) -> bool:
        return self._sigma_a_op.is_zero

    def sigma_s_sparse(self) -> sp.csr_matrix:
        return sp.block_diag(self.sigma_s_blocks, format="csr")

    def sigma_a_sparse(self) -> sp.csr_matrix:
        return sp.block_diag(self.sigma_a_blocks, format="csr")


def assemble_operators(mesh: Mesh1D, degree: int,
                       coefficients: MaterialCoefficients) -> DGOperatorSet:
    """Build all operators for one (mesh, degree, coefficients) configuration."""
    check_degree(degree)
    d = degree + 1
    n = mesh.n_cells
    periodic = mesh.boundary_kind == "periodic"

    phi_l = basis_trace(degree, "left")
    phi_r = basis_trace(degree, "right")
    K = REF_STIFFNESS[:d, :d]
    rr = np.outer(phi_r, phi_r)
    ll = np.outer(phi_l, phi_l)
    lr = np.outer(phi_l, phi_r)   # row: test trace at -1, col: solution trace at +1
    rl = np.outer(phi_r, phi_l)

    # dminus: diag -K + rr (right-interface own trace), sub -lr (left neighbour)
    dm_diag = np.broadcast_to(-K + rr, (n, d, d)).copy()
    # dplus: diag -K - ll, super +rl (right neighbour)
    dp_diag = np.broadcast_to(-K - ll, (n, d, d)).copy()

    if periodic:
        dminus = _block_banded(n, d, dm_diag, sub_block=-lr, wrap_sub=-lr)
        dplus = _block_banded(n, d, dp_diag, super_block=rl, wrap_super=rl)
        dup_pos, dup_neg = dminus, dplus
    else:
        # boundary-interface fluxes that involve data are injected as lifts;
        # interior-trace boundary fluxes stay in the matrices (keeps adjointness)
        dm_open = dm_diag.copy()
        dm_open[-1] = -K                     # right-edge flux is rho_R data
        dminus = _block_banded(n, d, dm_open, sub_block=-lr)

        dp_open = dp_diag.copy()
        dp_open[-1] = -K - ll + rr           # right-edge flux takes interior trace
        dplus = _block_banded(n, d, dp_open, super_block=rl)

        up_diag = np.broadcast_to(-K + rr, (n, d, d)).copy()
        dup_pos = _block_banded(n, d, up_diag, sub_block=-lr)
        un_diag = np.broadcast_to(-K - ll, (n, d, d)).copy()
        dup_neg = _block_banded(n, d, un_diag, super_block=rl)

    sampling = degree + 3
    sig_s = _weighted_mass_blocks(mesh, degree, coefficients.sigma_s, sampling)
    sig_a = _weighted_mass_blocks(mesh, degree, coefficients.sigma_a, sampling)

    xi, _ = gauss_rule(sampling)
    samples = mesh.cell_points(xi)
    s_vals = np.broadcast_to(np.asarray(coefficients.sigma_s(samples), dtype=float),
                             samples.shape)
    a_vals = np.broadcast_to(np.asarray(coefficients.sigma_a(samples), dtype=float),
                             samples.shape)
    if s_vals.min() < 0.0 or a_vals.min() < 0.0:
        raise ValueError("sigma_s and sigma_a must be nonnegative")

    lift_l = np.zeros(n * d)
    lift_r = np.zeros(n * d)
    lift_l[:d] = phi_l
    lift_r[-d:] = phi_r

    m = mass_diag(mesh, degree)
    return DGOperatorSet(
        mesh=mesh, degree=degree,
        mass=m, mass_inv=1.0 / m,
        sigma_s_blocks=sig_s, sigma_a_blocks=sig_a,
        dminus=dminus, dplus=dplus, dup_pos=dup_pos, dup_neg=dup_neg,
        lift_left=lift_l, lift_right=lift_r,
        sigma_m_sampled=float(s_vals.min()),
    )


def velocity_average(g_fields: np.ndarray, quad: VelocityQuadrature) -> np.ndarray:
    """<g>_h = sum_l w_l g_l over the ordinate axis."""
    g_fields = np.asarray(g_fields)
    if g_fields.shape[0] != quad.n_ordinates:
        raise ValueError("one field per ordinate required")
    return quad.weights @ g_fields


def upwind_weak(ops: DGOperatorSet, g_fields: np.ndarray,
                quad: VelocityQuadrature,
                g_left=None, g_right=None) -> np.ndarray:
    """Weak form of D_up(g; v_l) for every ordinate, shape (N_v, N*d).

    g_left / g_right are per-ordinate boundary trace data (inflow case only):
    used for v >= 0 at the left edge and v < 0 at the right edge.
    """
    v = quad.nodes
    pos = v >= 0.0
    out = np.empty_like(g_fields)
    if pos.any():
        out[pos] = (ops.dup_pos @ g_fields[pos].T).T
        if g_left is not None:
            out[pos] -= np.asarray(g_left)[pos, None] * ops.lift_left[None, :]
    if (~pos).any():
        out[~pos] = (ops.dup_neg @ g_fields[~pos].T).T
        if g_right is not None:
            out[~pos] += np.asarray(g_right)[~pos, None] * ops.lift_right[None, :]
    out *= v[:, None]
    return out


def b_hv_weak(ops: DGOperatorSet, g_fields: np.ndarray, quad: VelocityQuadrature,
              g_left=None, g_right=None) -> np.ndarray:
    """Weak form of (I - Pi) D_up(g; v_l) for every ordinate, shape (N_v, N*d)."""
    up = upwind_weak(ops, g_fields, quad, g_left, g_right)
    return up - quad.weights @ up


def apply_upwind(g: np.ndarray, v: float, ops: DGOperatorSet) -> np.ndarray:
    """D_up(g; v) as a field, i.e. M^{-1} times the weak upwind form."""
    mat = ops.dup_pos if v >= 0.0 else ops.dup_neg
    return ops.mass_inv * (v * (mat @ g))


def b_hv(g_fields: np.ndarray, l: int, ops: DGOperatorSet,
         quad: VelocityQuadrature) -> np.ndarray:
    """(I - Pi) D_up(g; v_l) as a field for ordinate l."""
    weak = b_hv_weak(ops, np.asarray(g_fields), quad)
    return ops.mass_inv * weak[l]
