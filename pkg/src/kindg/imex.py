"""Globally stiffly accurate IMEX-RK tableaus of ARS type and the stage loop.

The implicit part advances the stiff relaxation and the rho/g coupling; the
(I - Pi) upwind transport of g is explicit.  Each implicit stage reduces to
one prepared Schur solve because the nonzero implicit diagonal entries of the
shipped tableaus all coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import (
    BoundaryValues,
    InflowData,
    boundary_values_from_state,
    grad_flux_lift,
    mean_flux_lift,
)
from .core import KineticState, MaterialCoefficients, VelocityQuadrature
from .dg_ops import DGOperatorSet, b_hv_weak
from .schur import SchurStageSolver

_ORDER_TOL = 1e-13


@dataclass(frozen=True)
class ButcherTableau:
    """Double (explicit, implicit) Butcher tableau."""

    name: str
    order: int
    a_ex: np.ndarray
    a_im: np.ndarray

    def __post_init__(self):
        a_ex = np.asarray(self.a_ex, dtype=float)
        a_im = np.asarray(self.a_im, dtype=float)
        object.__setattr__(self, "a_ex", a_ex)
        object.__setattr__(self, "a_im", a_im)
        if a_ex.shape != a_im.shape or a_ex.shape[0] != a_ex.shape[1]:
            raise ValueError("tableaus must be square and matching")
        s = a_ex.shape[0]
        if np.any(np.triu(a_ex) != 0.0) or np.any(np.triu(a_im, k=1) != 0.0):
            raise ValueError("explicit tableau must be strictly lower, implicit lower")
        if np.any(a_im[0] != 0.0) or np.any(a_im[:, 0] != 0.0):
            raise ValueError("ARS type requires a zero first row and column")
        if s > 1 and abs(np.linalg.det(a_im[1:, 1:])) < 1e-14:
            raise ValueError("trailing implicit block must be invertible")
        defect = check_order_conditions(self)
        if defect > _ORDER_TOL:
            raise ValueError(f"tableau {self.name}: order defect {defect:.2e}")

    @property
    def stages(self) -> int:
        return self.a_ex.shape[0]

    @property
    def b_ex(self) -> np.ndarray:
        return self.a_ex[-1]        # globally stiffly accurate

    @property
    def b_im(self) -> np.ndarray:
        return self.a_im[-1]

    @property
    def c_ex(self) -> np.ndarray:
        return self.a_ex.sum(axis=1)

    @property
    def c_im(self) -> np.ndarray:
        return self.a_im.sum(axis=1)

    @property
    def implicit_diagonal(self) -> float:
        """The common nonzero diagonal entry of the implicit tableau."""
        diag = np.diag(self.a_im)[1:]
        if diag.size and np.ptp(diag) > 1e-14:
            raise ValueError("implicit diagonal entries differ between stages")
        return float(diag[0]) if diag.size else 0.0


def imex1() -> ButcherTableau:
    """First order pair: forward Euler explicit, backward Euler implicit."""
    a_ex = np.array([[0.0, 0.0], [1.0, 0.0]])
    a_im = np.array([[0.0, 0.0], [0.0, 1.0]])
    return ButcherTableau("imex1", 1, a_ex, a_im)


def ars222() -> ButcherTableau:
    gamma = 1.0 - 1.0 / np.sqrt(2.0)
    delta = 1.0 - 1.0 / (2.0 * gamma)
    a_ex = np.array([
        [0.0, 0.0, 0.0],
        [gamma, 0.0, 0.0],
        [delta, 1.0 - delta, 0.0],
    ])
    a_im = np.array([
        [0.0, 0.0, 0.0],
        [0.0, gamma, 0.0],
        [0.0, 1.0 - gamma, gamma],
    ])
    return ButcherTableau("ars222", 2, a_ex, a_im)


def ars443() -> ButcherTableau:
    a_ex = np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0 / 2.0, 0.0, 0.0, 0.0, 0.0],
        [11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0, 0.0],
        [5.0 / 6.0, -5.0 / 6.0, 1.0 / 2.0, 0.0, 0.0],
        [1.0 / 4.0, 7.0 / 4.0, 3.0 / 4.0, -7.0 / 4.0, 0.0],
    ])
    a_im = np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0 / 2.0, 0.0, 0.0, 0.0],
        [0.0, 1.0 / 6.0, 1.0 / 2.0, 0.0, 0.0],
        [0.0, -1.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0, 0.0],
        [0.0, 3.0 / 2.0, -3.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0],
    ])
    return ButcherTableau("ars443", 3, a_ex, a_im)


def tableau_for_order(order: int) -> ButcherTableau:
    try:
        return {1: imex1, 2: ars222, 3: ars443}[order]()
    except KeyError:
        raise ValueError(f"no shipped tableau of order {order}") from None


def check_order_conditions(tab: ButcherTableau) -> float:
    """Largest violation among consistency, GSA and order conditions."""
    a_ex, a_im = tab.a_ex, tab.a_im
    b_ex, b_im = a_ex[-1], a_im[-1]
    c_ex, c_im = a_ex.sum(axis=1), a_im.sum(axis=1)
    defects = [
        abs(np.diag(a_ex)).max(),
        abs(c_ex[-1] - 1.0),
        abs(c_im[-1] - 1.0),
    ]
    if tab.order >= 1:
        defects += [abs(b_ex.sum() - 1.0), abs(b_im.sum() - 1.0)]
    if tab.order >= 2:
        for b in (b_ex, b_im):
            for c in (c_ex, c_im):
                defects.append(abs(b @ c - 0.5))
    if tab.order >= 3:
        if np.max(np.abs(c_ex - c_im)) > 1e-14:
            raise ValueError("third order checks assume matching abscissae")
        c = c_im
        for b in (b_ex, b_im):
            defects.append(abs(b @ (c * c) - 1.0 / 3.0))
            for a in (a_ex, a_im):
                defects.append(abs(b @ (a @ c) - 1.0 / 6.0))
    return float(max(defects))


def source_weak_vector(coefficients: MaterialCoefficients, ops: DGOperatorSet):
    """Weak form (G, phi_i) of the isotropic source, or None when absent."""
    from .core import project_function

    coef = project_function(coefficients.source, ops.mesh, ops.degree)
    if not np.any(coef):
        return None
    return ops.mass * coef


def step(state: KineticState, dt: float, tableau: ButcherTableau,
         ops: DGOperatorSet, quad: VelocityQuadrature,
         coefficients: MaterialCoefficients,
         boundary: InflowData | None,
         schur: SchurStageSolver,
         source_weak: np.ndarray | None = None) -> KineticState:
    """Advance one time step of the fully discrete scheme.

    boundary is None for periodic closure.  The prepared Schur solver must
    match a_dt = a_ii * dt for the tableau's implicit diagonal.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    a_dt = tableau.implicit_diagonal * dt
    if abs(schur.a_dt - a_dt) > 1e-13 * max(1.0, a_dt):
        raise ValueError("Schur solver prepared for a different a_ii * dt")

    eps = coefficients.epsilon
    a_ex, a_im, c_im = tableau.a_ex, tableau.a_im, tableau.c_im
    s = tableau.stages
    v = quad.nodes
    wv = quad.weights * v
    nv, nd = state.g.shape

    m_rho_n = ops.mass * state.rho
    m_g_n = eps * eps * ops.mass[None, :] * state.g

    rho_st = np.empty((s, nd))
    g_st = np.empty((s, nv, nd))
    k_rho = np.empty((s, nd))
    k_g = np.empty((s, nv, nd))
    u_bhv = np.empty((s, nv, nd))
    rho_st[0] = state.rho
    g_st[0] = state.g

    def stage_forms(i, bv: BoundaryValues | None):
        """Weak forms of stage i entering the implicit bracket and transport."""
        rho, g = rho_st[i], g_st[i]
        kr = ops.dplus @ (wv @ g)
        dmr = ops.dminus @ rho
        if not ops.sigma_a_is_zero:
            kr = kr + ops.apply_sigma_a(rho)
        if bv is not None:
            kr += mean_flux_lift(bv, ops)
            dmr = dmr + grad_flux_lift(bv, ops)
        kg = v[:, None] * dmr[None, :] + ops.apply_sigma_s(g)
        if not ops.sigma_a_is_zero:
            kg += eps * eps * ops.apply_sigma_a(g)
        k_rho[i] = kr
        k_g[i] = kg
        gl = bv.g_left if bv is not None else None
        gr = bv.g_right if bv is not None else None
        u_bhv[i] = b_hv_weak(ops, g, quad, g_left=gl, g_right=gr)

    def closure(i, t_stage):
        if boundary is None:
            return None
        probe = KineticState(rho_st[i], g_st[i], t_stage)
        return boundary_values_from_state(probe, ops, boundary, eps, quad, t_stage)

    bv = closure(0, state.t)
    stage_forms(0, bv)

    for i in range(1, s):
        bv = closure(i - 1, state.t + c_im[i] * dt)

        # the implicit tableau's first column is zero, so stage 1 forms never
        # enter the implicit accumulation
        rhs_rho = m_rho_n.copy()
        rhs_g = m_g_n.copy()
        for j in range(1, i):
            if a_im[i, j] != 0.0:
                rhs_rho -= (dt * a_im[i, j]) * k_rho[j]
                rhs_g -= (dt * a_im[i, j]) * k_g[j]
        for j in range(i):
            if a_ex[i, j] != 0.0:
                rhs_g -= (eps * dt * a_ex[i, j]) * u_bhv[j]
        if source_weak is not None:
            rhs_rho += dt * a_ex[i, :i].sum() * source_weak
        if bv is not None and a_im[i, i] != 0.0:
            rhs_rho -= dt * a_im[i, i] * mean_flux_lift(bv, ops)
            rhs_g -= dt * a_im[i, i] * v[:, None] * grad_flux_lift(bv, ops)[None, :]

        try:
            rho_i, g_i = schur.solve_stage(rhs_rho, rhs_g)
        except Exception as exc:
            raise RuntimeError(f"stage {i + 1} solve failed: {exc}") from exc

        rho_st[i] = rho_i
        g_st[i] = g_i
        if i < s - 1:
            stage_forms(i, bv)

    # globally stiffly accurate: the last stage is the update
    return KineticState(rho_st[-1].copy(), g_st[-1].copy(), state.t + dt)


def local_equilibrium_residual(state: KineticState, ops: DGOperatorSet,
                               quad: VelocityQuadrature,
                               coefficients: MaterialCoefficients,
                               boundary: InflowData | None = None) -> float:
    """max_l || pi_h(sigma_s g_l) + v_l D^- rho || / || D^- rho ||.

    Measures how well the discrete local equilibrium of the diffusion limit
    holds; meaningful for eps << 1.
    """
    from .core import l2_norm

    dmr_weak = ops.dminus @ state.rho
    if boundary is not None:
        bv = boundary_values_from_state(state, ops, boundary,
                                        coefficients.epsilon, quad, state.t)
        dmr_weak = dmr_weak + grad_flux_lift(bv, ops)
    dmr = ops.mass_inv * dmr_weak
    denom = l2_norm(dmr, ops.mesh, ops.degree)
    if denom == 0.0:
        return 0.0
    sg = ops.mass_inv[None, :] * ops.apply_sigma_s(state.g)
    worst = 0.0
    for l in range(quad.n_ordinates):
        resid = sg[l] + quad.nodes[l] * dmr
        worst = max(worst, l2_norm(resid, ops.mesh, ops.degree))
    return worst / denom
