"""Independent finite-difference reference solvers.

Two deliberately simple solvers provide comparison curves for the DG runs:
a first-order forward-Euler upwind scheme for the kinetic equation itself,
and a central-difference scheme for its diffusion limit.  Both are explicit,
so paper-scale resolutions need millions of steps; the time loops are
numba-compiled and results are cached on disk keyed by a content hash of the
full configuration.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .core import MaterialCoefficients, VelocityQuadrature


@dataclass(frozen=True)
class FDGrid:
    """Uniform node-centered grid and explicit time stepping parameters."""

    x_left: float
    x_right: float
    n_cells: int
    dt: float
    t_final: float

    def __post_init__(self):
        if self.n_cells < 2 or self.x_right <= self.x_left:
            raise ValueError("invalid grid extent")
        if self.dt <= 0.0 or self.t_final < 0.0:
            raise ValueError("dt and t_final must be positive")

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_left, self.x_right, self.n_cells + 1)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


class ReferenceCFLError(ValueError):
    pass


@njit(cache=True, fastmath=True)
def _kinetic_kernel(f, v, w, sig_s, sig_a, src, eps, dx, dt, n_steps,
                    periodic, f_left, f_right):
    # node nx-1 duplicates node 0 in the periodic case
    nv, nx = f.shape
    fn = np.empty_like(f)
    rho = np.empty(nx)
    for step_i in range(n_steps):
        for l in range(nv):
            vl = v[l]
            a = vl * dt / (eps * dx)
            if vl >= 0.0:
                if periodic:
                    fn[l, 0] = f[l, 0] - a * (f[l, 0] - f[l, nx - 2])
                else:
                    fn[l, 0] = f_left[l]
                for i in range(1, nx):
                    fn[l, i] = f[l, i] - a * (f[l, i] - f[l, i - 1])
            else:
                for i in range(nx - 1):
                    fn[l, i] = f[l, i] - a * (f[l, i + 1] - f[l, i])
                if periodic:
                    fn[l, nx - 1] = f[l, nx - 1] - a * (f[l, 1] - f[l, nx - 1])
                else:
                    fn[l, nx - 1] = f_right[l]
        for i in range(nx):
            rho[i] = 0.0
        for l in range(nv):
            wl = w[l]
            for i in range(nx):
                rho[i] += wl * fn[l, i]
        for l in range(nv):
            for i in range(nx):
                cs = dt * sig_s[i] / (eps * eps)
                fn[l, i] += cs * (rho[i] - fn[l, i]) \
                    - dt * sig_a[i] * fn[l, i] + dt * src[i]
        if not periodic:
            for l in range(nv):
                if v[l] >= 0.0:
                    fn[l, 0] = f_left[l]
                else:
                    fn[l, nx - 1] = f_right[l]
        f, fn = fn, f
        if step_i % 1000 == 0 and not np.isfinite(f[0, 0]):
            return f, step_i
    return f, -1


def kinetic_fd(coefficients: MaterialCoefficients, quad: VelocityQuadrature,
               f0, bc, grid: FDGrid):
    """Forward-Euler upwind solve of the kinetic equation on grid nodes.

    f0 is f(x, v) at t=0; bc is "periodic" or a pair (f_left(v), f_right(v))
    of time-independent inflow data.  Returns (x, f) with f of shape
    (n_ordinates, n_nodes).
    """
    eps = coefficients.epsilon
    x = grid.nodes
    v, w = quad.nodes, quad.weights
    sig_s = np.broadcast_to(np.asarray(coefficients.sigma_s(x), float), x.shape).copy()
    sig_a = np.broadcast_to(np.asarray(coefficients.sigma_a(x), float), x.shape).copy()
    src = np.broadcast_to(np.asarray(coefficients.source(x), float), x.shape).copy()

    tiny = 1.0 + 1e-12
    if grid.dt * quad.v_inf / (eps * grid.dx) > tiny:
        raise ReferenceCFLError("dt violates the transport CFL eps*dx/|v|max")
    if sig_s.max() > 0.0 and grid.dt * sig_s.max() / eps**2 > tiny:
        raise ReferenceCFLError("dt violates the explicit collision limit eps^2/sigma_s")

    f = np.empty((quad.n_ordinates, x.size))
    for l, vl in enumerate(v):
        f[l] = f0(x, vl)

    periodic = isinstance(bc, str) and bc == "periodic"
    if periodic:
        f_l = np.zeros(quad.n_ordinates)
        f_r = np.zeros(quad.n_ordinates)
    else:
        fn_l, fn_r = bc
        f_l = np.array([float(fn_l(vl)) for vl in v])
        f_r = np.array([float(fn_r(vl)) for vl in v])
        for l, vl in enumerate(v):
            if vl >= 0.0:
                f[l, 0] = f_l[l]
            else:
                f[l, -1] = f_r[l]

    out, bad = _kinetic_kernel(f, v, w, sig_s, sig_a, src, eps, grid.dx,
                               grid.dt, grid.n_steps, periodic, f_l, f_r)
    if bad >= 0:
        raise FloatingPointError(f"kinetic_fd produced NaN near step {bad}")
    return x, out


@njit(cache=True, fastmath=True)
def _diffusion_kernel(rho, kappa_half, sig_a, src, dx, dt, n_steps,
                      periodic, rho_l, rho_r):
    # node nx-1 duplicates node 0 in the periodic case; kappa_half[i] sits
    # between nodes i and i+1 (nx-1 interior midpoints)
    nx = rho.size
    rn = np.empty_like(rho)
    c = dt / (dx * dx)
    for step_i in range(n_steps):
        for i in range(1, nx - 1):
            flux = kappa_half[i] * (rho[i + 1] - rho[i]) \
                - kappa_half[i - 1] * (rho[i] - rho[i - 1])
            rn[i] = rho[i] + c * flux - dt * sig_a[i] * rho[i] + dt * src[i]
        if periodic:
            flux0 = kappa_half[0] * (rho[1] - rho[0]) \
                - kappa_half[nx - 2] * (rho[0] - rho[nx - 2])
            rn[0] = rho[0] + c * flux0 - dt * sig_a[0] * rho[0] + dt * src[0]
            rn[nx - 1] = rn[0]
        else:
            rn[0] = rho_l
            rn[nx - 1] = rho_r
        rho, rn = rn, rho
        if step_i % 5000 == 0 and not np.isfinite(rho[0]):
            return rho, step_i
    return rho, -1


def diffusion_fd(coefficients: MaterialCoefficients, rho0, bc, grid: FDGrid,
                 v_sq: float = 1.0 / 3.0):
    """Central-difference forward-Euler solve of the diffusion limit.

    d_t rho = <v^2> d_x( d_x rho / sigma_s ) - sigma_a rho + G, with sigma_s
    evaluated at half nodes.  bc is "periodic" or a (rho_left, rho_right)
    Dirichlet pair.  Returns (x, rho).
    """
    x = grid.nodes
    half = 0.5 * (x[:-1] + x[1:])
    sig_half = np.broadcast_to(np.asarray(coefficients.sigma_s(half), float),
                               half.shape).copy()
    if sig_half.min() <= 0.0:
        raise ValueError("diffusion limit needs sigma_s > 0 everywhere")
    sig_a = np.broadcast_to(np.asarray(coefficients.sigma_a(x), float), x.shape).copy()
    src = np.broadcast_to(np.asarray(coefficients.source(x), float), x.shape).copy()

    limit = 0.25 * grid.dx**2 * sig_half.min() / v_sq
    if grid.dt > limit * (1.0 + 1e-12):
        raise ReferenceCFLError(f"dt {grid.dt} violates the parabolic limit {limit}")

    rho = np.asarray(rho0(x), dtype=float).copy()
    periodic = isinstance(bc, str) and bc == "periodic"
    if periodic:
        rho_l = rho_r = 0.0
    else:
        rho_l, rho_r = float(bc[0]), float(bc[1])
        rho[0], rho[-1] = rho_l, rho_r

    kappa_half = v_sq / sig_half
    out, bad = _diffusion_kernel(rho, kappa_half, sig_a, src, grid.dx, grid.dt,
                                 grid.n_steps, periodic, rho_l, rho_r)
    if bad >= 0:
        raise FloatingPointError(f"diffusion_fd produced NaN near step {bad}")
    return x, out


def cache_dir() -> Path:
    root = os.environ.get("KINDG_CACHE_DIR")
    path = Path(root) if root else Path.home() / ".cache" / "kindg"
    path.mkdir(parents=True, exist_ok=True)
    return path


def cached_arrays(key: dict, compute):
    """Disk-cache a dict of arrays under a content hash of the key dict.

    compute() must return a dict of numpy arrays; the key must uniquely
    describe the run (solver, coefficients, grid, bc).
    """
    text = json.dumps(key, sort_keys=True, default=repr)
    digest = hashlib.sha256(text.encode()).hexdigest()[:24]
    path = cache_dir() / f"{digest}.npz"
    if path.exists():
        with np.load(path) as data:
            return {k: data[k] for k in data.files}
    result = compute()
    np.savez(path, **result)
    return result
