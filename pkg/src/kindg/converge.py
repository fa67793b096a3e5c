"""Richardson self-convergence tables.

E_N compares the run at N cells with the run at 2N cells at the final time.
The finer solution is first L2-restricted onto the coarse mesh (exact for
the nested uniform meshes used here), then the difference is sampled at 10
Gauss points per coarse cell and reduced in max norm.  Without the
restriction the piecewise-constant scheme's representation gap, O(h) |rho'|,
would mask the actual solution difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .core import field_values, gauss_rule, legendre_vals
from .driver import RunResult, run

_SAMPLES_PER_CELL = 10


def restrict_halved(coef_fine: np.ndarray, degree: int) -> np.ndarray:
    """L2-project a field on 2N uniform cells onto the N-cell parent mesh."""
    d = degree + 1
    cf = coef_fine.reshape(-1, d)
    if cf.shape[0] % 2:
        raise ValueError("fine mesh must have an even cell count")
    eta, w = gauss_rule(4)
    phi_eta = legendre_vals(eta, degree)
    out = 0.0
    for half_sign in (-1.0, 1.0):
        xi = 0.5 * (eta + half_sign)
        phi_xi = legendre_vals(xi, degree)
        start = 0 if half_sign < 0 else 1
        vals = cf[start::2] @ phi_eta.T
        out = out + np.einsum("nq,qm->nm", vals * (0.5 * w)[None, :], phi_xi)
    scale = 0.5 * (2.0 * np.arange(d) + 1.0)
    return (out * scale[None, :]).ravel()


def _linf_difference(coarse: RunResult, fine: RunResult,
                     field_c: np.ndarray, field_f: np.ndarray) -> float:
    deg = coarse.problem.degree
    restricted = restrict_halved(field_f, deg)
    xi, _ = gauss_rule(_SAMPLES_PER_CELL)
    diff = field_values(field_c - restricted, coarse.problem.mesh, deg, xi)
    return float(np.abs(diff).max())


@dataclass
class ConvergenceRow:
    n: int
    e_rho: float
    order_rho: float        # NaN in the first row
    e_g: float
    order_g: float


def richardson_table(config: RunConfig, n_list) -> list[ConvergenceRow]:
    """Self-convergence errors E_N and orders log2(E_N / E_2N).

    n_list must be doubling; one extra run at 2 * max(n_list) provides the
    last comparison level.
    """
    n_list = [int(n) for n in n_list]
    for a, b in zip(n_list, n_list[1:]):
        if b != 2 * a:
            raise ValueError("n_list must double at every level")

    runs: dict[int, RunResult] = {}
    for n in n_list + [2 * n_list[-1]]:
        runs[n] = run(config.with_overrides(n=n))

    e_rho, e_g = {}, {}
    for n in n_list:
        coarse, fine = runs[n], runs[2 * n]
        e_rho[n] = _linf_difference(coarse, fine, coarse.state.rho,
                                    fine.state.rho)
        e_g[n] = max(
            _linf_difference(coarse, fine, coarse.state.g[l], fine.state.g[l])
            for l in range(coarse.problem.quad.n_ordinates))

    rows = []
    prev = None
    for n in n_list:
        if prev is None or e_rho[n] == 0.0 or e_rho[prev] == 0.0:
            o_rho = float("nan")
        else:
            o_rho = float(np.log2(e_rho[prev] / e_rho[n]))
        if prev is None or e_g[n] == 0.0 or e_g[prev] == 0.0:
            o_g = float("nan")
        else:
            o_g = float(np.log2(e_g[prev] / e_g[n]))
        rows.append(ConvergenceRow(n, e_rho[n], o_rho, e_g[n], o_g))
        prev = n
    return rows


def write_table_csv(rows, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("N,Erho,order_rho,Eg,order_g\n")
        for r in rows:
            fh.write(f"{r.n},{r.e_rho:.17g},{r.order_rho:.17g},"
                     f"{r.e_g:.17g},{r.order_g:.17g}\n")
