"""Centralized reference solvers used to cross-check the distributed
flows' limit points: exhaustive grid search at tiny scale and a projected
subgradient method at simulation scale.

Both handle the resource constraint exactly -- the grid by eliminating the
last agent's block, the subgradient method by an affine projection after
every step.  Indicator sets are handled by projection; candidate iterates
are polished onto the constraint intersection before their objective is
recorded, so the best value never comes from an infeasible point.
"""

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ScaleTooLarge
from .problem import NetworkProblem, objective

MAX_FREE_DIM = 6
MAX_RESOLUTION = 200
MAX_GRID_POINTS = 2_000_000


@dataclass(frozen=True)
class OracleResult:
    x_star: Optional[np.ndarray]        # (n, q) or None when nothing feasible
    F_star: float
    method: str
    certificate: dict


def _free_axes(p: NetworkProblem, bounds, resolution):
    free_dim = (p.n - 1) * p.q
    if free_dim > MAX_FREE_DIM:
        raise ScaleTooLarge(f"free dimension {free_dim} exceeds cap {MAX_FREE_DIM}")
    if resolution < 2 or resolution > MAX_RESOLUTION:
        raise ScaleTooLarge(f"resolution {resolution} outside [2, {MAX_RESOLUTION}]")
    if resolution ** free_dim > MAX_GRID_POINTS:
        raise ScaleTooLarge(
            f"{resolution}^{free_dim} grid points exceed cap {MAX_GRID_POINTS}")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape == (2,):
        bounds = np.tile(bounds, (free_dim, 1))
    if bounds.shape != (free_dim, 2):
        raise ValueError(f"bounds must be one interval or {free_dim} of them")
    return [np.linspace(lo, hi, resolution) for lo, hi in bounds], free_dim


def solve_grid(p: NetworkProblem, bounds, resolution: int) -> OracleResult:
    """Exhaustive search over the free coordinates (all agents but the
    last); the eliminated block is set to sum(d) - sum(x_i, i < n) so the
    resource constraint holds by construction.  Ties break toward the
    lexicographically smallest grid point.
    """
    axes, free_dim = _free_axes(p, bounds, resolution)
    n, q = p.n, p.q
    d_total = p.d.sum(axis=0)

    best_f = np.inf
    best_x = None
    best_idx = None
    ties = 0
    n_feasible = 0
    x = np.empty((n, q))
    for idx in itertools.product(*(range(len(ax)) for ax in axes)):
        for k in range(free_dim):
            x[k // q, k % q] = axes[k][idx[k]]
        x[n - 1] = d_total - x[: n - 1].sum(axis=0)
        f = objective(p, x)
        if np.isfinite(f):
            n_feasible += 1
        if f < best_f:
            best_f = f
            best_x = x.copy()
            best_idx = idx
            ties = 1
        elif f == best_f and np.isfinite(f):
            ties += 1

    cert = {
        "feasibility_gap": 0.0,
        "n_points": int(np.prod([len(ax) for ax in axes])) if axes else 1,
        "n_feasible": n_feasible,
        "ties": ties if best_x is not None else 0,
        "spacing": [float(ax[1] - ax[0]) for ax in axes],
    }
    if best_x is None:
        cert["no_feasible_point"] = True
        return OracleResult(x_star=None, F_star=np.inf, method="grid", certificate=cert)

    # objective rise at the argmin's grid neighbours (local certificate)
    neighbor_gap = np.inf
    for k in range(free_dim):
        for delta in (-1, 1):
            jdx = list(best_idx)
            jdx[k] += delta
            if not 0 <= jdx[k] < len(axes[k]):
                continue
            for kk in range(free_dim):
                x[kk // q, kk % q] = axes[kk][jdx[kk]]
            x[n - 1] = d_total - x[: n - 1].sum(axis=0)
            neighbor_gap = min(neighbor_gap, objective(p, x) - best_f)
    cert["best_neighbor_gap"] = float(neighbor_gap)
    cert["feasibility_gap"] = float(np.linalg.norm((best_x - p.d).sum(axis=0)))
    return OracleResult(x_star=best_x, F_star=float(best_f), method="grid",
                        certificate=cert)


def _project_affine(x, d):
    return x - (x - d).sum(axis=0)[None, :] / x.shape[0]


def _indicator_slots(p: NetworkProblem):
    return [slot for slot in p.slots if slot.indicator]


def _polish(p, x, ind_slots, rounds: int = 60, tol: float = 1e-11):
    """Alternating projections onto the indicator sets and the resource
    constraint (affine last, so the equality is exact); returns the point
    and its worst indicator violation."""
    viol = np.inf
    for _ in range(rounds):
        for slot in ind_slots:
            x = slot.project(x)
        x = _project_affine(x, p.d)
        viol = 0.0
        for slot in ind_slots:
            viol = max(viol, float(np.abs(slot.project(x) - x).max()))
        if viol <= tol:
            break
    return x, viol


def solve_subgradient(p: NetworkProblem, x0, iters: int,
                      eval_stride: int = 25) -> OracleResult:
    """Projected subgradient descent with diminishing steps a/(k+b),
    a = 2/c (the classical strongly-convex schedule), b = 10.  Every step
    projects back onto the resource constraint; indicator sets are
    re-projected right after the move.  Candidates are polished onto the
    constraint intersection before their objective is recorded, and the
    best one wins.
    """
    if iters < 1:
        raise ValueError("iters must be positive")
    x = np.array(x0, dtype=float).reshape(p.n, p.q)
    x = _project_affine(x, p.d)
    ind_slots = _indicator_slots(p)
    a = 2.0 / p.c
    b = 10.0

    best_f = np.inf
    best_x = x.copy()
    best_viol = np.inf
    trace = []

    def consider(xk):
        nonlocal best_f, best_x, best_viol
        cand, viol = _polish(p, xk.copy(), ind_slots)
        f = objective(p, cand, atol=1e-8)
        if f < best_f:
            best_f, best_x, best_viol = f, cand, viol
        trace.append(best_f)

    consider(x)
    for k in range(iters):
        g = p.grad_block(x)
        for slot in p.slots:
            g = g + slot.subgrad(x)
        x = x - (a / (k + b)) * g
        for slot in ind_slots:
            x = slot.project(x)
        x = _project_affine(x, p.d)
        if (k + 1) % eval_stride == 0 or k == iters - 1:
            consider(x)

    cert = {
        "iters": iters,
        "step_a": a,
        "step_b": b,
        "final_objective": float(objective(p, _polish(p, x, ind_slots)[0], atol=1e-8)),
        "best_objective": float(best_f),
        "feasibility_gap": float(np.linalg.norm((best_x - p.d).sum(axis=0))),
        "indicator_violation": float(best_viol),
        "best_trace": trace,
    }
    return OracleResult(x_star=best_x, F_star=float(best_f),
                        method="subgradient", certificate=cert)
