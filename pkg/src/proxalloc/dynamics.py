"""Right-hand sides of the two primal-dual flows.

Known-eigenvector flow (per agent i, z slot j = 1..m-1):

    dx_i = prox_{f_i^m}[x_i - grad f_i^0(x_i) + v_i + gamma sum_j z_i^j] - x_i
    dz_i^j = prox_{f_i^j}[x_i - gamma z_i^j] - x_i
    dv_i = -(x_i - d_i)/h_i - alpha (L v)_i - w_i
    dw_i = alpha (L v)_i,   w(0) = 0

Estimator flow: identical except 1/h_i is replaced by 1/y_i^i, where each
agent's estimate row follows the consensus dynamics dY = -L Y from Y(0)=I,
so the diagonal converges to h.  Since h^T L = 0, the weighted sum
sum_i h_i dw_i vanishes identically, which keeps sum_i h_i w_i(t) = 0
along any explicit integration started from w(0) = 0.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatch, EstimatorSingular
from .graph import Digraph, laplacian
from .problem import FlowParams, NetworkProblem

EPS_Y = 1e-9


@dataclass
class FlowState:
    """Full dynamical state: primal block x (n,q), subgradient estimators
    z (m-1,n,q), multipliers v (n,q), integral states w (n,q), and in
    estimator mode the eigenvector estimates y (n,n; row i is agent i's)."""

    x: np.ndarray
    z: np.ndarray
    v: np.ndarray
    w: np.ndarray
    y: Optional[np.ndarray] = None

    def copy(self) -> "FlowState":
        return FlowState(self.x.copy(), self.z.copy(), self.v.copy(),
                         self.w.copy(), None if self.y is None else self.y.copy())

    def blocks(self):
        out = [self.x, self.z, self.v, self.w]
        if self.y is not None:
            out.append(self.y)
        return out

    def axpy(self, coef: float, rhs: "RhsOutput") -> "FlowState":
        """New state self + coef * rhs (used by the explicit steppers)."""
        y = None
        if self.y is not None:
            y = self.y + coef * rhs.dy
        return FlowState(self.x + coef * rhs.dx, self.z + coef * rhs.dz,
                         self.v + coef * rhs.dv, self.w + coef * rhs.dw, y)

    def is_finite(self) -> bool:
        return all(np.isfinite(b).all() for b in self.blocks())


@dataclass
class RhsOutput:
    dx: np.ndarray
    dz: np.ndarray
    dv: np.ndarray
    dw: np.ndarray
    dy: Optional[np.ndarray] = None
    sup_norm: float = 0.0

    @staticmethod
    def combine(parts, weights):
        """Weighted sum of stage derivatives (RK4 assembly)."""
        dx = sum(w * p.dx for w, p in zip(weights, parts))
        dz = sum(w * p.dz for w, p in zip(weights, parts))
        dv = sum(w * p.dv for w, p in zip(weights, parts))
        dw = sum(w * p.dw for w, p in zip(weights, parts))
        dy = None
        if parts[0].dy is not None:
            dy = sum(w * p.dy for w, p in zip(weights, parts))
        return RhsOutput(dx, dz, dv, dw, dy, _sup(dx, dz, dv, dw, dy))


def _sup(dx, dz, dv, dw, dy=None):
    # max-abs without temporaries; NaN anywhere yields NaN (the builtin
    # max would silently drop it, so check explicitly)
    blocks = (dx, dz, dv, dw) if dy is None else (dx, dz, dv, dw, dy)
    sup = 0.0
    for b in blocks:
        hi = float(b.max())
        lo = float(b.min())
        if hi != hi or lo != lo:
            return float("nan")
        sup = max(sup, hi, -lo)
    return sup


def initial_state(p: NetworkProblem, x0=None, z0=None, v0=None,
                  estimator: bool = False) -> FlowState:
    """State respecting the init invariants: w(0) = 0, and in estimator
    mode y(0) = identity rows."""
    n, q, m = p.n, p.q, p.m
    x = np.zeros((n, q)) if x0 is None else np.array(x0, dtype=float).reshape(n, q)
    z = np.zeros((m - 1, n, q)) if z0 is None else np.array(z0, dtype=float).reshape(m - 1, n, q)
    v = np.zeros((n, q)) if v0 is None else np.array(v0, dtype=float).reshape(n, q)
    w = np.zeros((n, q))
    y = np.eye(n) if estimator else None
    return FlowState(x, z, v, w, y)


def _prox_steps(p: NetworkProblem, gamma: float, s: FlowState):
    x, z = s.x, s.z
    arg = x - p.grad_block(x) + s.v + gamma * z.sum(axis=0)
    dx = p.slots[-1].prox(arg) - x
    dz = np.empty_like(z)
    for j in range(p.m - 1):
        dz[j] = p.slots[j].prox(x - gamma * z[j]) - x
    return dx, dz


def rhs_known_h(p: NetworkProblem, params: FlowParams, s: FlowState) -> RhsOutput:
    """Flow derivatives with the left eigenvector h known to every agent."""
    p.check_state_shape(s.x, s.z, s.v)
    dx, dz = _prox_steps(p, params.gamma, s)
    lv = p.spectral.laplacian @ s.v
    dv = -(s.x - p.d) / p.spectral.h[:, None] - params.alpha * lv - s.w
    dw = params.alpha * lv
    return RhsOutput(dx, dz, dv, dw, None, _sup(dx, dz, dv, dw))


def rhs_estimator(p: NetworkProblem, params: FlowParams, s: FlowState,
                  eps_y: float = EPS_Y) -> RhsOutput:
    """Flow derivatives with the distributed eigenvector estimator.

    Identical to the known-h flow except 1/h_i becomes 1/y_i^i, plus the
    consensus dynamics dY = -L Y.  Raises EstimatorSingular when a
    diagonal entry has decayed to within eps_y of zero, rather than
    silently clamping (positivity holds in continuous time; losing it
    signals too coarse a step).
    """
    if s.y is None:
        raise DimensionMismatch("estimator flow needs the y block in the state")
    if s.y.shape != (p.n, p.n):
        raise DimensionMismatch("y block must be n x n")
    p.check_state_shape(s.x, s.z, s.v)
    ydiag = np.diag(s.y)
    if np.any(ydiag <= eps_y):
        worst = int(np.argmin(ydiag))
        raise EstimatorSingular(
            f"y_{worst}^{worst} = {ydiag[worst]:.3e} <= eps_y = {eps_y:.1e}")
    dx, dz = _prox_steps(p, params.gamma, s)
    lv = p.spectral.laplacian @ s.v
    dv = -(s.x - p.d) / ydiag[:, None] - params.alpha * lv - s.w
    dw = params.alpha * lv
    dy = -p.spectral.laplacian @ s.y
    return RhsOutput(dx, dz, dv, dw, dy, _sup(dx, dz, dv, dw, dy))


def estimator_closed_form(g: Digraph, t: float) -> np.ndarray:
    """exp(-L t) applied to the identity initial condition: row i is agent
    i's estimate at time t.  Rows sum to one for all t and converge to
    h^T as t grows."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return expm(-laplacian(g) * t)
