"""Problem assembly and verification: agents with one strongly convex
smooth cost plus m proximable nonsmooth terms, coupled by the resource
constraint sum_i x_i = sum_i d_i over a strongly connected digraph.

Also hosts the parameter gate.  Flow parameters (alpha, gamma) together
with the analysis constants (eta, beta) are feasible when

    0 < gamma < 1/(m-1),
    (1+gamma)(m-1)/(2c) < beta < 2/(1+gamma),
    eta > max(1/(b2 h*) - 1, 0)   with b2 = c - (1+gamma)(m-1)/(2 beta),
    alpha > (eta+1)^2 / (eta lambda2).

All four inequalities are strict; ``check_params`` reports the slack of
each one and never mutates its inputs.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, InfeasibleProblem, ValueUnavailable
from .graph import Digraph, SpectralData, spectral_data
from .prox import NonsmoothTerm, stack_terms


@dataclass
class QuadraticCost:
    """scale * ||x - center||^2; strong convexity constant is 2*scale."""

    scale: float
    center: np.ndarray

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("quadratic scale must be positive")
        self.center = np.asarray(self.center, dtype=float)

    def gradient(self, x):
        return 2.0 * self.scale * (np.asarray(x, dtype=float) - self.center)

    def value(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return self.scale * float(diff @ diff)

    @property
    def strong_convexity(self) -> float:
        return 2.0 * self.scale


@dataclass
class AgentSpec:
    """One agent: smooth gradient handle, nonsmooth term list, resource
    vector, and the declared strong-convexity constant.

    The *last* term is the one whose prox enters the x-update; every
    earlier term gets its own z estimator.
    """

    q: int
    grad_f0: Callable[[np.ndarray], np.ndarray]
    c: float
    terms: list
    d: np.ndarray
    f0_value: Optional[Callable[[np.ndarray], float]] = None

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("state dimension q must be positive")
        if self.c <= 0:
            raise ValueError("strong convexity constant must be positive")
        if len(self.terms) < 2:
            raise ValueError("each agent needs at least two nonsmooth terms (m >= 2)")
        self.d = np.asarray(self.d, dtype=float)
        if self.d.shape != (self.q,):
            raise DimensionMismatch("resource vector d has wrong shape")
        for t in self.terms:
            t.check_dim(self.q)

    @property
    def m(self) -> int:
        return len(self.terms)

    @classmethod
    def quadratic(cls, cost: QuadraticCost, terms, d):
        """Agent whose smooth part is a QuadraticCost (c derived exactly)."""
        return cls(q=cost.center.shape[0], grad_f0=cost.gradient,
                   c=cost.strong_convexity, terms=terms, d=d,
                   f0_value=cost.value)


class NetworkProblem:
    """n agents over a strongly connected digraph, uniform q and m."""

    def __init__(self, agents, graph: Digraph, tol: float = 1e-9):
        if len(agents) != graph.n:
            raise DimensionMismatch(
                f"{len(agents)} agents but graph has {graph.n} nodes")
        q = agents[0].q
        m = agents[0].m
        for a in agents:
            if a.q != q or a.m != m:
                raise DimensionMismatch("all agents must share q and m")
        self.agents = list(agents)
        self.graph = graph
        self.spectral: SpectralData = spectral_data(graph, tol)
        self.n = graph.n
        self.q = q
        self.m = m
        self.d = np.stack([a.d for a in agents])
        self.c = min(a.c for a in agents)
        # slot j (0-based) holds every agent's j-th term; the last slot
        # feeds the x-update, the others feed the z estimators
        self.slots = [stack_terms([a.terms[j] for a in agents]) for j in range(m)]
        # stacked fast path when every smooth cost is a QuadraticCost
        quads = [getattr(a.grad_f0, "__self__", None) for a in agents]
        if all(isinstance(qc, QuadraticCost) for qc in quads):
            self._quad_scale = np.array([qc.scale for qc in quads])[:, None]
            self._quad_center = np.stack([qc.center for qc in quads])
        else:
            self._quad_scale = None
            self._quad_center = None

    def grad_block(self, x: np.ndarray) -> np.ndarray:
        """Stacked smooth gradients, shape (n, q)."""
        if self._quad_scale is not None:
            return 2.0 * self._quad_scale * (x - self._quad_center)
        return np.stack([a.grad_f0(x[i]) for i, a in enumerate(self.agents)])

    def f0_block(self, x: np.ndarray) -> np.ndarray:
        if self._quad_scale is not None:
            diff = x - self._quad_center
            return self._quad_scale[:, 0] * (diff * diff).sum(axis=1)
        vals = []
        for i, a in enumerate(self.agents):
            if a.f0_value is None:
                raise ValueUnavailable(f"agent {i} has no f0 value handle")
            vals.append(float(a.f0_value(x[i])))
        return np.array(vals)

    def check_state_shape(self, x, z=None, v=None):
        if np.shape(x) != (self.n, self.q):
            raise DimensionMismatch(f"x has shape {np.shape(x)}, expected {(self.n, self.q)}")
        if z is not None and np.shape(z) != (self.m - 1, self.n, self.q):
            raise DimensionMismatch("z block has wrong shape")
        if v is not None and np.shape(v) != (self.n, self.q):
            raise DimensionMismatch("v block has wrong shape")


@dataclass(frozen=True)
class FlowParams:
    """Flow gains plus analysis constants with their feasibility verdict.

    ``margins`` maps each strict inequality to its slack (positive means
    satisfied); ``feasible`` is True iff every slack is positive.
    """

    alpha: float
    gamma: float
    eta: float
    beta: float
    b1: float
    b2: float
    feasible: bool
    margins: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AgentAssumptionReport:
    c: float
    m: int
    c_ok: bool
    suggested_scaling: Optional[float]
    spot_check_min_ratio: float
    spot_check_ok: bool


@dataclass(frozen=True)
class AssumptionReport:
    strongly_connected: bool
    agents: list
    passed: bool


def validate_assumptions(p: NetworkProblem, seed: int = 0, n_pairs: int = 20,
                         box: float = 5.0) -> AssumptionReport:
    """Check c > m-1 per agent (suggesting the rescaling factor K when it
    fails) and spot-check the strong-convexity inequality on random point
    pairs.  Strong connectivity already held when the problem was built,
    so it is reported as satisfied.
    """
    rng = np.random.default_rng(seed)
    reports = []
    ok = True
    for a in p.agents:
        c_ok = a.c > a.m - 1
        suggested = None if c_ok else (a.m - 1) / a.c
        min_ratio = np.inf
        for _ in range(n_pairs):
            t1 = rng.uniform(-box, box, a.q)
            t2 = rng.uniform(-box, box, a.q)
            dt = t1 - t2
            denom = float(dt @ dt)
            if denom == 0.0:
                continue
            num = float((np.asarray(a.grad_f0(t1)) - np.asarray(a.grad_f0(t2))) @ dt)
            min_ratio = min(min_ratio, num / denom)
        spot_ok = min_ratio >= a.c - 1e-9
        ok = ok and c_ok and spot_ok
        reports.append(AgentAssumptionReport(
            c=a.c, m=a.m, c_ok=c_ok, suggested_scaling=suggested,
            spot_check_min_ratio=float(min_ratio), spot_check_ok=spot_ok))
    return AssumptionReport(strongly_connected=True, agents=reports, passed=ok)


def beta_window(c: float, gamma: float, m: int):
    """Open interval of admissible beta for given c, gamma, m."""
    return (1.0 + gamma) * (m - 1) / (2.0 * c), 2.0 / (1.0 + gamma)


def check_params(p: NetworkProblem, alpha: float, gamma: float,
                 eta: float, beta: float) -> FlowParams:
    """Evaluate every feasibility inequality and report the slacks."""
    m, c = p.m, p.c
    h_star, lam2 = p.spectral.h_star, p.spectral.lambda2
    lo, hi = beta_window(c, gamma, m)
    b1 = 1.0 - 0.5 * (1.0 + gamma) * beta
    b2 = c - 0.5 * (1.0 + gamma) * (m - 1) / beta if beta > 0 else -np.inf

    margins = {
        "gamma_positive": gamma,
        "gamma_upper": 1.0 / (m - 1) - gamma,
        "beta_lower": beta - lo,
        "beta_upper": hi - beta,
        "b1_positive": b1,
        "b2_positive": b2,
    }
    if b2 > 0 and h_star > 0:
        eta_threshold = max(1.0 / (b2 * h_star) - 1.0, 0.0)
        margins["eta"] = eta - eta_threshold
    else:
        margins["eta"] = -np.inf
    if eta > 0:
        alpha_threshold = (eta + 1.0) ** 2 / (eta * lam2)
        margins["alpha"] = alpha - alpha_threshold
    else:
        margins["alpha"] = -np.inf

    feasible = all(v > 0 for v in margins.values())
    return FlowParams(alpha=alpha, gamma=gamma, eta=eta, beta=beta,
                      b1=b1, b2=b2, feasible=feasible, margins=margins)


def _interior(value: float, lo: float, hi: float) -> float:
    # the inequalities are strict; nudge off an exact endpoint
    if hi <= lo:
        return value
    if value >= hi:
        return lo + 0.9 * (hi - lo)
    if value <= lo:
        return hi - 0.9 * (hi - lo)
    return value


def suggest_params(p: NetworkProblem) -> FlowParams:
    """Pick a feasible parameter set: gamma at half its upper bound, beta
    at the midpoint of its window, eta 10% above its threshold (1 when the
    threshold is 0), alpha 10% above its threshold."""
    m = p.m
    gamma = 1.0 / (2.0 * (m - 1))
    gamma = _interior(gamma, 0.0, 1.0 / (m - 1))
    lo, hi = beta_window(p.c, gamma, m)
    if not lo < hi:
        raise InfeasibleProblem(
            f"empty beta window ({lo}, {hi}); requires c > m-1 (c={p.c}, m={m})")
    beta = _interior(0.5 * (lo + hi), lo, hi)
    b2 = p.c - 0.5 * (1.0 + gamma) * (m - 1) / beta
    eta_threshold = max(1.0 / (b2 * p.spectral.h_star) - 1.0, 0.0)
    eta = 1.1 * eta_threshold if eta_threshold > 0 else 1.0
    if np.isfinite(p.spectral.lambda2):
        alpha = 1.1 * (eta + 1.0) ** 2 / (eta * p.spectral.lambda2)
    else:
        alpha = 1.0
    return check_params(p, alpha, gamma, eta, beta)


@dataclass(frozen=True)
class KktResidual:
    """Distance-to-optimality built from the prox fixed-point equations,
    the resource constraint, and multiplier consensus."""

    r_x: float
    r_z: float
    r_feas: float
    r_cons: float

    def max(self) -> float:
        return max(self.r_x, self.r_z, self.r_feas, self.r_cons)


def kkt_residual(p: NetworkProblem, state, params: FlowParams) -> KktResidual:
    """Evaluate the four residuals at a state with blocks x, z, v.

    r_x checks x = Prox_m[x - grad F0(x) + v + gamma sum_j z^j]; r_z the
    analogous identity per z slot; r_feas the resource constraint;
    r_cons ||L v|| as the computable surrogate for multiplier consensus.
    """
    x, z, v = state.x, state.z, state.v
    p.check_state_shape(x, z, v)
    gamma = params.gamma
    arg = x - p.grad_block(x) + v + gamma * z.sum(axis=0)
    r_x = float(np.linalg.norm(p.slots[-1].prox(arg) - x))
    r_z = 0.0
    for j in range(p.m - 1):
        r_z = max(r_z, float(np.linalg.norm(p.slots[j].prox(x - gamma * z[j]) - x)))
    r_feas = float(np.linalg.norm((x - p.d).sum(axis=0)))
    r_cons = float(np.linalg.norm(p.spectral.laplacian @ v))
    return KktResidual(r_x=r_x, r_z=r_z, r_feas=r_feas, r_cons=r_cons)


def objective(p: NetworkProblem, x: np.ndarray, atol: float = 1e-9) -> float:
    """Full cost sum_i [f_i^0(x_i) + sum_j f_i^j(x_i)]; +inf when an
    indicator term is violated beyond atol."""
    x = np.asarray(x, dtype=float)
    if x.shape == (p.n * p.q,):
        x = x.reshape(p.n, p.q)
    p.check_state_shape(x)
    total = float(p.f0_block(x).sum())
    for slot in p.slots:
        vals = slot.value(x, atol)
        if np.any(np.isinf(vals)):
            return np.inf
        total += float(vals.sum())
    return total
