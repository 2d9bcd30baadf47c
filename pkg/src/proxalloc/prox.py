"""Proximal operators for the nonsmooth terms, plus validators.

Every term exposes ``prox`` (a single q-vector in, the minimizer of
f(delta) + 0.5*||delta - theta||^2 out), ``value`` for objective reporting,
and ``subgradient`` for the centralized oracle.  Terms that admit a cheap
subdifferential description also expose ``subgradient_residual`` so the
fixed-point identity theta - prox(theta) in df(prox(theta)) can be tested.

Two pairwise operators are provided for the coupled |x1 - x2| term:

* ``PairwisePhi`` applies the three-branch scalar map ``phi`` to each
  component against the other.  Inside the dead zone this *swaps* the
  components; it is not the exact joint prox there.
* ``PairwiseExact`` is the exact joint prox: it preserves the mean and
  soft-thresholds the difference.

Both are nonexpansive; which one a scenario uses is a config choice.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch


def phi(x1, x2):
    """Three-branch soft-threshold of x1 toward x2 with unit width.

    Returns x1 - 1 if x1 > x2 + 1, x1 + 1 if x1 < x2 - 1, and exactly x2
    in between (boundaries included).  Accepts scalars or arrays.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    out = np.where(x1 > x2 + 1.0, x1 - 1.0, np.where(x1 < x2 - 1.0, x1 + 1.0, x2))
    if out.ndim == 0:
        return float(out)
    return out


def soft_threshold(theta, anchor, weight):
    """Componentwise shrink of theta toward anchor by weight."""
    theta = np.asarray(theta, dtype=float)
    diff = theta - anchor
    return anchor + np.sign(diff) * np.maximum(np.abs(diff) - weight, 0.0)


def project_ball(theta, center, radius):
    """Euclidean projection onto the closed ball ||x - center|| <= radius."""
    theta = np.asarray(theta, dtype=float)
    diff = theta - center
    nrm = float(np.linalg.norm(diff))
    if nrm <= radius:
        return theta.copy()
    return center + (radius / nrm) * diff


def project_box(theta, lower, upper):
    """Componentwise clip onto [lower, upper]."""
    return np.clip(np.asarray(theta, dtype=float), lower, upper)


class NonsmoothTerm:
    """Base class for proximable nonsmooth terms.

    Subclasses set ``dim`` (or None when any dimension is accepted) and
    ``indicator`` (True for set-membership terms whose value is 0/+inf).
    """

    kind: str = "abstract"
    dim: Optional[int] = None
    indicator: bool = False

    def prox(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, x: np.ndarray, atol: float = 1e-9) -> float:
        raise NotImplementedError

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        """A subgradient at x for the oracle; indicator terms return 0."""
        raise NotImplementedError

    def subgradient_residual(self, delta, g) -> Optional[float]:
        """Distance from g to the subdifferential at delta, or None when
        the term has no membership test."""
        return None

    def project(self, x: np.ndarray) -> np.ndarray:
        """Projection onto the term's domain (identity for finite terms)."""
        return np.asarray(x, dtype=float).copy()

    def check_dim(self, q: int):
        if self.dim is not None and self.dim != q:
            raise DimensionMismatch(f"{self.kind} term has dim {self.dim}, expected {q}")


@dataclass
class L1Anchor(NonsmoothTerm):
    """weight * ||x - anchor||_1; prox is the componentwise soft threshold."""

    anchor: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)
        if self.weight <= 0:
            raise ValueError("l1_anchor weight must be positive")
        self.kind = "l1_anchor"
        self.dim = self.anchor.shape[0]

    def prox(self, theta):
        return soft_threshold(theta, self.anchor, self.weight)

    def value(self, x, atol=1e-9):
        return self.weight * float(np.abs(np.asarray(x) - self.anchor).sum())

    def subgradient(self, x):
        return self.weight * np.sign(np.asarray(x, dtype=float) - self.anchor)

    def subgradient_residual(self, delta, g):
        diff = np.asarray(delta) - self.anchor
        g = np.asarray(g, dtype=float)
        on_kink = diff == 0.0
        res = np.where(on_kink, np.maximum(np.abs(g) - self.weight, 0.0),
                       np.abs(g - self.weight * np.sign(diff)))
        return float(np.linalg.norm(res))


class PairwisePhi(NonsmoothTerm):
    """|x1 - x2| on R^2 with the componentwise three-branch prox surrogate
    [phi(t1, t2), phi(t2, t1)].  Matches the exact prox outside the dead
    zone; inside it swaps components instead of averaging, so no
    subdifferential witness is provided."""

    kind = "pairwise_phi"
    dim = 2
    indicator = False

    def prox(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2,):
            raise DimensionMismatch("pairwise_phi needs a 2-vector")
        return np.array([phi(theta[0], theta[1]), phi(theta[1], theta[0])])

    def value(self, x, atol=1e-9):
        return float(abs(x[0] - x[1]))

    def subgradient(self, x):
        s = float(np.sign(x[0] - x[1]))
        return np.array([s, -s])


@dataclass
class PairwiseExact(NonsmoothTerm):
    """weight * |x1 - x2| with its exact joint prox: the mean is preserved
    and the difference is soft-thresholded by 2*weight."""

    weight: float = 1.0

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("pairwise weight must be positive")
        self.kind = "pairwise_exact"
        self.dim = 2

    def prox(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2,):
            raise DimensionMismatch("pairwise_exact needs a 2-vector")
        mean = 0.5 * (theta[0] + theta[1])
        u = theta[0] - theta[1]
        u = np.sign(u) * max(abs(u) - 2.0 * self.weight, 0.0)
        return np.array([mean + 0.5 * u, mean - 0.5 * u])

    def value(self, x, atol=1e-9):
        return self.weight * float(abs(x[0] - x[1]))

    def subgradient(self, x):
        s = self.weight * float(np.sign(x[0] - x[1]))
        return np.array([s, -s])

    def subgradient_residual(self, delta, g):
        g = np.asarray(g, dtype=float)
        d = float(delta[0] - delta[1])
        if d != 0.0:
            t = self.weight * np.sign(d)
        else:
            t = np.clip((g[0] - g[1]) / 2.0, -self.weight, self.weight)
        return float(np.linalg.norm(g - np.array([t, -t])))


@dataclass
class BallIndicator(NonsmoothTerm):
    """Indicator of the closed Euclidean ball; prox is the projection."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        self.kind = "ball_indicator"
        self.dim = self.center.shape[0]
        self.indicator = True

    def prox(self, theta):
        return project_ball(theta, self.center, self.radius)

    def value(self, x, atol=1e-9):
        dist = float(np.linalg.norm(np.asarray(x) - self.center))
        return 0.0 if dist <= self.radius + atol else np.inf

    def subgradient(self, x):
        return np.zeros_like(self.center)

    def project(self, x):
        return project_ball(x, self.center, self.radius)

    def subgradient_residual(self, delta, g):
        # normal cone: {0} inside, nonnegative outward rays on the boundary
        g = np.asarray(g, dtype=float)
        diff = np.asarray(delta) - self.center
        dist = float(np.linalg.norm(diff))
        boundary_tol = 1e-9 * (1.0 + self.radius)
        if dist > self.radius + boundary_tol:
            return np.inf
        if dist < self.radius - boundary_tol:
            return float(np.linalg.norm(g))
        u = diff / dist
        t = max(float(g @ u), 0.0)
        return float(np.linalg.norm(g - t * u))


@dataclass
class BoxIndicator(NonsmoothTerm):
    """Indicator of the box [lower, upper]; prox is the clip."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise DimensionMismatch("box bounds must share a shape")
        if np.any(self.lower > self.upper):
            raise ValueError("box has lower > upper")
        self.kind = "box_indicator"
        self.dim = self.lower.shape[0]
        self.indicator = True

    def prox(self, theta):
        return project_box(theta, self.lower, self.upper)

    def value(self, x, atol=1e-9):
        x = np.asarray(x, dtype=float)
        inside = np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol)
        return 0.0 if inside else np.inf

    def subgradient(self, x):
        return np.zeros_like(self.lower)

    def project(self, x):
        return project_box(x, self.lower, self.upper)

    def subgradient_residual(self, delta, g):
        delta = np.asarray(delta, dtype=float)
        g = np.asarray(g, dtype=float)
        tol = 1e-9 * (1.0 + np.abs(self.upper - self.lower))
        if np.any(delta < self.lower - tol) or np.any(delta > self.upper + tol):
            return np.inf
        res = np.empty_like(g)
        for k in range(g.shape[0]):
            at_lo = delta[k] <= self.lower[k] + tol[k]
            at_hi = delta[k] >= self.upper[k] - tol[k]
            if at_lo and at_hi:
                res[k] = 0.0
            elif at_hi:
                res[k] = max(-g[k], 0.0)
            elif at_lo:
                res[k] = max(g[k], 0.0)
            else:
                res[k] = abs(g[k])
        return float(np.linalg.norm(res))


class ZeroTerm(NonsmoothTerm):
    """The constant-zero term; its prox is the identity."""

    kind = "zero"
    dim = None

    def prox(self, theta):
        return np.asarray(theta, dtype=float).copy()

    def value(self, x, atol=1e-9):
        return 0.0

    def subgradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def subgradient_residual(self, delta, g):
        return float(np.linalg.norm(g))


@dataclass
class CustomTerm(NonsmoothTerm):
    """User-supplied prox operator.  ``evaluate`` maps a q-vector to the
    prox output; optional handles supply the value, a subgradient, the
    membership residual, and a domain projection.  Run ``validate_prox``
    on custom terms before trusting them in a flow.
    """

    q: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    value_fn: Optional[Callable[[np.ndarray], float]] = None
    subgradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    witness_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    project_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    is_indicator: bool = False

    def __post_init__(self):
        self.kind = "custom"
        self.dim = self.q
        self.indicator = self.is_indicator

    def prox(self, theta):
        out = np.asarray(self.evaluate(np.asarray(theta, dtype=float)), dtype=float)
        if out.shape != (self.q,):
            raise DimensionMismatch("custom prox returned wrong shape")
        return out

    def value(self, x, atol=1e-9):
        if self.value_fn is None:
            return 0.0
        return float(self.value_fn(np.asarray(x, dtype=float)))

    def subgradient(self, x):
        if self.subgradient_fn is None:
            return np.zeros(self.q)
        return np.asarray(self.subgradient_fn(np.asarray(x, dtype=float)), dtype=float)

    def subgradient_residual(self, delta, g):
        if self.witness_fn is None:
            return None
        return float(self.witness_fn(np.asarray(delta, dtype=float), np.asarray(g, dtype=float)))

    def project(self, x):
        if self.project_fn is None:
            return np.asarray(x, dtype=float).copy()
        return np.asarray(self.project_fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class ProxValidationReport:
    """Outcome of sampling-based prox checks."""

    n_pairs: int
    max_nonexpansive_violation: float
    max_fixed_point_residual: Optional[float]
    tol: float = 1e-9

    @property
    def passed(self) -> bool:
        if self.max_nonexpansive_violation > self.tol:
            return False
        if self.max_fixed_point_residual is not None and self.max_fixed_point_residual > self.tol:
            return False
        return True


def validate_prox(op: NonsmoothTerm, samples) -> ProxValidationReport:
    """Check nonexpansiveness over sample pairs and, where the term
    carries a subdifferential witness, the fixed-point identity
    theta - prox(theta) in df(prox(theta)).
    """
    samples = list(samples)
    if not samples:
        raise ValueError("validate_prox needs at least one sample pair")
    worst_ne = 0.0
    worst_fp = None
    for a, b in samples:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        pa, pb = op.prox(a), op.prox(b)
        viol = float(np.linalg.norm(pa - pb) - np.linalg.norm(a - b))
        worst_ne = max(worst_ne, viol)
        for theta, delta in ((a, pa), (b, pb)):
            res = op.subgradient_residual(delta, theta - delta)
            if res is not None:
                worst_fp = res if worst_fp is None else max(worst_fp, res)
    return ProxValidationReport(
        n_pairs=len(samples),
        max_nonexpansive_violation=worst_ne,
        max_fixed_point_residual=worst_fp,
    )


# ---------------------------------------------------------------------------
# Stacked evaluation: one vectorized call over all agents in a term slot.

class _LoopSlot:
    def __init__(self, terms):
        self.terms = terms
        self.indicator = all(t.indicator for t in terms)

    def prox(self, thetas):
        return np.stack([t.prox(thetas[i]) for i, t in enumerate(self.terms)])

    def value(self, xs, atol=1e-9):
        return np.array([t.value(xs[i], atol) for i, t in enumerate(self.terms)])

    def subgrad(self, xs):
        return np.stack([t.subgradient(xs[i]) for i, t in enumerate(self.terms)])

    def project(self, xs):
        return np.stack([t.project(xs[i]) for i, t in enumerate(self.terms)])


class _StackedSlot:
    def __init__(self, prox_fn, value_fn, subgrad_fn, indicator):
        self._prox = prox_fn
        self._value = value_fn
        self._subgrad = subgrad_fn
        self.indicator = indicator

    def prox(self, thetas):
        return self._prox(thetas)

    def value(self, xs, atol=1e-9):
        return self._value(xs, atol)

    def subgrad(self, xs):
        return self._subgrad(xs)

    def project(self, xs):
        # for indicator terms the prox *is* the projection; finite terms
        # impose no domain constraint
        return self._prox(xs) if self.indicator else xs.copy()


def stack_terms(terms):
    """Build a slot evaluator over all agents' terms at one position.

    When every agent uses the same built-in kind the slot evaluates as a
    single vectorized numpy expression over the (n, q) block; otherwise it
    falls back to a per-agent loop.  Results are identical either way.
    """
    first = type(terms[0])
    if not all(type(t) is first for t in terms):
        return _LoopSlot(terms)

    if first is L1Anchor:
        anchors = np.stack([t.anchor for t in terms])
        lam = np.array([t.weight for t in terms])[:, None]

        def prox_fn(thetas):
            diff = thetas - anchors
            return anchors + np.sign(diff) * np.maximum(np.abs(diff) - lam, 0.0)

        def value_fn(xs, atol):
            return (lam[:, 0]) * np.abs(xs - anchors).sum(axis=1)

        def subgrad_fn(xs):
            return lam * np.sign(xs - anchors)

        return _StackedSlot(prox_fn, value_fn, subgrad_fn, False)

    if first is PairwisePhi:

        def prox_fn(thetas):
            return np.column_stack([phi(thetas[:, 0], thetas[:, 1]),
                                    phi(thetas[:, 1], thetas[:, 0])])

        def value_fn(xs, atol):
            return np.abs(xs[:, 0] - xs[:, 1])

        def subgrad_fn(xs):
            sgn = np.sign(xs[:, 0] - xs[:, 1])
            return np.column_stack([sgn, -sgn])

        return _StackedSlot(prox_fn, value_fn, subgrad_fn, False)

    if first is PairwiseExact:
        w = np.array([t.weight for t in terms])

        def prox_fn(thetas):
            mean = 0.5 * (thetas[:, 0] + thetas[:, 1])
            u = thetas[:, 0] - thetas[:, 1]
            u = np.sign(u) * np.maximum(np.abs(u) - 2.0 * w, 0.0)
            return np.column_stack([mean + 0.5 * u, mean - 0.5 * u])

        def value_fn(xs, atol):
            return w * np.abs(xs[:, 0] - xs[:, 1])

        def subgrad_fn(xs):
            sgn = w * np.sign(xs[:, 0] - xs[:, 1])
            return np.column_stack([sgn, -sgn])

        return _StackedSlot(prox_fn, value_fn, subgrad_fn, False)

    if first is BallIndicator:
        centers = np.stack([t.center for t in terms])
        radii = np.array([t.radius for t in terms])

        def prox_fn(thetas):
            diff = thetas - centers
            nrm = np.linalg.norm(diff, axis=1)
            scale = np.where(nrm > radii, radii / np.maximum(nrm, 1e-300), 1.0)
            return centers + scale[:, None] * diff

        def value_fn(xs, atol):
            dist = np.linalg.norm(xs - centers, axis=1)
            return np.where(dist <= radii + atol, 0.0, np.inf)

        def subgrad_fn(xs):
            return np.zeros_like(xs)

        return _StackedSlot(prox_fn, value_fn, subgrad_fn, True)

    if first is BoxIndicator:
        lo = np.stack([t.lower for t in terms])
        hi = np.stack([t.upper for t in terms])

        def prox_fn(thetas):
            return np.clip(thetas, lo, hi)

        def value_fn(xs, atol):
            inside = np.all(xs >= lo - atol, axis=1) & np.all(xs <= hi + atol, axis=1)
            return np.where(inside, 0.0, np.inf)

        def subgrad_fn(xs):
            return np.zeros_like(xs)

        return _StackedSlot(prox_fn, value_fn, subgrad_fn, True)

    if first is ZeroTerm:
        return _StackedSlot(lambda thetas: thetas.copy(),
                            lambda xs, atol: np.zeros(xs.shape[0]),
                            lambda xs: np.zeros_like(xs), False)

    return _LoopSlot(terms)
