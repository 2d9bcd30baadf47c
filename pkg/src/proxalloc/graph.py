"""Weighted digraphs, their Laplacians, and the spectral quantities the
flows need: the positive left eigenvector h of L (h^T L = 0, sum h = 1)
and lambda_2 of the weighted symmetrization (H L + L^T H) / 2.

Convention: ``weights[i, j]`` is the weight of the edge j -> i, i.e. node i
receives information from node j.  The Laplacian is L = D_in - A with D_in
the diagonal of row sums.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NotStronglyConnected, NumericalFailure

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Digraph:
    """Weighted directed graph on n nodes.

    weights[i, j] >= 0 is the weight with which node i listens to node j;
    the diagonal must be zero.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if w.shape[0] < 1:
            raise ValueError("graph needs at least one node")
        if np.any(w < 0):
            raise ValueError("edge weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-loops (nonzero diagonal) are not allowed")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n, edges):
        """Build from an iterable of (from_node, to_node, weight) triples."""
        w = np.zeros((n, n))
        for src, dst, wt in edges:
            w[dst, src] = wt
        return cls(w)


@dataclass(frozen=True)
class SpectralData:
    """Laplacian plus the spectral quantities used by the parameter gate
    and the v-dynamics: left eigenvector h, its minimum h_star, and
    lambda2 of (H L + L^T H)/2.  ``balanced`` flags equal in/out degrees.
    """

    laplacian: np.ndarray
    h: np.ndarray
    h_star: float
    lambda2: float
    balanced: bool
    bold_l: np.ndarray = field(repr=False)


def laplacian(g: Digraph) -> np.ndarray:
    """L = D_in - A; every row sums to zero."""
    a = g.weights
    return np.diag(a.sum(axis=1)) - a


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def is_strongly_connected(g: Digraph) -> bool:
    """True iff every node reaches every other along edge directions.

    Information flows j -> i when weights[i, j] > 0, so following that
    flow from node 0 means sweeping rows; the reverse sweep uses columns.
    """
    a = g.weights > 0
    return bool(_reachable(a, 0).all() and _reachable(a.T, 0).all())


def spectral_data(g: Digraph, tol: float = DEFAULT_TOL) -> SpectralData:
    """Compute h, h*, lambda2 and the balancedness flag for a strongly
    connected digraph.

    h solves h^T L = 0 via a dense null-space computation (SVD) of L^T;
    the left null space must be one-dimensional within ``tol`` or
    NumericalFailure is raised.  lambda2 is the second-smallest eigenvalue
    of the symmetric matrix (H L + L^T H)/2; for a single node it is +inf
    (the consensus inequality is vacuous).
    """
    if not is_strongly_connected(g):
        raise NotStronglyConnected("spectral_data requires a strongly connected digraph")
    lap = laplacian(g)
    n = g.n
    scale = max(np.abs(lap).max(), 1.0)

    _, svals, vt = np.linalg.svd(lap.T)
    small = svals <= tol * scale
    if small.sum() != 1:
        raise NumericalFailure(
            f"left null space of L has dimension {int(small.sum())} within tol={tol}"
        )
    h = vt[-1]
    if abs(h.sum()) < 1e-12 * np.abs(h).sum():
        raise NumericalFailure("left eigenvector entries sum to ~0; cannot normalize")
    h = h / h.sum()
    if np.any(h <= 0):
        raise NumericalFailure("left eigenvector is not entrywise positive")

    bold = (h[:, None] * lap + lap.T * h[None, :]) / 2.0
    if n == 1:
        lam2 = np.inf
    else:
        eig = np.linalg.eigvalsh(bold)
        lam2 = float(eig[1])
    in_deg = g.weights.sum(axis=1)
    out_deg = g.weights.sum(axis=0)
    balanced = bool(np.allclose(in_deg, out_deg, rtol=0.0, atol=1e-12 * scale))
    return SpectralData(
        laplacian=lap,
        h=h,
        h_star=float(h.min()),
        lambda2=lam2,
        balanced=balanced,
        bold_l=bold,
    )
