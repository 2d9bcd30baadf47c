"""Scenario documents: a single versioned JSON object describing the
graph, the agents (smooth cost, term list, resource vector), flow
parameters (explicit or "auto"), the integrator setup, and the run mode.

Validation errors carry the offending field path, e.g.
``agents[2].terms[0].anchor: expected a list of 2 numbers``.

Graph convention (documented here and in the README): in a weight matrix,
entry (i, j) is the weight with which node i receives from node j; an edge
object {"from": j, "to": i, "weight": w} sets that same entry.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .graph import Digraph
from .integrator import IntegratorConfig
from .problem import (AgentSpec, FlowParams, NetworkProblem, QuadraticCost,
                      beta_window, check_params, suggest_params)
from .prox import (BallIndicator, BoxIndicator, L1Anchor, PairwiseExact,
                   PairwisePhi, ZeroTerm)

SCHEMA_VERSION = 1
MODES = ("known_h", "estimator", "both")

_TERM_KINDS = ("l1_anchor", "pairwise_phi", "pairwise_exact",
               "ball_indicator", "box_indicator", "zero")


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _get(obj, key, path, required=True, default=None):
    if key not in obj:
        if required:
            _fail(f"{path}.{key}" if path else key, "missing")
        return default
    return obj[key]


def _number(val, path, positive=False, nonnegative=False):
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        _fail(path, "expected a number")
    v = float(val)
    if positive and v <= 0:
        _fail(path, "must be positive")
    if nonnegative and v < 0:
        _fail(path, "must be nonnegative")
    return v


def _vector(val, path, dim=None):
    if not isinstance(val, list) or not all(
            isinstance(u, (int, float)) and not isinstance(u, bool) for u in val):
        _fail(path, "expected a list of numbers")
    if dim is not None and len(val) != dim:
        _fail(path, f"expected {dim} numbers, got {len(val)}")
    return np.array(val, dtype=float)


def _parse_graph(doc, path="graph"):
    if not isinstance(doc, dict):
        _fail(path, "expected an object with 'weights' or 'n'+'edges'")
    if "weights" in doc:
        w = doc["weights"]
        if not isinstance(w, list) or not w:
            _fail(f"{path}.weights", "expected a nonempty matrix")
        n = len(w)
        rows = [_vector(r, f"{path}.weights[{i}]", n) for i, r in enumerate(w)]
        try:
            return Digraph(np.stack(rows))
        except ValueError as e:
            _fail(f"{path}.weights", str(e))
    if "edges" in doc:
        n = _get(doc, "n", path)
        if not isinstance(n, int) or n < 1:
            _fail(f"{path}.n", "expected a positive integer")
        mat = np.zeros((n, n))
        for k, e in enumerate(doc["edges"]):
            ep = f"{path}.edges[{k}]"
            src = _get(e, "from", ep)
            dst = _get(e, "to", ep)
            wt = _number(_get(e, "weight", ep, required=False, default=1.0),
                         f"{ep}.weight", positive=True)
            for name, v in (("from", src), ("to", dst)):
                if not isinstance(v, int) or not 0 <= v < n:
                    _fail(f"{ep}.{name}", f"expected a node index in [0, {n})")
            mat[dst, src] = wt
        try:
            return Digraph(mat)
        except ValueError as e:
            _fail(f"{path}.edges", str(e))
    _fail(path, "needs either 'weights' or 'n' + 'edges'")


def _parse_term(doc, q, path):
    if not isinstance(doc, dict):
        _fail(path, "expected an object with a 'kind'")
    kind = _get(doc, "kind", path)
    if kind not in _TERM_KINDS:
        _fail(f"{path}.kind", f"unknown kind {kind!r}; one of {_TERM_KINDS}")
    if kind == "l1_anchor":
        anchor = _vector(_get(doc, "anchor", path), f"{path}.anchor", q)
        weight = _number(_get(doc, "weight", path, required=False, default=1.0),
                         f"{path}.weight", positive=True)
        return L1Anchor(anchor=anchor, weight=weight)
    if kind == "pairwise_phi":
        if q != 2:
            _fail(path, f"pairwise_phi needs q = 2, agent has q = {q}")
        return PairwisePhi()
    if kind == "pairwise_exact":
        if q != 2:
            _fail(path, f"pairwise_exact needs q = 2, agent has q = {q}")
        weight = _number(_get(doc, "weight", path, required=False, default=1.0),
                         f"{path}.weight", positive=True)
        return PairwiseExact(weight=weight)
    if kind == "ball_indicator":
        center = _vector(_get(doc, "center", path), f"{path}.center", q)
        radius = _number(_get(doc, "radius", path), f"{path}.radius", positive=True)
        return BallIndicator(center=center, radius=radius)
    if kind == "box_indicator":
        lower = _vector(_get(doc, "lower", path), f"{path}.lower", q)
        upper = _vector(_get(doc, "upper", path), f"{path}.upper", q)
        if np.any(lower > upper):
            _fail(path, "box has lower > upper")
        return BoxIndicator(lower=lower, upper=upper)
    return ZeroTerm()


def _parse_agent(doc, path):
    if not isinstance(doc, dict):
        _fail(path, "expected an object")
    d = _vector(_get(doc, "d", path), f"{path}.d")
    q = d.shape[0]
    f0 = _get(doc, "f0", path)
    if not isinstance(f0, dict) or f0.get("kind") != "quadratic":
        _fail(f"{path}.f0", "only {'kind': 'quadratic', 'scale', 'center'} is supported in configs")
    scale = _number(_get(f0, "scale", f"{path}.f0"), f"{path}.f0.scale", positive=True)
    center = _vector(_get(f0, "center", f"{path}.f0"), f"{path}.f0.center", q)
    cost = QuadraticCost(scale=scale, center=center)
    terms_doc = _get(doc, "terms", path)
    if not isinstance(terms_doc, list) or len(terms_doc) < 2:
        _fail(f"{path}.terms", "expected a list of at least two terms (m >= 2)")
    terms = [_parse_term(t, q, f"{path}.terms[{j}]") for j, t in enumerate(terms_doc)]
    return AgentSpec.quadratic(cost, terms, d)


@dataclass
class Scenario:
    """Parsed scenario: the problem, the resolved parameters, the
    integrator setup, the initial state blocks, and the raw/normalized
    documents."""

    name: str
    seed: int
    problem: NetworkProblem
    params: FlowParams
    params_source: str              # "auto" | "explicit"
    integrator: IntegratorConfig
    mode: str
    x0: np.ndarray
    z0: Optional[np.ndarray]
    v0: Optional[np.ndarray]
    oracle: Optional[dict]
    agreement_tol: float
    normalized: dict

    @property
    def params_valid(self) -> bool:
        """Algorithm-level requirements (as opposed to the sufficient
        convergence inequalities): gamma inside its open interval and a
        positive consensus gain."""
        m = self.problem.m
        return (0.0 < self.params.gamma < 1.0 / (m - 1)) and self.params.alpha > 0


def _resolve_params(doc, problem, path="params"):
    if doc == "auto":
        return suggest_params(problem), "auto"
    if not isinstance(doc, dict):
        _fail(path, "expected 'auto' or an object with alpha/gamma")
    alpha = _number(_get(doc, "alpha", path), f"{path}.alpha")
    gamma = _number(_get(doc, "gamma", path), f"{path}.gamma")
    beta = doc.get("beta")
    eta = doc.get("eta")
    if beta is None:
        lo, hi = beta_window(problem.c, gamma, problem.m)
        beta = 0.5 * (lo + hi) if lo < hi else 1.0
    else:
        beta = _number(beta, f"{path}.beta", positive=True)
    if eta is None:
        b2 = problem.c - 0.5 * (1.0 + gamma) * (problem.m - 1) / beta
        if b2 > 0:
            thr = max(1.0 / (b2 * problem.spectral.h_star) - 1.0, 0.0)
            eta = 1.1 * thr if thr > 0 else 1.0
        else:
            eta = 1.0
    else:
        eta = _number(eta, f"{path}.eta", positive=True)
    return check_params(problem, alpha, gamma, eta, beta), "explicit"


def parse_scenario(doc: dict) -> Scenario:
    """Validate a scenario document and build every runtime object."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario: expected a JSON object")
    schema = _get(doc, "schema", "")
    if schema != SCHEMA_VERSION:
        _fail("schema", f"expected {SCHEMA_VERSION}, got {schema!r}")
    name = doc.get("name", "scenario")
    if not isinstance(name, str) or not name:
        _fail("name", "expected a nonempty string")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        _fail("seed", "expected an integer")

    graph = _parse_graph(_get(doc, "graph", ""))
    agents_doc = _get(doc, "agents", "")
    if not isinstance(agents_doc, list) or not agents_doc:
        _fail("agents", "expected a nonempty list")
    agents = [_parse_agent(a, f"agents[{i}]") for i, a in enumerate(agents_doc)]
    try:
        problem = NetworkProblem(agents, graph)
    except Exception as e:
        raise ConfigError(f"problem: {e}") from e

    params, params_source = _resolve_params(_get(doc, "params", ""), problem)

    integ_doc = doc.get("integrator", {})
    if not isinstance(integ_doc, dict):
        _fail("integrator", "expected an object")
    try:
        integ = IntegratorConfig(
            method=integ_doc.get("method", "euler"),
            step=integ_doc.get("step", 1e-3),
            t_end=integ_doc.get("t_end", 50.0),
            stop_tol=integ_doc.get("stop_tol", 1e-6),
            record_every=integ_doc.get("record_every", 1),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError(f"integrator: {e}") from e

    mode = doc.get("mode", "known_h")
    if mode not in MODES:
        _fail("mode", f"expected one of {MODES}")

    n, q, m = problem.n, problem.q, problem.m
    init = doc.get("initial", {})
    if not isinstance(init, dict):
        _fail("initial", "expected an object")
    x0 = np.zeros((n, q))
    if "x" in init:
        rows = init["x"]
        if not isinstance(rows, list) or len(rows) != n:
            _fail("initial.x", f"expected {n} rows")
        x0 = np.stack([_vector(r, f"initial.x[{i}]", q) for i, r in enumerate(rows)])
    v0 = None
    if "v" in init:
        rows = init["v"]
        if not isinstance(rows, list) or len(rows) != n:
            _fail("initial.v", f"expected {n} rows")
        v0 = np.stack([_vector(r, f"initial.v[{i}]", q) for i, r in enumerate(rows)])
    z0 = None
    if "z" in init:
        blocks = init["z"]
        if not isinstance(blocks, list) or len(blocks) != m - 1:
            _fail("initial.z", f"expected {m - 1} blocks")
        z0 = np.stack([
            np.stack([_vector(r, f"initial.z[{j}][{i}]", q) for i, r in enumerate(blk)])
            for j, blk in enumerate(blocks)])

    oracle = doc.get("oracle")
    if oracle is not None:
        if not isinstance(oracle, dict) or oracle.get("kind") not in ("grid", "subgradient"):
            _fail("oracle", "expected {'kind': 'grid'|'subgradient', ...}")
        if oracle["kind"] == "grid":
            _get(oracle, "bounds", "oracle")
            res = _get(oracle, "resolution", "oracle", required=False, default=100)
            if not isinstance(res, int) or res < 2:
                _fail("oracle.resolution", "expected an integer >= 2")
        else:
            iters = _get(oracle, "iters", "oracle", required=False, default=100000)
            if not isinstance(iters, int) or iters < 1:
                _fail("oracle.iters", "expected a positive integer")

    agreement_tol = _number(doc.get("agreement_tol", 1e-2), "agreement_tol",
                            positive=True)

    normalized = _normalize(doc, problem, params, params_source, integ, mode,
                            x0, z0, v0, oracle, agreement_tol, name, seed)
    return Scenario(name=name, seed=seed, problem=problem, params=params,
                    params_source=params_source, integrator=integ, mode=mode,
                    x0=x0, z0=z0, v0=v0, oracle=oracle,
                    agreement_tol=agreement_tol, normalized=normalized)


def _term_doc(term):
    if isinstance(term, L1Anchor):
        return {"kind": "l1_anchor", "anchor": term.anchor.tolist(),
                "weight": term.weight}
    if isinstance(term, PairwisePhi):
        return {"kind": "pairwise_phi"}
    if isinstance(term, PairwiseExact):
        return {"kind": "pairwise_exact", "weight": term.weight}
    if isinstance(term, BallIndicator):
        return {"kind": "ball_indicator", "center": term.center.tolist(),
                "radius": term.radius}
    if isinstance(term, BoxIndicator):
        return {"kind": "box_indicator", "lower": term.lower.tolist(),
                "upper": term.upper.tolist()}
    return {"kind": "zero"}


def _normalize(doc, problem, params, params_source, integ, mode, x0, z0, v0,
               oracle, agreement_tol, name, seed):
    agents = []
    for i, a in enumerate(problem.agents):
        f0 = doc["agents"][i]["f0"]
        agents.append({
            "d": a.d.tolist(),
            "f0": {"kind": "quadratic", "scale": float(f0["scale"]),
                   "center": list(map(float, f0["center"]))},
            "terms": [_term_doc(t) for t in a.terms],
        })
    out = {
        "schema": SCHEMA_VERSION,
        "name": name,
        "seed": seed,
        "graph": {"weights": problem.graph.weights.tolist()},
        "agents": agents,
        "params": "auto" if params_source == "auto" else {
            "alpha": params.alpha, "gamma": params.gamma,
            "eta": params.eta, "beta": params.beta,
        },
        "integrator": {
            "method": integ.method, "step": integ.step, "t_end": integ.t_end,
            "stop_tol": integ.stop_tol, "record_every": integ.record_every,
        },
        "mode": mode,
        "initial": {"x": x0.tolist()},
        "agreement_tol": agreement_tol,
    }
    if v0 is not None:
        out["initial"]["v"] = v0.tolist()
    if z0 is not None:
        out["initial"]["z"] = z0.tolist()
    if oracle is not None:
        out["oracle"] = oracle
    return out


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    return parse_scenario(doc)


def dumps_normalized(scenario: Scenario) -> str:
    return json.dumps(scenario.normalized, sort_keys=True, indent=2) + "\n"
