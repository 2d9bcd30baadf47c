"""Orchestration shared by the HTTP service and the CLI: parameter
gating, flow execution, cross-mode/oracle comparison, and JSON-safe
report assembly.

Gate policy: gamma outside its open interval (or a nonpositive alpha)
breaks the algorithm itself and blocks a run unless forced; parameter
sets that merely miss the sufficient convergence inequalities produce a
warning and run anyway (they may still converge -- the inequalities are
not necessary).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import Scenario, dumps_normalized
from .dynamics import initial_state
from .errors import EstimatorSingular, NonFiniteState, ProxAllocError
from .integrator import integrate, summarize, trajectory_to_csv
from .oracle import solve_grid, solve_subgradient
from .problem import validate_assumptions

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def json_safe(obj):
    """Replace non-finite floats (invalid in strict JSON) by strings."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return json_safe(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _params_dict(scn: Scenario) -> dict:
    pr = scn.params
    return {
        "source": scn.params_source,
        "alpha": pr.alpha, "gamma": pr.gamma, "eta": pr.eta, "beta": pr.beta,
        "b1": pr.b1, "b2": pr.b2,
        "feasible": pr.feasible,
        "valid": scn.params_valid,
        "margins": dict(pr.margins),
    }


def _gate(scn: Scenario, force: bool):
    """Returns (error, warnings) per the gate policy above."""
    warnings = []
    if not scn.params_valid:
        msg = (f"invalid flow parameters: need 0 < gamma < 1/(m-1) = "
               f"{1.0 / (scn.problem.m - 1):.6g} and alpha > 0 "
               f"(got gamma={scn.params.gamma:.6g}, alpha={scn.params.alpha:.6g})")
        if not force:
            return msg, warnings
        warnings.append(msg + " -- forced")
    elif not scn.params.feasible:
        bad = [k for k, v in scn.params.margins.items() if v <= 0]
        warnings.append(
            "parameters do not satisfy the sufficient convergence "
            f"inequalities (nonpositive margins: {', '.join(bad)}); "
            "running anyway")
    return None, warnings


def check_scenario(scn: Scenario) -> dict:
    """Assumption report, spectral data, and parameter margins -- no run."""
    rep = validate_assumptions(scn.problem, seed=scn.seed)
    sp = scn.problem.spectral
    agents = []
    for i, ar in enumerate(rep.agents):
        agents.append({
            "agent": i,
            "c": ar.c, "m": ar.m,
            "c_exceeds_m_minus_1": ar.c_ok,
            "suggested_scaling_K_above": ar.suggested_scaling,
            "spot_check_min_ratio": ar.spot_check_min_ratio,
            "spot_check_ok": ar.spot_check_ok,
        })
    _, warnings = _gate(scn, force=True)
    return {
        "name": scn.name,
        "assumptions": {
            "strongly_connected": rep.strongly_connected,
            "agents": agents,
            "passed": rep.passed,
        },
        "spectral": {
            "h": sp.h.tolist(),
            "h_star": sp.h_star,
            "lambda2": sp.lambda2,
            "balanced": sp.balanced,
        },
        "params": _params_dict(scn),
        "warnings": warnings,
        "normalized": scn.normalized,
    }


@dataclass
class RunArtifact:
    mode: str
    status: str
    summary: dict
    csv: str
    final_x: np.ndarray


@dataclass
class Outcome:
    name: str
    exit_code: int
    warnings: list = field(default_factory=list)
    error: Optional[str] = None
    runs: list = field(default_factory=list)
    compare: Optional[dict] = None


def _modes(scn: Scenario, override: Optional[str]) -> list:
    mode = override or scn.mode
    return ["known_h", "estimator"] if mode == "both" else [mode]


def _execute(scn: Scenario, mode: str) -> RunArtifact:
    s0 = initial_state(scn.problem, x0=scn.x0, z0=scn.z0, v0=scn.v0,
                       estimator=(mode == "estimator"))
    try:
        tr = integrate(scn.problem, scn.params, s0, scn.integrator, mode)
    except NonFiniteState as e:
        tr = e.trajectory
    summ = summarize(tr)
    return RunArtifact(mode=mode, status=tr.status,
                       summary=json_safe(summ.to_dict()),
                       csv=trajectory_to_csv(tr),
                       final_x=tr.final_state.x)


def run_scenario(scn: Scenario, mode: Optional[str] = None,
                 force: bool = False) -> Outcome:
    """Run the configured flow(s); exit 0 when every run converged,
    2 when some hit the horizon, 1 on errors (gate or divergence)."""
    err, warnings = _gate(scn, force)
    out = Outcome(name=scn.name, exit_code=EXIT_OK, warnings=warnings)
    if err is not None:
        out.error = err
        out.exit_code = EXIT_ERROR
        return out
    for mode_i in _modes(scn, mode):
        try:
            art = _execute(scn, mode_i)
        except (EstimatorSingular, ProxAllocError) as e:
            out.error = f"{mode_i}: {type(e).__name__}: {e}"
            out.exit_code = EXIT_ERROR
            return out
        out.runs.append(art)
        if art.status == "diverged":
            out.error = f"{mode_i}: state diverged (non-finite); see summary"
            out.exit_code = EXIT_ERROR
        elif art.status != "converged" and out.exit_code == EXIT_OK:
            out.exit_code = EXIT_NOT_CONVERGED
    return out


def _run_oracle(scn: Scenario):
    spec = scn.oracle
    if spec["kind"] == "grid":
        res = solve_grid(scn.problem, spec["bounds"], spec.get("resolution", 100))
    else:
        res = solve_subgradient(scn.problem, scn.x0, spec.get("iters", 100000))
    cert = {k: v for k, v in res.certificate.items() if k != "best_trace"}
    return res, {
        "method": res.method,
        "F_star": res.F_star,
        "x_star": None if res.x_star is None else res.x_star.tolist(),
        "certificate": json_safe(cert),
    }


def compare_scenario(scn: Scenario, force: bool = False) -> Outcome:
    """Run both flow variants (or the configured single mode twice, which
    demonstrates determinism), optionally the oracle, and gate on the
    pairwise final-x distances against the agreement tolerance."""
    err, warnings = _gate(scn, force)
    out = Outcome(name=scn.name, exit_code=EXIT_OK, warnings=warnings)
    if err is not None:
        out.error = err
        out.exit_code = EXIT_ERROR
        return out

    modes = _modes(scn, None)
    if len(modes) == 1:
        modes = [modes[0], modes[0]]
    labels = []
    finals = []
    objectives = []
    for k, mode_i in enumerate(modes):
        try:
            art = _execute(scn, mode_i)
        except (EstimatorSingular, ProxAllocError) as e:
            out.error = f"{mode_i}: {type(e).__name__}: {e}"
            out.exit_code = EXIT_ERROR
            return out
        label = mode_i if modes.count(mode_i) == 1 else f"{mode_i}#{k + 1}"
        labels.append(label)
        finals.append(art.final_x)
        objectives.append(art.summary.get("final_objective"))
        if modes.count(mode_i) == 1 or k == 0:
            out.runs.append(art)
        if art.status == "diverged":
            out.error = f"{mode_i}: state diverged"
            out.exit_code = EXIT_ERROR
            return out

    oracle_report = None
    if scn.oracle is not None:
        try:
            res, oracle_report = _run_oracle(scn)
        except ProxAllocError as e:
            out.error = f"oracle: {type(e).__name__}: {e}"
            out.exit_code = EXIT_ERROR
            return out
        if res.x_star is not None:
            labels.append("oracle")
            finals.append(res.x_star)
            objectives.append(res.F_star)

    distances = {}
    gaps = {}
    worst = 0.0
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            key = f"{labels[i]}_vs_{labels[j]}"
            dist = float(np.linalg.norm(finals[i] - finals[j]))
            distances[key] = dist
            worst = max(worst, dist)
            oi, oj = objectives[i], objectives[j]
            if isinstance(oi, (int, float)) and isinstance(oj, (int, float)):
                gaps[key] = abs(float(oi) - float(oj))
    agreement = worst <= scn.agreement_tol
    out.compare = {
        "distances": distances,
        "objective_gaps": gaps,
        "max_distance": worst,
        "tolerance": scn.agreement_tol,
        "agreement": agreement,
        "oracle": oracle_report,
    }
    if out.exit_code == EXIT_OK and not agreement:
        out.exit_code = EXIT_NOT_CONVERGED
    return out


def summary_document(scn: Scenario, out: Outcome) -> dict:
    """The machine-readable document the CLI writes next to the CSVs."""
    doc = {
        "name": out.name,
        "exit_code": out.exit_code,
        "params": json_safe(_params_dict(scn)),
        "warnings": list(out.warnings),
        "error": out.error,
        "runs": [{"mode": r.mode, "status": r.status, "summary": r.summary}
                 for r in out.runs],
    }
    if out.compare is not None:
        doc["compare"] = json_safe(out.compare)
    return doc


__all__ = [
    "EXIT_OK", "EXIT_ERROR", "EXIT_NOT_CONVERGED",
    "check_scenario", "run_scenario", "compare_scenario",
    "summary_document", "json_safe", "dumps_normalized",
]
