"""Fixed-step explicit integration of either flow, with trajectory
recording and online monitors (objective, KKT residuals, the conservation
identity, estimator error, and a post-hoc Lyapunov trace referenced to the
final state).

The schemes are deterministic: identical inputs give byte-identical
trajectories.  Divergence (non-finite state) raises NonFiniteState with
the partial trajectory attached, so a caller can still summarize it.
"""

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import FlowState, RhsOutput, rhs_estimator, rhs_known_h
from .errors import NonFiniteState, ValueUnavailable
from .problem import FlowParams, NetworkProblem, kkt_residual, objective

MODES = ("known_h", "estimator")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "euler"
    step: float = 1e-3
    t_end: float = 50.0
    stop_tol: float = 1e-6
    record_every: int = 1

    def __post_init__(self):
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.t_end < self.step:
            raise ValueError("t_end must be at least one step")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class MonitorRecord:
    F_value: Optional[float]
    r_x: float
    r_z: float
    r_feas: float
    r_cons: float
    conservation: float
    sup_norm: float
    y_error: Optional[float] = None
    lyapunov: Optional[float] = None


@dataclass
class Trajectory:
    mode: str
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    status: str = "horizon"          # converged | horizon | diverged
    t_converged: Optional[float] = None

    @property
    def final_state(self) -> FlowState:
        return self.states[-1]

    @property
    def final_monitor(self) -> MonitorRecord:
        return self.monitors[-1]


def _step_euler(rhs_fn, s, dt, rhs0):
    # in place: the integrate loop owns its working state and records copies
    s.x += dt * rhs0.dx
    s.z += dt * rhs0.dz
    s.v += dt * rhs0.dv
    s.w += dt * rhs0.dw
    if s.y is not None:
        s.y += dt * rhs0.dy
    return s


def _step_rk4(rhs_fn, s, dt, rhs0):
    k1 = rhs0
    k2 = rhs_fn(s.axpy(dt / 2.0, k1))
    k3 = rhs_fn(s.axpy(dt / 2.0, k2))
    k4 = rhs_fn(s.axpy(dt, k3))
    combo = RhsOutput.combine([k1, k2, k3, k4],
                              [1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6])
    return s.axpy(dt, combo)


def integrate(p: NetworkProblem, params: FlowParams, s0: FlowState,
              cfg: IntegratorConfig, mode: str = "known_h") -> Trajectory:
    """Advance the chosen flow from s0, recording samples every
    ``record_every`` steps plus the final state.  Stops at t_end or as
    soon as the derivative sup-norm drops below ``stop_tol``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if np.any(s0.w != 0.0):
        raise ValueError("the integral state w must start at zero")
    s = s0.copy()
    if mode == "estimator" and s.y is None:
        s.y = np.eye(p.n)

    if mode == "estimator":
        rhs_fn = lambda st: rhs_estimator(p, params, st)
    else:
        rhs_fn = lambda st: rhs_known_h(p, params, st)
    stepper = _step_rk4 if cfg.method == "rk4" else _step_euler

    has_values = all(a.f0_value is not None for a in p.agents)
    h = p.spectral.h

    def monitor(state, rhs):
        f_val = objective(p, state.x) if has_values else None
        res = kkt_residual(p, state, params)
        cons = float(np.linalg.norm(h @ state.w))
        y_err = None
        if state.y is not None:
            y_err = float(np.linalg.norm(state.y - np.outer(np.ones(p.n), h)))
        return MonitorRecord(F_value=f_val, r_x=res.r_x, r_z=res.r_z,
                             r_feas=res.r_feas, r_cons=res.r_cons,
                             conservation=cons, sup_norm=rhs.sup_norm,
                             y_error=y_err)

    tr = Trajectory(mode=mode)
    n_steps = int(round(cfg.t_end / cfg.step))
    t = 0.0
    rhs0 = rhs_fn(s)
    tr.times.append(t)
    tr.states.append(s.copy())
    tr.monitors.append(monitor(s, rhs0))

    # divergence rides on the derivative sup-norm: a non-finite state
    # poisons it (NaN/inf) within one evaluation
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            if rhs0.sup_norm < cfg.stop_tol:
                tr.status = "converged"
                tr.t_converged = t
                break
            s = stepper(rhs_fn, s, cfg.step, rhs0)
            t = (k + 1) * cfg.step
            rhs0 = rhs_fn(s)
            if not rhs0.sup_norm < np.inf:
                tr.status = "diverged"
                err = NonFiniteState(
                    f"state became non-finite around t={t:.6g}; reduce the "
                    "step or fix the parameters")
                err.trajectory = tr
                raise err
            if (k + 1) % cfg.record_every == 0 or k == n_steps - 1:
                tr.times.append(t)
                tr.states.append(s.copy())
                tr.monitors.append(monitor(s, rhs0))
        else:
            if rhs0.sup_norm < cfg.stop_tol:
                tr.status = "converged"
                tr.t_converged = t

    if tr.status == "converged" and tr.times[-1] < t:
        tr.times.append(t)
        tr.states.append(s.copy())
        tr.monitors.append(monitor(s, rhs0))

    if has_values:
        ref = tr.final_state
        for state, mon in zip(tr.states, tr.monitors):
            mon.lyapunov = lyapunov_value(p, params, state, ref)
    return tr


def lyapunov_value(p: NetworkProblem, params: FlowParams, s: FlowState,
                   ref: FlowState) -> float:
    """Energy of the deviation from a reference (candidate equilibrium):

        V1 = (eta+1) [ 0.5 ||dx||^2
                       + 0.5 gamma sum_j (||dz_j||^2 - 2 dx . dz_j) ]
        V2 = (eta+1) [ F0(x) - F0(ref) - dx . grad F0(ref) ]
        V3 = eta/2 dv^T H dv + 0.5 (dv+dw)^T H (dv+dw)

    Nonnegative whenever gamma < 1/(m-1); zero at the reference itself.
    """
    if any(a.f0_value is None for a in p.agents):
        raise ValueUnavailable("lyapunov_value needs every agent's f0 value handle")
    eta, gamma = params.eta, params.gamma
    h = p.spectral.h
    xb = (s.x - ref.x).ravel()
    v1 = 0.5 * float(xb @ xb)
    for j in range(p.m - 1):
        zb = (s.z[j] - ref.z[j]).ravel()
        v1 += 0.5 * gamma * (float(zb @ zb) - 2.0 * float(xb @ zb))
    v1 *= (eta + 1.0)
    gref = p.grad_block(ref.x).ravel()
    v2 = (eta + 1.0) * (float(p.f0_block(s.x).sum()) - float(p.f0_block(ref.x).sum())
                        - float(xb @ gref))
    vb = s.v - ref.v
    wb = s.w - ref.w
    v3 = 0.5 * eta * float(np.sum(vb * (h[:, None] * vb)))
    v3 += 0.5 * float(np.sum((vb + wb) * (h[:, None] * (vb + wb))))
    return v1 + v2 + v3


@dataclass(frozen=True)
class RunSummary:
    mode: str
    status: str
    t_final: float
    settling_time: Optional[float]
    final_objective: Optional[float]
    final_r_x: float
    final_r_z: float
    final_r_feas: float
    final_r_cons: float
    final_sup_norm: float
    max_conservation: float
    y_fit_slope: Optional[float]
    y_fit_r2: Optional[float]
    diverged: bool

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "status": self.status,
            "t_final": self.t_final,
            "settling_time": self.settling_time,
            "final_objective": self.final_objective,
            "final_residuals": {
                "r_x": self.final_r_x,
                "r_z": self.final_r_z,
                "r_feas": self.final_r_feas,
                "r_cons": self.final_r_cons,
            },
            "final_sup_norm": self.final_sup_norm,
            "max_conservation": self.max_conservation,
            "estimator_fit": None if self.y_fit_slope is None else {
                "slope": self.y_fit_slope, "r2": self.y_fit_r2,
            },
            "diverged": self.diverged,
        }


def estimator_fit(tr: Trajectory, t_lo: float = 1.0, t_hi: float = 10.0):
    """Least-squares line through log ||y - 1 h^T|| over [t_lo, t_hi];
    returns (slope, r2) or None when there are too few usable samples."""
    ts, logs = [], []
    for t, mon in zip(tr.times, tr.monitors):
        if mon.y_error is not None and mon.y_error > 0 and t_lo <= t <= t_hi:
            ts.append(t)
            logs.append(np.log(mon.y_error))
    if len(ts) < 3:
        return None
    ts = np.asarray(ts)
    logs = np.asarray(logs)
    a = np.vstack([ts, np.ones_like(ts)]).T
    coef, *_ = np.linalg.lstsq(a, logs, rcond=None)
    pred = a @ coef
    ss_res = float(((logs - pred) ** 2).sum())
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def summarize(tr: Trajectory) -> RunSummary:
    """Condense a trajectory into its final residuals, settling time, the
    worst conservation violation, and the estimator decay fit."""
    if not tr.times:
        raise ValueError("cannot summarize an empty trajectory")
    mon = tr.final_monitor
    fit = estimator_fit(tr)
    slope, r2 = fit if fit is not None else (None, None)
    max_cons = max(m.conservation for m in tr.monitors)
    return RunSummary(
        mode=tr.mode,
        status=tr.status,
        t_final=float(tr.times[-1]),
        settling_time=tr.t_converged,
        final_objective=mon.F_value,
        final_r_x=mon.r_x,
        final_r_z=mon.r_z,
        final_r_feas=mon.r_feas,
        final_r_cons=mon.r_cons,
        final_sup_norm=mon.sup_norm,
        max_conservation=max_cons,
        y_fit_slope=slope,
        y_fit_r2=r2,
        diverged=tr.status == "diverged",
    )


def trajectory_to_csv(tr: Trajectory) -> str:
    """Render the trajectory with the documented column layout:
    t, x_i_k, z_j_i_k, v_i_k, w_i_k, y_i (diagonal, estimator mode only),
    F, r_x, r_z, r_feas, r_cons, conservation, lyapunov."""
    first = tr.states[0]
    n, q = first.x.shape
    m1 = first.z.shape[0]
    with_y = first.y is not None

    cols = ["t"]
    cols += [f"x_{i+1}_{k+1}" for i in range(n) for k in range(q)]
    cols += [f"z_{j+1}_{i+1}_{k+1}" for j in range(m1) for i in range(n) for k in range(q)]
    cols += [f"v_{i+1}_{k+1}" for i in range(n) for k in range(q)]
    cols += [f"w_{i+1}_{k+1}" for i in range(n) for k in range(q)]
    if with_y:
        cols += [f"y_{i+1}" for i in range(n)]
    cols += ["F", "r_x", "r_z", "r_feas", "r_cons", "conservation", "lyapunov"]

    def fmt(v):
        return "" if v is None else repr(float(v))

    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for t, state, mon in zip(tr.times, tr.states, tr.monitors):
        row = [repr(float(t))]
        row += [repr(float(u)) for u in state.x.ravel()]
        row += [repr(float(u)) for u in state.z.ravel()]
        row += [repr(float(u)) for u in state.v.ravel()]
        row += [repr(float(u)) for u in state.w.ravel()]
        if with_y:
            row += [repr(float(u)) for u in np.diag(state.y)]
        row += [fmt(mon.F_value), fmt(mon.r_x), fmt(mon.r_z), fmt(mon.r_feas),
                fmt(mon.r_cons), fmt(mon.conservation), fmt(mon.lyapunov)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
