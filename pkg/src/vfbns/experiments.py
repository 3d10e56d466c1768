"""Experiment orchestration: single runs, eps sweeps, mesh studies, fits.

Every run produces a RunReport whose verdicts carry (measured value,
threshold, pass/fail).  Verdicts:

    jacobian_in_qbar      min/max Jacobian over the whole run inside the
                          two-sided bound D0^2 exp(4 sqrt(M E0)) from the
                          measured data; zero violations tolerated.
    monotone_E            basic energy never increases: per accepted step
                          for the explicit reference (<= 1e-10), per sample
                          for the first-order imex integrator.
    energy_identity       |E(T) + int D dt - E(0)| relative to E(0);
                          1e-6 for the explicit reference.  For imex the
                          residual scales with the step as a fraction of the
                          acoustic bound (first-order splitting), so the
                          threshold does too; it only flags grossly
                          inconsistent dissipation bookkeeping there.
    mass_drift            Eulerian-reconstructed mass constant to 1e-12
                          relative drift.
    mass_value            |mass - M| <= h^2.
    equilibrium_preserved max |v| and max |eta - x| <= 1e-10 over the run
                          (equilibrium data only).
    decay_velocity_group  tail slope of the time-weighted velocity norms
                          (weight exponent (2 gamma - 1)/gamma - alpha)
                          <= 0.05 over the second half, with the supremum
                          attained in the first half (long runs only).
    decay_second_group    same for the second-derivative group.

Sweeps run members concurrently (VFBNS_THREADS caps the pool) and assemble
reports in axis order, so identical configs yield identical reports.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import energetics
from .config import Config
from .initial_data import build_initial_state
from .integrate import JacobianCollapseError, StepSizeError, integrate
from .model_core import normalize
from .scheme import LagrangianState

__all__ = [
    "Verdict",
    "RunReport",
    "SweepPoint",
    "SweepReport",
    "run_single",
    "epsilon_sweep",
    "mesh_refinement",
    "decay_fit",
    "fit_power_law",
    "richardson_order",
]


@dataclass
class Verdict:
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def __post_init__(self):
        self.value = float(self.value)
        self.threshold = float(self.threshold)
        self.passed = bool(self.passed)

    def line(self, name: str) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {name}: {self.value:.4g} vs {self.threshold:.4g}{extra}"


@dataclass
class RunReport:
    config: Config
    records: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    qbar: float = float("nan")
    D0: float = float("nan")
    E0: float = float("nan")
    steps: int = 0
    wall_time: float = 0.0
    aborted: bool = False
    abort_time: float = float("nan")
    abort_reason: str = ""
    acoustic_dt0: float = float("nan")
    series: dict = field(default_factory=dict)  # named per-sample arrays

    @property
    def all_passed(self) -> bool:
        return (not self.aborted) and all(v.passed for v in self.verdicts.values())

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_text(),
            "qbar": self.qbar,
            "D0": self.D0,
            "E0": self.E0,
            "steps": self.steps,
            "wall_time": self.wall_time,
            "aborted": self.aborted,
            "abort_time": self.abort_time,
            "abort_reason": self.abort_reason,
            "verdicts": {
                k: {"value": v.value, "threshold": v.threshold,
                    "passed": v.passed, "detail": v.detail}
                for k, v in self.verdicts.items()
            },
        }


def _l2_cells(state: LagrangianState, values: np.ndarray) -> float:
    return float(math.sqrt(state.h * float(np.sum(values**2))))


class _Collector:
    """Per-sample series needed by verdicts and sweep metrics."""

    def __init__(self, profile, params, qbar):
        self.profile = profile
        self.params = params
        self.qbar = qbar
        self.records = []
        self.dev_l2 = []
        self.v_l2sq = []
        self.q_velocity = []
        self.q_second = []
        self.max_abs_v = 0.0
        self.max_abs_eta_dev = 0.0
        self.gamma_fb = []
        self.last_etax = None

    def __call__(self, state: LagrangianState):
        prof, par = self.profile, self.params
        N, h = state.N, state.h
        rec = energetics.diagnostics_record(state, prof, par, self.qbar)
        self.records.append(rec)

        etax = state.interior_etax()
        self.last_etax = etax
        self.dev_l2.append(_l2_cells(state, etax - 1.0))
        vc = 0.5 * (state.v[2:N + 2] + state.v[1:N + 1])
        self.v_l2sq.append(h * float(np.sum(vc**2)))
        self.gamma_fb.append(rec.gamma_fb)
        self.max_abs_v = max(self.max_abs_v, float(np.max(np.abs(state.v))))
        nodes = state.eta[1:N + 2]
        xs = np.arange(N + 1) / N
        self.max_abs_eta_dev = max(self.max_abs_eta_dev,
                                   float(np.max(np.abs(nodes - xs))))

        stn = energetics.compute_stencils(state, prof, par)
        xc = (np.arange(1, N + 1) - 0.5) * h
        rho_c = prof.rho(xc)
        eps = par.epsilon
        vt_c = 0.5 * (stn.accel[2:N + 2] + stn.accel[1:N + 1])
        vx = (state.v[2:N + 2] - state.v[1:N + 1]) / h
        self.q_velocity.append(
            eps**4 * (h * float(np.sum(rho_c * vt_c**2)) + h * float(np.sum(vx**2))))
        vtt_c = 0.5 * (stn.accel_t[2:N + 2] + stn.accel_t[1:N + 1])
        vtx = (stn.accel[2:N + 2] - stn.accel[1:N + 1]) / h
        self.q_second.append(
            eps**8 * (h * float(np.sum(rho_c * vtt_c**2))
                      + float(np.max(np.abs(vtx)))**2))


def _simulate(config: Config):
    """Integrate one configuration, returning (report, trajectory-or-None)."""
    params, profile = normalize(config.params())
    state0, D0 = build_initial_state(profile, params, config.family())
    E0 = energetics.basic_energy(state0, profile, params)
    qbar = energetics.qbar_bound(max(D0, 1.0), profile.M, E0)

    from .integrate import StepPolicy, stable_dt

    acoustic_dt0 = stable_dt(state0, profile, params,
                             StepPolicy(mode="imex", dt_safety=1.0))

    collector = _Collector(profile, params, qbar)
    report = RunReport(config=config, qbar=qbar, D0=D0, E0=E0)
    report.acoustic_dt0 = acoustic_dt0
    t0 = time.perf_counter()
    traj = None
    try:
        traj = integrate(state0, profile, params, config.policy(),
                         config.schedule(), record_fn=collector)
    except (JacobianCollapseError, StepSizeError) as err:
        report.aborted = True
        report.abort_time = getattr(err, "time", float("nan"))
        report.abort_reason = str(err)
    report.wall_time = time.perf_counter() - t0
    report.records = collector.records
    if traj is not None:
        report.steps = traj.steps
    report.series = {
        "t": np.asarray([r.t for r in collector.records]),
        "dev_l2": np.asarray(collector.dev_l2),
        "v_l2sq": np.asarray(collector.v_l2sq),
        "q_velocity": np.asarray(collector.q_velocity),
        "q_second": np.asarray(collector.q_second),
        "gamma_fb": np.asarray(collector.gamma_fb),
        "max_abs_v": collector.max_abs_v,
        "max_abs_eta_dev": collector.max_abs_eta_dev,
        "last_etax": collector.last_etax,
    }
    return report, traj, params, profile


def _decay_verdict(ts, qs, theta, t_end):
    sup, t_at = energetics.decay_monitor(ts, qs, theta)
    half = ts >= 0.5 * t_end
    slope, _, _ = decay_fit(ts[half], (1.0 + ts[half]) ** theta * np.asarray(qs)[half],
                            window=(ts[half][0] - 1.0, ts[-1] + 1.0))
    passed = (t_at <= 0.5 * t_end) and (slope <= 0.05)
    return Verdict(value=slope, threshold=0.05, passed=passed,
                   detail=f"sup at t={t_at:g}")


def _attach_basic_verdicts(report: RunReport, traj, profile, config: Config,
                           acoustic_dt0: float = float("nan")):
    v = report.verdicts
    if traj is not None:
        worst = max(traj.max_etax / report.qbar,
                    1.0 / (report.qbar * traj.min_etax))
        v["jacobian_in_qbar"] = Verdict(worst, 1.0, worst <= 1.0)

        if config.mode == "explicit_reference":
            v["monotone_E"] = Verdict(traj.max_step_dE, 1e-10,
                                      traj.max_step_dE <= 1e-10, "per step")
            tol = 1e-6
        else:
            dE = float(np.max(np.diff(traj.E_samples), initial=0.0))
            v["monotone_E"] = Verdict(dE, 1e-10, dE <= 1e-10, "per sample")
            dt_avg = config.t_end / max(traj.steps, 1)
            cfl = dt_avg / acoustic_dt0 if np.isfinite(acoustic_dt0) else 1.0
            tol = max(0.05, 2.0 * cfl)
        res = abs(traj.E_last + traj.diss_integral - traj.E_first)
        rel = res / max(traj.E_first, 1e-12)
        v["energy_identity"] = Verdict(rel, tol, rel <= tol)

    masses = np.asarray([r.mass for r in report.records])
    if masses.size:
        drift = float(np.max(np.abs(masses - masses[0])) / masses[0])
        v["mass_drift"] = Verdict(drift, 1e-12, drift <= 1e-12)
        h = 1.0 / config.N
        err = abs(masses[0] - profile.M)
        v["mass_value"] = Verdict(err, h * h, err <= h * h)


def run_single(config: Config) -> RunReport:
    """One simulation with the full verdict battery; aborts yield a partial
    report rather than an exception."""
    report, traj, params, profile = _simulate(config)
    v = report.verdicts
    _attach_basic_verdicts(report, traj, profile, config, report.acoustic_dt0)

    if config.kind == "equilibrium" and not report.aborted:
        worst = max(report.series["max_abs_v"], report.series["max_abs_eta_dev"])
        v["equilibrium_preserved"] = Verdict(worst, 1e-10, worst <= 1e-10)

    if not report.aborted and config.kind != "equilibrium" and config.t_end >= 8.0:
        theta = (2.0 * config.gamma - 1.0) / config.gamma - config.alpha
        ts = report.series["t"]
        v["decay_velocity_group"] = _decay_verdict(
            ts, report.series["q_velocity"], theta, config.t_end)
        v["decay_second_group"] = _decay_verdict(
            ts, report.series["q_second"], theta, config.t_end)

    return report


def decay_fit(ts, qs, window):
    """Least-squares slope of log q against log(1+t) inside the window.

    Nonpositive samples are excluded and counted.  Returns
    (slope, rms residual, number excluded); needs >= 10 usable samples.
    """
    ts = np.asarray(ts, dtype=float)
    qs = np.asarray(qs, dtype=float)
    inside = (ts >= window[0]) & (ts <= window[1])
    usable = inside & (qs > 0.0)
    n_excluded = int(np.sum(inside) - np.sum(usable))
    if np.sum(usable) < 10:
        raise ValueError("decay_fit needs at least 10 positive samples in window")
    x = np.log1p(ts[usable])
    y = np.log(qs[usable])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid, n_excluded


def fit_power_law(xs, ys):
    """Slope and rms residual of log y against log x."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def richardson_order(diffs, ratio: float = 2.0):
    """Empirical convergence order from successive coarse-grid differences.

    Returns (order, exact) where exact flags differences at roundoff.
    """
    diffs = np.asarray(diffs, dtype=float)
    if np.all(diffs < 1e-14):
        return float("inf"), True
    orders = np.log(diffs[:-1] / diffs[1:]) / math.log(ratio)
    return float(np.mean(orders)), False


@dataclass
class SweepPoint:
    axis_value: float
    metrics: dict
    report: RunReport


@dataclass
class SweepReport:
    axis: str
    points: list
    slope: float = float("nan")
    residual: float = float("nan")
    verdicts: dict = field(default_factory=dict)
    degraded: bool = False

    @property
    def all_passed(self) -> bool:
        return (not self.degraded) and all(v.passed for v in self.verdicts.values())

    def summary_dict(self) -> dict:
        return {
            "axis": self.axis,
            "values": [p.axis_value for p in self.points],
            "metrics": [p.metrics for p in self.points],
            "slope": self.slope,
            "residual": self.residual,
            "degraded": self.degraded,
            "verdicts": {
                k: {"value": v.value, "threshold": v.threshold,
                    "passed": v.passed, "detail": v.detail}
                for k, v in self.verdicts.items()
            },
        }


def _thread_count(n_jobs: int) -> int:
    cap = os.environ.get("VFBNS_THREADS")
    if cap:
        return max(1, min(n_jobs, int(cap)))
    return max(1, min(n_jobs, os.cpu_count() or 1))


def _run_members(configs):
    def member(c):
        report, traj, params, profile = _simulate(c)
        _attach_basic_verdicts(report, traj, profile, c, report.acoustic_dt0)
        return report, traj, params, profile

    with ThreadPoolExecutor(max_workers=_thread_count(len(configs))) as pool:
        return list(pool.map(member, configs))


def epsilon_sweep(config: Config, eps_list) -> SweepReport:
    """Sweep the Mach/Froude parameter at fixed data family and grid.

    Per member: sup over samples of the Jacobian-deviation L2 norm, the
    space-time L2 norm of velocity, and the final free-boundary error.
    Fits the power law of the deviation metric against eps.
    """
    eps_list = list(eps_list)
    if len(eps_list) < 3 or any(np.diff(eps_list) >= 0.0):
        raise ValueError("epsilon_sweep needs >= 3 strictly decreasing values")

    members = _run_members([config.with_(epsilon=e) for e in eps_list])
    points = []
    degraded = False
    for eps, (rep, traj, params, profile) in zip(eps_list, members):
        degraded = degraded or rep.aborted
        s = rep.series
        ts = s["t"]
        if len(ts) >= 2:
            v_l2_l2 = float(np.sqrt(np.trapezoid(s["v_l2sq"], ts)))
        else:
            v_l2_l2 = float("nan")
        metrics = {
            "sup_dev_l2": float(np.max(s["dev_l2"])) if len(ts) else float("nan"),
            "v_l2_l2": v_l2_l2,
            "gamma_err": abs(s["gamma_fb"][-1] - 1.0) if len(ts) else float("nan"),
            "sup_EL_tilde": float(max(r.EL_tilde for r in rep.records))
            if rep.records else float("nan"),
            "EL_tilde_0": rep.records[0].EL_tilde if rep.records else float("nan"),
        }
        points.append(SweepPoint(axis_value=eps, metrics=metrics, report=rep))

    report = SweepReport(axis="epsilon", points=points, degraded=degraded)
    if not degraded:
        sup_dev = [p.metrics["sup_dev_l2"] for p in points]
        report.slope, report.residual = fit_power_law(eps_list, sup_dev)
        if config.kind == "well_prepared":
            ok = 1.7 <= report.slope <= 2.3
            report.verdicts["rate_band"] = Verdict(report.slope, 2.3, ok,
                                                   "band [1.7, 2.3]")
            lim = 3.0 * max(p.metrics["EL_tilde_0"] for p in points)
            sup = max(p.metrics["sup_EL_tilde"] for p in points)
            report.verdicts["EL_tilde_bounded"] = Verdict(sup, lim, sup <= lim)
        else:
            for name in ("sup_dev_l2", "v_l2_l2", "gamma_err"):
                vals = np.asarray([p.metrics[name] for p in points])
                mono = bool(np.all(np.diff(vals) < 0.0))
                worst = float(np.max(np.diff(vals)))
                report.verdicts[f"monotone_{name}"] = Verdict(worst, 0.0, mono)
    return report


def mesh_refinement(config: Config, n_list) -> SweepReport:
    """Self-convergence study on nested grids.

    Members run at a fixed step proportional to h^2 (unless the config pins
    dt_fixed), so the first-order time error refines at least as fast as the
    spatial error; final Jacobians are compared after exact restriction
    (child-cell averaging) to the coarsest grid.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise ValueError("mesh_refinement needs >= 3 grids")
    ratios = [n_list[i + 1] / n_list[i] for i in range(len(n_list) - 1)]
    if len(set(ratios)) != 1 or ratios[0] <= 1 or ratios[0] != int(ratios[0]):
        raise ValueError("mesh_refinement needs a geometric integer-ratio ladder")
    r = int(ratios[0])

    configs = []
    for n in n_list:
        dt = config.dt_fixed if config.dt_fixed is not None else 1.0 / n**2
        configs.append(config.with_(N=n, dt_fixed=dt))

    members = _run_members(configs)
    points = []
    finals = []
    degraded = False
    for n, (rep, traj, params, profile) in zip(n_list, members):
        degraded = degraded or rep.aborted
        finals.append(rep.series.get("last_etax"))
        points.append(SweepPoint(axis_value=float(n), metrics={}, report=rep))

    report = SweepReport(axis="N", points=points, degraded=degraded)
    if degraded or any(f is None for f in finals):
        report.degraded = True
        return report

    coarse = n_list[0]
    restricted = [e.reshape(-1, n // coarse).mean(axis=1)
                  for n, e in zip(n_list, finals)]
    diffs = [
        float(np.sqrt(np.mean((restricted[i + 1] - restricted[i]) ** 2)))
        for i in range(len(restricted) - 1)
    ]
    for i, d in enumerate(diffs):
        points[i].metrics["diff_to_next"] = d
    order, exact = richardson_order(diffs, ratio=float(r))
    report.slope = order
    report.residual = 0.0
    report.verdicts["order_at_least_one"] = Verdict(
        order, 1.0, exact or order >= 1.0, "exact" if exact else "")
    return report
