"""Scenario execution: truth -> sensor stream -> filter -> diagnostics -> CSV.

One :func:`run_scenario` call integrates the rigid-body truth, generates the
multi-rate measurement stream, runs the attitude filter, and logs one row
per step:

    step,time_s,phi_rad,omega_err_x,omega_err_y,omega_err_z,V,deltaV,
    potential,kinetic,num_vectors,fresh

Reals are written as shortest round-trip decimals (``repr``), so a
trajectory file is byte-identical across runs with the same config and
seed. ``deltaV`` on row i is V_{i+1} - V_i; the last row carries nan.

Weights are rebuilt from the inertial columns at every fresh measurement
instant. If a fresh block is rank-deficient the block is dropped: the
previous weights stay active and the previous body vectors are bridged
forward with gyro data until the next usable block (fatal on the very
first block, since there is nothing to hold).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from statistics import median
from typing import Optional

import numpy as np

from .catalog import DEFAULT_CATALOG
from .config import IoError, ParseError, config_overrides
from .estimator import (DiagnosticRecord, dissipation_torque, filter_step,
                        kinetic_energy_l, kinetic_energy_v, make_state,
                        prop1_residual, wahba_cost)
from .measurements import (SensorConfig, build_stream, propagate_vectors,
                           simulate_truth, simulate_truth_rk4_attitude,
                           torque_sinusoidal)
from .so3 import exp_so3, principal_angle, project_to_so3
from .wahba import RankDeficient, construct_weights, k_matrix, potential_error, s_l

TRAJECTORY_HEADER = ("step,time_s,phi_rad,omega_err_x,omega_err_y,"
                     "omega_err_z,V,deltaV,potential,kinetic,num_vectors,fresh")


@dataclass(frozen=True)
class RunSummary:
    """Scalar outcome of one scenario run (mirrors the trajectory file)."""
    seed: int
    steps: int
    final_phi: float
    max_phi_settled: float       # max phi over t > duration/2
    final_omega_norm: float
    v_min: float
    v_max: float
    decrement_violations: int    # steps with deltaV above the defect bound
    phi_initial: float
    phi_max_late: float          # max phi over t > 10 s
    first_step_below_1e3: int    # first step with phi < 1e-3 rad, -1 if never
    settle_step: int             # last step with phi > 0.1 rad, -1 if never
    wall_s: float


@dataclass(frozen=True)
class ScenarioResult:
    rows: list
    summary: RunSummary
    internals: Optional[dict] = None


def _sensor_config(cfg, seed):
    """Map scenario noise settings onto the sampling layer.

    Noise off zeroes both bounds and pins the direction count at k_max, so
    every fresh instant observes the identical full set and the weights stay
    constant across the run.
    """
    off = cfg.noise_mode == "off"
    return SensorConfig(
        h=cfg.h,
        n=cfg.rate_ratio,
        gyro_noise_bound=0.0 if off else cfg.gyro_bound_rad,
        vector_noise_bound=0.0 if off else cfg.vector_bound_rad,
        vector_noise_mode="rot" if off else cfg.noise_mode,
        k_min=cfg.k_max if off else cfg.k_min,
        k_max=cfg.k_max,
        seed=seed,
    )


def run_scenario(cfg, seed=None, catalog=None, collect_internals=False):
    """Run one scenario; deterministic for fixed (config, seed).

    Returns a :class:`ScenarioResult`. With ``collect_internals=True`` the
    result carries per-step arrays (estimates, gradients, torques, implicit-
    form residuals, per-step diagnostic records, the truth trajectory, and
    the measurement stream) for the verification suites.
    """
    t_start = time.perf_counter()
    if catalog is None:
        catalog = DEFAULT_CATALOG
    if seed is None:
        seed = cfg.seed
    n = cfg.n_steps
    h = cfg.h
    gains = cfg.gains()
    d = np.asarray(cfg.d, dtype=float)

    torque = torque_sinusoidal(cfg.torque_amp, cfg.torque_freq)
    r0 = exp_so3(cfg.r0_angle * np.asarray(cfg.r0_axis, dtype=float))
    integrate = (simulate_truth if cfg.truth_attitude == "eq13"
                 else simulate_truth_rk4_attitude)
    truth = integrate(np.asarray(cfg.inertia, dtype=float), torque, r0,
                      np.asarray(cfg.omega0, dtype=float), h, n)

    rng = np.random.default_rng(seed)
    records = build_stream(truth, _sensor_config(cfg, seed), catalog, rng)

    q0 = exp_so3(cfg.q0_angle * np.asarray(cfg.q0_axis, dtype=float))
    state = make_state(q0.T @ truth[0].R, np.asarray(cfg.omega0_err, dtype=float),
                       records[0].omega_m)

    phis = np.empty(n + 1)
    pots = np.empty(n + 1)
    kins = np.empty(n + 1)
    vs = np.empty(n + 1)
    omegas = np.empty((n + 1, 3))
    omega_hats = np.empty((n + 1, 3))
    s_arr = np.empty((n + 1, 3))
    nvecs = np.zeros(n + 1, dtype=int)
    freshes = np.zeros(n + 1, dtype=int)
    if collect_internals:
        r_hats = np.empty((n + 1, 3, 3))
        u_list, e_refs, w_refs, k_refs = [], [], [], []

    ensemble = weights = kmat = None
    u_cur = None
    holding = False
    k_active = 0
    omega_m_prev = None
    step_error = None

    for i in range(n + 1):
        rec = records[i]
        try:
            if rec.fresh:
                try:
                    w_new = construct_weights(rec.E, d)
                    ensemble, weights = rec.E, w_new
                    kmat = k_matrix(ensemble, weights)
                    u_cur = rec.u_tilde
                    holding = False
                    k_active = rec.k_observed
                    freshes[i] = 1
                except RankDeficient:
                    if ensemble is None:
                        raise
                    holding = True
                    u_cur = propagate_vectors(u_cur, omega_m_prev,
                                              rec.omega_m, h)
            elif holding:
                u_cur = propagate_vectors(u_cur, omega_m_prev, rec.omega_m, h)
            else:
                u_cur = rec.u_tilde
            omega_m_prev = rec.omega_m

            s_now = s_l(state.R_hat, ensemble, weights, u_cur)
            q_err = truth[i].R @ state.R_hat.T
            phi = principal_angle(q_err)
            pot = potential_error(q_err, kmat)
            kin = kinetic_energy_l(state.omega, gains.m)

            phis[i] = phi
            pots[i] = pot
            kins[i] = kin
            vs[i] = gains.kp * pot + kin
            omegas[i] = state.omega
            omega_hats[i] = state.omega_hat
            s_arr[i] = s_now
            nvecs[i] = k_active
            if collect_internals:
                r_hats[i] = state.R_hat
                u_list.append(u_cur)
                e_refs.append(ensemble)
                w_refs.append(weights)
                k_refs.append(kmat)

            if i < n:
                state = filter_step(state, rec.omega_m, records[i + 1].omega_m,
                                    u_cur, ensemble, weights, gains)
                if cfg.reproject_every and state.step % cfg.reproject_every == 0:
                    state = replace(state, R_hat=project_to_so3(state.R_hat))
        except Exception as exc:
            step_error = (i, exc)
            break
    if step_error is not None:
        i, exc = step_error
        try:
            wrapped = type(exc)(f"step {i}: {exc}")
        except TypeError:
            wrapped = RuntimeError(f"step {i}: {exc}")
        raise wrapped from exc

    dv = np.full(n + 1, np.nan)
    pred = np.full(n + 1, np.nan)
    dv[:-1] = vs[1:] - vs[:-1]
    pair = omegas[1:] + omegas[:-1]
    pred[:-1] = -0.5 * gains.l * np.sum(pair * pair, axis=1)
    defect = np.abs(dv[:-1] - pred[:-1])
    omega_sq = np.sum(omegas * omegas, axis=1)
    bound = cfg.defect_c * h * h * (1.0 + omega_sq[:-1] + phis[:-1])
    violations = int(np.sum(dv[:-1] > bound))

    times = np.arange(n + 1) * h
    settled = times > cfg.duration / 2.0
    late = times > 10.0
    below = np.flatnonzero(phis < 1e-3)
    above = np.flatnonzero(phis > 0.1)

    rows = []
    for i in range(n + 1):
        rows.append((i, times[i], phis[i], omegas[i, 0], omegas[i, 1],
                     omegas[i, 2], vs[i], dv[i], pots[i], kins[i],
                     int(nvecs[i]), int(freshes[i])))

    summary = RunSummary(
        seed=int(seed),
        steps=n,
        final_phi=float(phis[-1]),
        max_phi_settled=float(np.max(phis[settled])) if settled.any() else float("nan"),
        final_omega_norm=float(np.linalg.norm(omegas[-1])),
        v_min=float(np.min(vs)),
        v_max=float(np.max(vs)),
        decrement_violations=violations,
        phi_initial=float(phis[0]),
        phi_max_late=float(np.max(phis[late])) if late.any() else float("nan"),
        first_step_below_1e3=int(below[0]) if below.size else -1,
        settle_step=int(above[-1]) if above.size else -1,
        wall_s=time.perf_counter() - t_start,
    )

    internals = None
    if collect_internals:
        taus = np.full((n + 1, 3), np.nan)
        for i in range(n):
            taus[i + 1] = dissipation_torque(
                omegas[i], omegas[i + 1], omega_hats[i], omega_hats[i + 1],
                s_arr[i + 1], gains)
        residuals = np.empty(max(n - 1, 0))
        for i in range(n - 1):
            residuals[i] = prop1_residual(
                omegas[i], omegas[i + 1], omegas[i + 2], omega_hats[i],
                omega_hats[i + 1], s_arr[i + 1], taus[i + 1], gains)
        diagnostics = []
        action = 0.0
        for i in range(n + 1):
            kin_v = (kinetic_energy_v(omegas[i], omegas[i + 1], gains.m)
                     if i < n else float("nan"))
            cost = wahba_cost(r_hats[i], u_list[i], e_refs[i], w_refs[i])
            lag = kin_v - cost if i < n else float("nan")
            if i < n:
                action += lag
            diagnostics.append(DiagnosticRecord(
                potential=float(pots[i]), kinetic_l=float(kins[i]),
                kinetic_v=kin_v, lyapunov=float(vs[i]), phi=float(phis[i]),
                s_l=s_arr[i], tau_d=taus[i], lagrangian=lag, action=action,
                delta_v_observed=float(dv[i]), delta_v_predicted=float(pred[i]),
                defect=float(defect[i]) if i < n else float("nan")))
        internals = {
            "truth": truth,
            "records": records,
            "R_hat": r_hats,
            "omega": omegas,
            "omega_hat": omega_hats,
            "S": s_arr,
            "tau": taus,
            "prop1_residuals": residuals,
            "u": u_list,
            "E": e_refs,
            "W": w_refs,
            "K": k_refs,
            "phi": phis,
            "V": vs,
            "deltaV": dv,
            "predicted_deltaV": pred,
            "defect": defect,
            "defect_bound": bound,
            "diagnostics": diagnostics,
        }
    return ScenarioResult(rows=rows, summary=summary, internals=internals)


def _format_cell(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trajectory(path, rows):
    """Write trajectory rows as UTF-8 CSV with round-trip decimals."""
    lines = [TRAJECTORY_HEADER]
    lines.extend(",".join(_format_cell(c) for c in row) for row in rows)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write trajectory {path!r}: {exc}") from None


def read_trajectory(path):
    """Read a trajectory file back into typed row tuples."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read trajectory {path!r}: {exc}") from None
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise ParseError(f"unrecognized trajectory header in {path!r}", 1)
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != 12:
            raise ParseError(f"expected 12 columns, got {len(cells)}", line_no)
        try:
            rows.append((int(cells[0]),) + tuple(float(c) for c in cells[1:10])
                        + (int(cells[10]), int(cells[11])))
        except ValueError:
            raise ParseError(f"malformed row {line!r}", line_no) from None
    return rows


@dataclass(frozen=True)
class BatchResult:
    summaries: list
    failures: list
    aggregate: dict


def _finite(values):
    return [v for v in values if not np.isnan(v)]


def _agg_max(values):
    finite = _finite(values)
    return max(finite) if finite else float("nan")


def _agg_median(values):
    finite = _finite(values)
    return median(finite) if finite else float("nan")


def aggregate_batch(summaries):
    """Order-independent aggregate statistics over trial summaries.

    nan entries (fields whose observation window is empty for a short run)
    are excluded so the result does not depend on trial order.
    """
    if not summaries:
        return {"trials": 0}
    return {
        "trials": len(summaries),
        "band_max": _agg_max(s.max_phi_settled for s in summaries),
        "band_median": _agg_median(s.max_phi_settled for s in summaries),
        "final_phi_max": _agg_max(s.final_phi for s in summaries),
        "final_phi_median": _agg_median(s.final_phi for s in summaries),
        "phi_max_late_max": _agg_max(s.phi_max_late for s in summaries),
        "settle_median": _agg_median(s.settle_step for s in summaries),
        "first_below_1e3_median": _agg_median(s.first_step_below_1e3
                                              for s in summaries),
        "v_max": _agg_max(s.v_max for s in summaries),
    }


def run_batch(cfg, trials=None, catalog=None):
    """Run ``trials`` independent scenarios with per-trial derived seeds.

    Trial t runs with seed ``cfg.seed + cfg.seed_stride * t``. A failing
    trial is recorded and the batch continues.
    """
    if trials is None:
        trials = cfg.trials
    if trials < 1:
        raise ValueError("trials must be at least 1")
    summaries = []
    failures = []
    for t in range(trials):
        trial_seed = cfg.seed + cfg.seed_stride * t
        try:
            result = run_scenario(cfg, seed=trial_seed, catalog=catalog)
            summaries.append(result.summary)
        except Exception as exc:
            failures.append(f"trial {t} (seed {trial_seed}): {exc}")
    return BatchResult(summaries=summaries, failures=failures,
                       aggregate=aggregate_batch(summaries))


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of the implicit-form and energy-decrement suites."""
    seed: int
    steps: int
    max_prop1_residual: float
    prop1_pass: bool
    max_defect: float
    max_defect_ratio: float      # defect / (C h^2 (1 + |omega|^2 + phi))
    defect_pass: bool

    @property
    def passed(self):
        return self.prop1_pass and self.defect_pass


PROP1_TOL = 1e-12


def verify_run(cfg, seed=None, catalog=None):
    """Run the two structural suites on a fresh noise-free trajectory.

    Suite 1: the dissipation torque substituted into the implicit two-step
    relation must reproduce the explicit filter to within PROP1_TOL at every
    step. Suite 2: every per-step Lyapunov-decrement defect must stay below
    the calibrated bound C h^2 (1 + |omega|^2 + phi).
    """
    cfg = config_overrides(cfg, noise_mode="off")
    result = run_scenario(cfg, seed=seed, catalog=catalog,
                          collect_internals=True)
    internals = result.internals
    residuals = internals["prop1_residuals"]
    defect = internals["defect"]
    bound = internals["defect_bound"]
    max_residual = float(np.max(residuals)) if residuals.size else 0.0
    ratios = defect / bound
    max_ratio = float(np.max(ratios)) if ratios.size else 0.0
    return VerifyReport(
        seed=result.summary.seed,
        steps=result.summary.steps,
        max_prop1_residual=max_residual,
        prop1_pass=max_residual <= PROP1_TOL,
        max_defect=float(np.max(defect)) if defect.size else 0.0,
        max_defect_ratio=max_ratio,
        defect_pass=max_ratio <= 1.0,
    )
