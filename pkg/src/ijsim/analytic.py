"""Closed-form SER / error-count model and the SEREE schedule optimiser."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .channel import ChannelSpec
from .frame_layout import FrameLayout, MessagePlan, PhyConfig
from .jamming import SCHEMES, EmptyScheduleError, JamSchedule, build_schedule

PR_CEILING = 1 - (1 - 0.75 * 0.5) ** 2  # 0.609375


class InfeasibleError(ValueError):
    """No grid point satisfies the constraints."""


@dataclass(frozen=True)
class AnalyticParams:
    lam: float = 1.0
    # w=1 additionally needs |h_je|^2 P_j >= w_min_jsr * |h_ae|^2 * P_s on the
    # critical window; 0 reproduces the pure coverage rule.
    w_min_jsr: float = 1.0
    signal_power: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.w_min_jsr < 0:
            raise ValueError("w_min_jsr must be non-negative")


def qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2))


def ser_closed_form(e_b: float, p_j: float, h_ae: complex = 1.0, h_je: complex = 1.0) -> float:
    """Per-symbol error probability at Eve for 64-QAM under jamming power ``p_j``."""
    if e_b < 0 or p_j < 0:
        raise ValueError("energy and power must be non-negative")
    jam = abs(h_je) ** 2 * p_j
    if jam == 0:
        return 0.0
    arg = math.sqrt(2 / 7 * abs(h_ae) ** 2 * e_b / jam)
    return float(1 - (1 - 0.75 * qfunc(arg)) ** 2)


def n_sym_total(plan: MessagePlan, cfg: PhyConfig = PhyConfig()) -> int:
    return plan.n_frame * plan.layout.n_sym * cfg.symbols_per_ofdm


def _n_jammed(schedule) -> int:
    if isinstance(schedule, JamSchedule):
        return schedule.n_jammed
    return int(np.count_nonzero(schedule))


def error_count(
    schedule,
    pr: float,
    params: AnalyticParams,
    plan: MessagePlan,
    cfg: PhyConfig = PhyConfig(),
) -> float:
    """min(lambda * covered_symbols * pr, total_symbols)."""
    covered = _n_jammed(schedule) / cfg.samples_per_symbol * cfg.symbols_per_ofdm
    return min(params.lam * covered * pr, float(n_sym_total(plan, cfg)))


def critical_covered(beta: np.ndarray, layout: FrameLayout) -> bool:
    """True iff every frame's critical HT-LTF window is jammed on every sample."""
    a, b = layout.htltf_critical_window
    frames = np.asarray(beta, dtype=bool).reshape(-1, layout.n_samples_frame)
    return bool(frames[:, a:b].all())


def weight(
    schedule: JamSchedule,
    layout: FrameLayout,
    params: AnalyticParams = AnalyticParams(),
    h_signal: complex = 1.0,
    h_jam: complex = 1.0,
) -> int:
    if not critical_covered(schedule.beta, layout):
        return 0
    jam = abs(h_jam) ** 2 * schedule.power
    return int(jam > 0 and jam >= params.w_min_jsr * abs(h_signal) ** 2 * params.signal_power)


def overall_errors(w: int, n_error: float, plan: MessagePlan, cfg: PhyConfig = PhyConfig()) -> float:
    return w * n_sym_total(plan, cfg) + (1 - w) * n_error


@dataclass
class SereeReport:
    pr: float
    n_error: float
    n_error_overall: float
    w: int
    e_j: float
    seree: float | None
    constraints: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return all(self.constraints.values())


def seree(
    schedule: JamSchedule,
    params: AnalyticParams,
    plan: MessagePlan,
    chan: ChannelSpec,
    e_b: float,
    e_j_avail: float | None = None,
    cfg: PhyConfig = PhyConfig(),
) -> SereeReport:
    """Objective N_overall / (N_total * E_J) with constraint flags.

    Flags: ``bob_error_free`` (Bob's modelled error count is zero),
    ``energy`` (E_J within the budget), ``binary`` (indicator is 0/1).
    """
    layout = plan.layout
    e_j = schedule.energy
    pr = ser_closed_form(e_b, schedule.power, chan.h_ae, chan.h_je)
    n_err = error_count(schedule, pr, params, plan, cfg)
    w = weight(schedule, layout, params, chan.h_ae, chan.h_je)
    n_all = overall_errors(w, n_err, plan, cfg)

    pr_bob = ser_closed_form(e_b, schedule.power, chan.h_ab, chan.h_jb)
    w_bob = weight(schedule, layout, params, chan.h_ab, chan.h_jb)
    bob_err = overall_errors(w_bob, error_count(schedule, pr_bob, params, plan, cfg), plan, cfg)

    avail = e_j if e_j_avail is None else e_j_avail
    beta = np.asarray(schedule.beta)
    constraints = {
        "bob_error_free": bob_err == 0,
        "energy": e_j <= avail * (1 + 1e-9),
        "binary": bool(np.isin(beta, (0, 1)).all()),
    }
    value = None if e_j == 0 else n_all / (n_sym_total(plan, cfg) * e_j)
    return SereeReport(pr, n_err, n_all, w, e_j, value, constraints)


@dataclass(frozen=True)
class GridSpec:
    """Documented evaluation order: schemes outermost, then rho, then pulse count."""

    schemes: tuple[str, ...] = SCHEMES
    rhos: tuple[float, ...] = (0.05, 0.1, 0.2, 0.4, 0.6, 0.8)
    n_pulses: tuple[int, ...] = (12,)
    seed: int = 0

    def points(self):
        seen = set()
        for scheme, rho, n_pulse in itertools.product(self.schemes, self.rhos, self.n_pulses):
            if scheme not in SCHEMES:
                raise ValueError(f"unknown scheme {scheme!r}")
            key = (
                scheme,
                None if scheme in ("CJS", "PerJPT") else rho,
                n_pulse if scheme == "RepJDT" else None,
            )
            if key in seen:
                continue
            seen.add(key)
            yield {"scheme": key[0], "rho": key[1], "n_pulse": key[2]}


@dataclass
class OptimizerResult:
    point: dict
    schedule: JamSchedule
    report: SereeReport
    evaluated: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "scheme": self.point["scheme"],
            "params": {k: v for k, v in self.point.items() if k != "scheme"},
            "seree": self.report.seree,
            "pr": self.report.pr,
            "n_error_overall": self.report.n_error_overall,
            "w": self.report.w,
            "e_j": self.report.e_j,
            "constraints": self.report.constraints,
            "grid": [
                {**p, "seree": r.seree if r else None, "feasible": bool(r and r.feasible)}
                for p, r in self.evaluated
            ],
        }

    def export_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def optimize_schedule(
    e_j_avail: float,
    params: AnalyticParams,
    plan: MessagePlan,
    chan: ChannelSpec,
    e_b: float,
    grid: GridSpec = GridSpec(),
    cfg: PhyConfig = PhyConfig(),
    workers: int = 1,
) -> OptimizerResult:
    """Exhaustive SEREE search; ties go to the earliest point in grid order."""
    points = list(grid.points())
    if not points:
        raise ValueError("empty grid")

    def evaluate(p):
        try:
            s = build_schedule(plan, p["scheme"], e_j_avail, p["rho"], p["n_pulse"] or 12, grid.seed)
        except (EmptyScheduleError, ValueError):
            return None, None
        return s, seree(s, params, plan, chan, e_b, e_j_avail, cfg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(evaluate, points))
    else:
        results = [evaluate(p) for p in points]

    best = None
    for p, (s, r) in zip(points, results):
        if r is None or not r.feasible or r.seree is None:
            continue
        if best is None or r.seree > best[2].seree:
            best = (p, s, r)
    if best is None:
        raise InfeasibleError(f"no feasible schedule for E_J^avail={e_j_avail}")
    return OptimizerResult(best[0], best[1], best[2], [(p, r) for p, (_, r) in zip(points, results)])


def calibrate_lambda(model_at_unit_lambda, empirical) -> float:
    """Least-squares multiplier mapping lambda=1 model counts onto measured counts."""
    m = np.asarray(model_at_unit_lambda, dtype=float)
    e = np.asarray(empirical, dtype=float)
    den = float(m @ m)
    if den == 0:
        raise ValueError("model counts are all zero")
    return float(m @ e) / den
