"""Jamming schedules: the per-sample indicator, pulse amplitude and jamming waveform.

Every constructor spends the whole energy budget evenly over the jammed
samples. Random choices draw from per-frame PCG64 substreams spawned from a
single ``numpy.random.SeedSequence`` so any frame can be regenerated on its own.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Final

import numpy as np

from .frame_layout import FrameLayout, MessagePlan

SCHEMES: Final[tuple[str, ...]] = ("CJS", "PerJPT", "PerJDT", "RepJDT", "RanJDT", "RanJFT")

# substream tags under one user seed
_TAG_BETA: Final[int] = 3
_TAG_WAVE: Final[int] = 2


class EmptyScheduleError(ValueError):
    """A random schedule selected no samples; retry with another seed."""


def frame_rngs(seed: int, tag: int, n_frame: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence([int(seed), tag])
    return [np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(n_frame)]


@dataclass
class JamSchedule:
    beta: np.ndarray  # bool, length n_s_total
    power: float  # |s_j(k)|^2 on jammed samples
    scheme_id: str
    seed: int
    n_frame: int
    n_samples_frame: int
    params: dict

    @property
    def amplitude(self) -> np.ndarray:
        return np.where(self.beta, math.sqrt(self.power), 0.0)

    @property
    def n_jammed(self) -> int:
        return int(np.count_nonzero(self.beta))

    @property
    def energy(self) -> float:
        return self.power * self.n_jammed

    @property
    def rho(self) -> float:
        return self.n_jammed / len(self.beta)

    def frame_beta(self, n: int) -> np.ndarray:
        return self.beta[n * self.n_samples_frame : (n + 1) * self.n_samples_frame]

    def waveform(self) -> np.ndarray:
        """Jamming samples beta(k)s_j(k): circular Gaussian, renormalised per frame.

        Each frame's jammed samples carry exactly ``power`` x count energy.
        """
        n = self.n_samples_frame
        out = np.zeros(len(self.beta), dtype=complex)
        for f, rng in enumerate(frame_rngs(self.seed, _TAG_WAVE, self.n_frame)):
            b = self.frame_beta(f)
            m = int(np.count_nonzero(b))
            if m == 0:
                continue
            w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            w *= math.sqrt(self.power * m / float(np.sum(np.abs(w) ** 2)))
            out[f * n : (f + 1) * n][b] = w
        return out

    def pulses(self) -> list[tuple[int, int, int]]:
        """(frame_index, start_sample, end_sample) runs, end exclusive, frame-relative."""
        rows = []
        for f in range(self.n_frame):
            b = self.frame_beta(f).astype(np.int8)
            edges = np.diff(np.r_[0, b, 0])
            starts = np.flatnonzero(edges == 1)
            stops = np.flatnonzero(edges == -1)
            rows.extend((f, int(a), int(z)) for a, z in zip(starts, stops))
        return rows

    def export_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame_index", "start_sample", "end_sample"])
            w.writerows(self.pulses())


def _check_budget(e_j_avail: float) -> None:
    if not e_j_avail > 0:
        raise ValueError("jamming budget must be positive")


def _per_frame(plan: MessagePlan, frame_beta: np.ndarray) -> np.ndarray:
    return np.tile(frame_beta, plan.n_frame)


def _build(plan, beta, e_j_avail, scheme_id, seed, params) -> JamSchedule:
    count = int(np.count_nonzero(beta))
    if count == 0:
        raise EmptyScheduleError(f"{scheme_id}: no jammed samples")
    return JamSchedule(
        beta=beta,
        power=e_j_avail / count,
        scheme_id=scheme_id,
        seed=seed,
        n_frame=plan.n_frame,
        n_samples_frame=plan.layout.n_samples_frame,
        params=params,
    )


def make_cjs(plan: MessagePlan, e_j_avail: float, seed: int = 0) -> JamSchedule:
    _check_budget(e_j_avail)
    beta = np.ones(plan.n_s_total, dtype=bool)
    return _build(plan, beta, e_j_avail, "CJS", seed, {})


def make_perj(
    plan: MessagePlan,
    layout: FrameLayout,
    t_d_us: float,
    start_offset_us: float,
    e_j_avail: float,
    seed: int = 0,
    sample_rate_hz: float = 20e6,
) -> JamSchedule:
    """One pulse per frame, repeated every frame."""
    _check_budget(e_j_avail)
    start = _us(start_offset_us, sample_rate_hz)
    width = _us(t_d_us, sample_rate_hz)
    return make_perj_samples(plan, layout, width, start, e_j_avail, seed)


def make_perj_samples(plan, layout, width, start, e_j_avail, seed=0) -> JamSchedule:
    _check_budget(e_j_avail)
    n = layout.n_samples_frame
    if width < 1 or start < 0 or start + width > n:
        raise ValueError(f"pulse [{start}, {start + width}) does not fit a {n}-sample frame")
    fb = np.zeros(n, dtype=bool)
    fb[start : start + width] = True
    data_start, _ = layout.data_window
    if (start, start + width) == layout.htltf_critical_window or start + width <= data_start:
        scheme = "PerJPT"
    elif start >= data_start:
        scheme = "PerJDT"
    else:
        scheme = "PerJ"
    params = {"width": width, "start": start}
    return _build(plan, _per_frame(plan, fb), e_j_avail, scheme, seed, params)


def make_perjpt(plan: MessagePlan, e_j_avail: float, seed: int = 0) -> JamSchedule:
    a, b = plan.layout.htltf_critical_window
    return make_perj_samples(plan, plan.layout, b - a, a, e_j_avail, seed)


def pulse_train(span_start: int, span: int, n_pulse: int, duty: float) -> list[tuple[int, int]]:
    """Equally spaced pulses over ``[span_start, span_start + span)``."""
    if n_pulse < 1:
        raise ValueError("need at least one pulse")
    if not 0 < duty <= 1:
        raise ValueError("duty must be in (0, 1]")
    width = math.floor(duty * span / n_pulse + 1e-9)
    if width < 1:
        raise ValueError("pulse width below one sample")
    out = []
    for i in range(n_pulse):
        a = span_start + (i * span) // n_pulse
        out.append((a, a + width))
    return out


def make_repj(
    plan: MessagePlan,
    layout: FrameLayout,
    n_pulse: int,
    duty: float,
    start_offset_us: float,
    e_j_avail: float,
    seed: int = 0,
    sample_rate_hz: float = 20e6,
) -> JamSchedule:
    start = _us(start_offset_us, sample_rate_hz)
    return make_repj_samples(plan, layout, n_pulse, duty, start, e_j_avail, seed)


def make_repj_samples(plan, layout, n_pulse, duty, start, e_j_avail, seed=0) -> JamSchedule:
    _check_budget(e_j_avail)
    data_start, n = layout.data_window
    if start < data_start or start >= n:
        raise ValueError("RepJDT pulses must start inside the DATA field")
    fb = np.zeros(n, dtype=bool)
    for a, b in pulse_train(start, n - start, n_pulse, duty):
        fb[a:b] = True
    params = {"n_pulse": n_pulse, "duty": duty, "start": start}
    return _build(plan, _per_frame(plan, fb), e_j_avail, "RepJDT", seed, params)


def make_ranj(
    plan: MessagePlan,
    layout: FrameLayout,
    rho_target: float,
    position: str,
    seed: int,
    e_j_avail: float,
) -> JamSchedule:
    """Each eligible sample jammed independently with probability ``rho_target``.

    ``position`` is ``"DT"`` (DATA samples only) or ``"FT"`` (whole frame).
    """
    _check_budget(e_j_avail)
    if not 0 < rho_target <= 1:
        raise ValueError("rho_target must be in (0, 1]")
    n = layout.n_samples_frame
    if position == "DT":
        lo, hi = layout.data_window
    elif position == "FT":
        lo, hi = 0, n
    else:
        raise ValueError(f"unknown position {position!r}")
    beta = np.zeros(plan.n_s_total, dtype=bool)
    for f, rng in enumerate(frame_rngs(seed, _TAG_BETA, plan.n_frame)):
        beta[f * n + lo : f * n + hi] = rng.random(hi - lo) < rho_target
    params = {"rho_target": rho_target, "position": position}
    return _build(plan, beta, e_j_avail, "RanJ" + position, seed, params)


def _us(t_us: float, fs: float) -> int:
    n = t_us * 1e-6 * fs
    if abs(n - round(n)) > 1e-6:
        raise ValueError(f"{t_us} us is not a whole number of samples")
    return round(n)


# --- accounting ----------------------------------------------------------


@dataclass(frozen=True)
class JamBudget:
    e_j_avail: float
    e_j_spent: float
    p_j: float | None
    rho: float
    jsr: float | None

    @property
    def empty(self) -> bool:
        return self.p_j is None


def account(schedule: JamSchedule, legit: np.ndarray, e_j_avail: float | None = None) -> JamBudget:
    """Jamming energy, actual power, proportion and jamming-to-signal ratio.

    ``legit`` is the legitimate sample array (or a stream with ``.samples``).
    """
    s = getattr(legit, "samples", legit)
    if len(s) != len(schedule.beta):
        raise ValueError("schedule and legitimate stream are not aligned")
    n_on = schedule.n_jammed
    wave = schedule.waveform()
    spent = math.fsum(np.abs(wave[schedule.beta]) ** 2)
    avail = schedule.energy if e_j_avail is None else e_j_avail
    rho = n_on / len(schedule.beta)
    if n_on == 0:
        return JamBudget(avail, 0.0, None, 0.0, None)
    p_j = spent / n_on
    p_s = math.fsum(np.abs(s) ** 2) / len(s)
    return JamBudget(avail, spent, p_j, rho, p_j / p_s)


def build_schedule(
    plan: MessagePlan,
    scheme: str,
    e_j: float,
    rho: float | None = None,
    n_pulse: int = 12,
    seed: int = 0,
) -> JamSchedule:
    """Construct any scheme from a target jamming proportion over the whole stream.

    ``rho`` is ignored by CJS and PerJPT, whose proportion is fixed.
    Raises ``ValueError`` when the proportion cannot be realised.
    """
    layout = plan.layout
    n = layout.n_samples_frame
    data_start, _ = layout.data_window
    span = n - data_start
    if scheme == "CJS":
        return make_cjs(plan, e_j, seed)
    if scheme == "PerJPT":
        return make_perjpt(plan, e_j, seed)
    if rho is None or not 0 < rho <= 1:
        raise ValueError(f"{scheme} needs a proportion in (0, 1]")
    if scheme == "PerJDT":
        width = round(rho * n)
        if width > span:
            raise ValueError(f"rho={rho} exceeds the DATA field")
        return make_perj_samples(plan, layout, width, data_start, e_j, seed)
    if scheme == "RepJDT":
        duty = rho * n / span
        if duty > 1 + 1e-12:
            raise ValueError(f"rho={rho} exceeds the DATA field")
        return make_repj_samples(plan, layout, n_pulse, min(duty, 1.0), data_start, e_j, seed)
    if scheme == "RanJDT":
        p = rho * n / span
        if p > 1 + 1e-12:
            raise ValueError(f"rho={rho} exceeds the DATA field")
        return make_ranj(plan, layout, min(p, 1.0), "DT", seed, e_j)
    if scheme == "RanJFT":
        return make_ranj(plan, layout, rho, "FT", seed, e_j)
    raise ValueError(f"unknown scheme {scheme!r}")
