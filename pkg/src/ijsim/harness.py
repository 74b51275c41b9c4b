"""Sweeps, scheme comparison and the corrupted-payload demonstration.

Each sweep cell runs transmit -> schedule -> channel -> receiver for one
(scheme, energy, proportion, seed) and is independent of every other cell,
so cells are farmed out to a process pool and merged back in grid order.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    AnalyticParams,
    GridSpec,
    error_count,
    n_sym_total,
    optimize_schedule,
    overall_errors,
    ser_closed_form,
    weight,
)
from .channel import ChannelSpec, receive
from .frame_layout import PhyConfig
from .jamming import SCHEMES, EmptyScheduleError, build_schedule
from .phy import Transmission, bit_energy, transmit
from .receiver import RxConfig, measure_ser, receive_frames, recovered_payload, write_decode_log

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scheme",
    "e_j",
    "rho",
    "seed",
    "jsr",
    "ser_eve",
    "seree",
    "bob_errors",
    "frames_discarded",
    "ser_analytic",
    "n_error_analytic",
    "w",
    "ser_eve_qam",
    "feasible",
)
ANALYTIC_COLUMNS = ("scheme", "e_j", "rho", "p_j", "pr", "n_error", "w", "n_error_overall", "ser_analytic", "seree")

FULL_SCALE_MESSAGE_BYTES = 219600
SUMMARY_COLUMNS = ("e_j", "rho", "relation", "lhs", "rhs", "holds")
RHO_FREE = ("CJS", "PerJPT")


class ConstraintViolation(RuntimeError):
    """Bob decoded with errors: the error-free-legitimate-link constraint failed."""

    def __init__(self, rows):
        self.rows = rows
        super().__init__(f"{len(rows)} sweep cell(s) left Bob with bit errors")


@dataclass
class ExperimentConfig:
    payload_path: str | None = None
    schemes: tuple[str, ...] = SCHEMES
    # "htltf": multiples of the energy that jams every critical HT-LTF window
    # at JSR 1 (n_frame x 80 for unit signal power); "abs": raw sample units
    e_j_grid: tuple[float, ...] = (0.1, 0.2, 0.4, 1.0, 3.0)
    energy_unit: str = "htltf"
    rho_grid: tuple[float, ...] = tuple(round(float(x), 6) for x in np.linspace(0.05, 0.85, 10))
    seeds: tuple[int, ...] = tuple(range(10))
    frames: int = 20
    full_scale: bool = False
    n_pulse: int = 12
    channel: ChannelSpec = ChannelSpec()
    phy: PhyConfig = PhyConfig()
    analytic: AnalyticParams = AnalyticParams()
    corruption_factor: float = 10.0
    payload_seed: int = 2020
    out_dir: str = "results"
    workers: int = 1
    demo_rho: float = 0.2

    def __post_init__(self):
        if not self.schemes or not self.e_j_grid or not self.rho_grid or not self.seeds:
            raise ValueError("schemes, energy grid, rho grid and seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}")
        if self.energy_unit not in ("htltf", "abs"):
            raise ValueError("energy_unit must be 'htltf' or 'abs'")

    @property
    def rx(self) -> RxConfig:
        return RxConfig(
            corruption_factor=self.corruption_factor,
            expected_noise=max(self.channel.n0_eve, 1e-6),
        )

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        d["phy"]["coding_rate"] = str(self.phy.coding_rate)
        d["channel"] = {k: _cplx_out(v) for k, v in d["channel"].items()}
        return d


def _cplx_out(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


# --- payload & energy ----------------------------------------------------


def load_payload(cfg: ExperimentConfig) -> bytes:
    if cfg.payload_path is not None:
        try:
            data = Path(cfg.payload_path).read_bytes()
        except OSError as exc:
            raise ValueError(f"cannot read payload {cfg.payload_path}: {exc}") from exc
        if not data:
            raise ValueError("payload file is empty")
    else:
        n = FULL_SCALE_MESSAGE_BYTES if cfg.full_scale else cfg.frames * cfg.phy.l_msdu_bytes
        data = np.random.default_rng(cfg.payload_seed).integers(0, 256, n, dtype=np.uint8).tobytes()
    if not cfg.full_scale:
        data = data[: cfg.frames * cfg.phy.l_msdu_bytes]
    return data


def energy_unit(tx: Transmission) -> float:
    a, b = tx.plan.layout.htltf_critical_window
    return float(tx.plan.n_frame * (b - a))


def resolve_energy(cfg: ExperimentConfig, tx: Transmission, e: float) -> float:
    return e * energy_unit(tx) if cfg.energy_unit == "htltf" else float(e)


# --- one cell ------------------------------------------------------------

_TX: Transmission | None = None


def _init_worker(tx: Transmission) -> None:
    global _TX
    _TX = tx


def _cells(cfg: ExperimentConfig):
    for scheme in cfg.schemes:
        for e in cfg.e_j_grid:
            rhos = [None] if scheme in RHO_FREE else list(cfg.rho_grid)
            for rho in rhos:
                for seed in cfg.seeds:
                    yield scheme, e, rho, seed


def analytic_point(schedule, tx: Transmission, cfg: ExperimentConfig, e_b: float) -> dict:
    plan = tx.plan
    chan = cfg.channel
    pr = ser_closed_form(e_b, schedule.power, chan.h_ae, chan.h_je)
    n_err = error_count(schedule, pr, cfg.analytic, plan, cfg.phy)
    w = weight(schedule, plan.layout, cfg.analytic, chan.h_ae, chan.h_je)
    n_all = overall_errors(w, n_err, plan, cfg.phy)
    total = n_sym_total(plan, cfg.phy)
    return {
        "p_j": schedule.power,
        "pr": pr,
        "n_error": n_err,
        "w": w,
        "n_error_overall": n_all,
        "ser_analytic": n_all / total,
        "seree": n_all / (total * schedule.energy),
    }


def run_cell(tx: Transmission, cfg: ExperimentConfig, scheme: str, e: float, rho, seed: int) -> dict:
    e_j = resolve_energy(cfg, tx, e)
    row = dict.fromkeys(CSV_COLUMNS, "")
    row.update(scheme=scheme, e_j=e_j, seed=seed)
    try:
        sched = build_schedule(tx.plan, scheme, e_j, rho, cfg.n_pulse, seed)
    except (EmptyScheduleError, ValueError) as exc:
        log.info("infeasible cell %s e_j=%g rho=%s seed=%d: %s", scheme, e_j, rho, seed, exc)
        row.update(rho=rho, feasible=0)
        return row

    wave = sched.waveform()
    n_on = sched.n_jammed
    spent = float(np.vdot(wave, wave).real)
    p_s = float(np.vdot(tx.stream.samples, tx.stream.samples).real) / len(tx.stream)

    eve = receive_frames(receive(tx.stream, sched, cfg.channel, "Eve", seed, wave), tx, cfg.rx)
    bob = receive_frames(receive(tx.stream, sched, cfg.channel, "Bob", seed, wave), tx, cfg.rx)
    ser = measure_ser(eve)
    a = analytic_point(sched, tx, cfg, bit_energy(tx.stream, cfg.phy))

    row.update(
        rho=sched.rho if rho is None else rho,
        jsr=(spent / n_on) / p_s,
        ser_eve=ser,
        seree=ser / spent,
        bob_errors=sum(r.bit_errors for r in bob),
        frames_discarded=sum(r.discarded for r in eve),
        ser_analytic=a["ser_analytic"],
        n_error_analytic=a["n_error"],
        w=a["w"],
        ser_eve_qam=measure_ser(eve, "qam"),
        feasible=1,
    )
    return row


def _run_cell_worker(args):
    cfg, cell = args
    return run_cell(_TX, cfg, *cell)


# --- sweep ---------------------------------------------------------------


@dataclass
class MetricsReport:
    rows: list[dict]
    analytic: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    summary: list[dict] = field(default_factory=list)

    def feasible_rows(self) -> list[dict]:
        return [r for r in self.rows if r["feasible"] == 1]

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "sweep.csv", CSV_COLUMNS, self.rows)
        _write_csv(out / "analytic.csv", ANALYTIC_COLUMNS, self.analytic)
        _write_csv(out / "summary.csv", SUMMARY_COLUMNS, self.summary)
        (out / "run.json").write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in columns})


def _map_cells(tx: Transmission, cfg: ExperimentConfig, cells: list) -> list[dict]:
    if cfg.workers <= 1:
        return [run_cell(tx, cfg, *c) for c in cells]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(cfg.workers, mp_context=ctx, initializer=_init_worker, initargs=(tx,)) as ex:
        chunk = max(1, len(cells) // (4 * cfg.workers))
        return list(ex.map(_run_cell_worker, [(cfg, c) for c in cells], chunksize=chunk))


def run_sweep(cfg: ExperimentConfig, tx: Transmission | None = None, audit: bool = True) -> MetricsReport:
    tx = tx or transmit(load_payload(cfg), cfg.phy)
    cells = list(_cells(cfg))
    rows = _map_cells(tx, cfg, cells)

    e_b = bit_energy(tx.stream, cfg.phy)
    analytic = []
    for scheme in cfg.schemes:
        for e in cfg.e_j_grid:
            e_j = resolve_energy(cfg, tx, e)
            for rho in [None] if scheme in RHO_FREE else cfg.rho_grid:
                try:
                    s = build_schedule(tx.plan, scheme, e_j, rho, cfg.n_pulse, cfg.seeds[0])
                except (EmptyScheduleError, ValueError):
                    continue
                point = analytic_point(s, tx, cfg, e_b)
                analytic.append({"scheme": scheme, "e_j": e_j, "rho": s.rho if rho is None else rho, **point})

    meta = {
        "config": cfg.echo(),
        "n_frame": tx.plan.n_frame,
        "n_s_total": tx.plan.n_s_total,
        "message_bytes": tx.plan.l_message_bytes,
        "energy_unit_samples": energy_unit(tx),
        "e_b": e_b,
        "versions": {"ijsim": __version__, "numpy": np.__version__},
    }
    report = MetricsReport(rows, analytic, meta)
    report.summary = ordering_summary(report)
    if audit:
        bad = [r for r in report.feasible_rows() if r["bob_errors"] != 0]
        if bad:
            raise ConstraintViolation(bad)
    return report


# --- summaries -----------------------------------------------------------


def mean_ser(rows, **match) -> float:
    vals = [
        r["ser_eve"]
        for r in rows
        if r["feasible"] == 1 and all(_close(r[k], v) for k, v in match.items())
    ]
    if not vals:
        raise KeyError(f"no feasible rows for {match}")
    return float(np.mean(vals))


def _close(a, b) -> bool:
    if isinstance(b, float) and isinstance(a, float):
        return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-15)
    return a == b


def ser_curve(rows, scheme: str, e_j: float, rhos) -> list[float]:
    return [mean_ser(rows, scheme=scheme, e_j=e_j, rho=rho) for rho in rhos]


def is_unimodal(values) -> bool:
    """True for a rise-then-fall sequence with a strictly interior peak."""
    v = list(values)
    p = int(np.argmax(v))
    if p == 0 or p == len(v) - 1:
        return False
    rising = all(v[i] <= v[i + 1] for i in range(p))
    falling = all(v[i] >= v[i + 1] for i in range(p, len(v) - 1))
    return rising and falling and v[p] > v[0] and v[p] > v[-1]


def ordering_summary(report: MetricsReport) -> list[dict]:
    """Mean-over-seeds ordering checks.

    ``RanJDT <= RepJDT`` at every matched (E_J, rho) and, per E_J, the best
    RepJDT over rho against CJS.
    """
    rows = report.feasible_rows()
    have = {r["scheme"] for r in rows}
    out = []
    for e_j in sorted({r["e_j"] for r in rows}):
        if {"RanJDT", "RepJDT"} <= have:
            rhos = sorted({r["rho"] for r in rows if r["scheme"] == "RanJDT" and _close(r["e_j"], e_j)})
            for rho in rhos:
                try:
                    lhs = mean_ser(rows, scheme="RanJDT", e_j=e_j, rho=rho)
                    rhs = mean_ser(rows, scheme="RepJDT", e_j=e_j, rho=rho)
                except KeyError:
                    continue
                out.append({"e_j": e_j, "rho": rho, "relation": "RanJDT<=RepJDT", "lhs": lhs, "rhs": rhs, "holds": int(lhs <= rhs)})
        if {"RepJDT", "CJS"} <= have:
            rep = [r for r in rows if r["scheme"] == "RepJDT" and _close(r["e_j"], e_j)]
            if rep and any(r["scheme"] == "CJS" and _close(r["e_j"], e_j) for r in rows):
                best = max(mean_ser(rows, scheme="RepJDT", e_j=e_j, rho=rho) for rho in sorted({r["rho"] for r in rep}))
                cjs = mean_ser(rows, scheme="CJS", e_j=e_j)
                out.append({"e_j": e_j, "rho": "", "relation": "best RepJDT>=CJS", "lhs": best, "rhs": cjs, "holds": int(best >= cjs)})
    return out


def comparison_table(report: MetricsReport, cfg: ExperimentConfig) -> list[dict]:
    """Best mean-over-seeds SER per (scheme, energy) across the rho grid."""
    rows = report.feasible_rows()
    table = []
    for scheme in cfg.schemes:
        for e_j in sorted({r["e_j"] for r in report.rows if r["scheme"] == scheme}):
            rhos = sorted({r["rho"] for r in rows if r["scheme"] == scheme and _close(r["e_j"], e_j)})
            if not rhos:
                continue
            curve = [mean_ser(rows, scheme=scheme, e_j=e_j, rho=rho) for rho in rhos]
            i = int(np.argmax(curve))
            table.append({"scheme": scheme, "e_j": e_j, "best_rho": rhos[i], "best_ser": curve[i], "n_seeds": len(cfg.seeds)})
    return table


def run_comparison(cfg: ExperimentConfig, report: MetricsReport | None = None) -> list[dict]:
    if len(cfg.schemes) < 2:
        raise ValueError("comparison needs at least two schemes")
    report = report or run_sweep(cfg)
    table = comparison_table(report, cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "comparison.csv", ("scheme", "e_j", "best_rho", "best_ser", "n_seeds"), table)
    return table


# --- picture demo --------------------------------------------------------


def byte_diff_fraction(a: bytes, b: bytes) -> float:
    x = np.frombuffer(a, np.uint8)
    y = np.frombuffer(b, np.uint8)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    return float(np.count_nonzero(x != y)) / len(x)


def corrupt_payload_demo(cfg: ExperimentConfig, seed: int | None = None) -> list[dict]:
    """Write Eve's recovered payload per scheme and energy, plus an unjammed baseline."""
    payload = load_payload(cfg)
    tx = transmit(payload, cfg.phy)
    seed = cfg.seeds[0] if seed is None else seed
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    results = []
    clean = receive_frames(receive(tx.stream, None, cfg.channel, "Eve", seed), tx, cfg.rx)
    got = recovered_payload(clean, tx)
    (out / "eve_none.bin").write_bytes(got)
    results.append({"scheme": "none", "e_j": 0.0, "diff_fraction": byte_diff_fraction(got, payload), "file": "eve_none.bin"})

    for scheme in cfg.schemes:
        for e in cfg.e_j_grid:
            e_j = resolve_energy(cfg, tx, e)
            try:
                sched = build_schedule(tx.plan, scheme, e_j, cfg.demo_rho, cfg.n_pulse, seed)
            except (EmptyScheduleError, ValueError):
                continue
            res = receive_frames(receive(tx.stream, sched, cfg.channel, "Eve", seed), tx, cfg.rx)
            got = recovered_payload(res, tx)
            name = f"eve_{scheme}_{e:g}.bin"
            (out / name).write_bytes(got)
            write_decode_log(res, out / f"eve_{scheme}_{e:g}_frames.csv")
            frac = byte_diff_fraction(got, payload)
            log.info("%s e_j=%g: %.4f of bytes differ", scheme, e_j, frac)
            results.append({"scheme": scheme, "e_j": e_j, "diff_fraction": frac, "file": name})
    _write_csv(out / "demo.csv", ("scheme", "e_j", "diff_fraction", "file"), results)
    return results


def run_optimizer(cfg: ExperimentConfig, e_j: float) -> dict:
    tx = transmit(load_payload(cfg), cfg.phy)
    grid = GridSpec(schemes=tuple(cfg.schemes), rhos=tuple(cfg.rho_grid), n_pulses=(cfg.n_pulse,), seed=cfg.seeds[0])
    res = optimize_schedule(
        resolve_energy(cfg, tx, e_j), cfg.analytic, tx.plan, cfg.channel, bit_energy(tx.stream, cfg.phy), grid, cfg.phy
    )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res.export_json(out / "optimizer.json")
    return res.to_json()


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def default_workers() -> int:
    return min(8, os.cpu_count() or 1)
