"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line.

Run standalone with ``python tests/test_acceptance.py`` or under pytest.
"""

import time

import mpmath
import numpy as np
import pytest

from ijsim.analytic import ser_closed_form
from ijsim.channel import ChannelSpec, receive
from ijsim.frame_layout import PhyConfig, layout_frame, n_data_symbols
from ijsim.harness import (
    ConstraintViolation,
    ExperimentConfig,
    default_workers,
    is_unimodal,
    load_payload,
    mean_ser,
    resolve_energy,
    run_sweep,
)
from ijsim.jamming import SCHEMES, build_schedule
from ijsim.phy import transmit
from ijsim.receiver import measure_ser, receive_frames, recovered_payload

SEEDS = tuple(range(10))
FRAMES = 20
RHO10 = tuple(round(float(x), 6) for x in np.linspace(0.05, 0.85, 10))
WORKERS = default_workers()

# operating points, in multiples of the energy that jams every critical
# HT-LTF window at JSR 1
E_CASCADE = 100.0
E_ORDERING = (0.2, 0.4)
E_UNIMODAL = 0.7


@pytest.fixture(scope="module")
def tx():
    return transmit(load_payload(ExperimentConfig(frames=FRAMES)))


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail

    return emit


def _sweep(tx, schemes, energies, rhos=RHO10, **kw):
    cfg = ExperimentConfig(
        schemes=schemes, e_j_grid=energies, rho_grid=rhos, seeds=SEEDS, frames=FRAMES, workers=WORKERS, **kw
    )
    return cfg, run_sweep(cfg, tx)


def _best(rows, scheme, e_j, rhos):
    if scheme in ("CJS", "PerJPT"):
        return mean_ser(rows, scheme=scheme, e_j=e_j), None
    curve = [mean_ser(rows, scheme=scheme, e_j=e_j, rho=r) for r in rhos]
    i = int(np.argmax(curve))
    return curve[i], rhos[i]


def test_c1_clean_roundtrip(tx, verdict):
    t0 = time.perf_counter()
    chan = ChannelSpec(h_ae=1.0, n0_eve=0.0)
    res = receive_frames(receive(tx.stream, None, chan, "Eve", 0), tx)
    payload = load_payload(ExperimentConfig(frames=FRAMES))
    dt = time.perf_counter() - t0
    ok = (
        recovered_payload(res, tx) == payload
        and all(r.fcs_pass for r in res)
        and measure_ser(res) == 0
        and dt < 10
    )
    verdict("C1 roundtrip", ok, f"{len(res)} frames, SER={measure_ser(res)}, {dt:.2f} s")


def brute_n_sym(length, l_dbps=234):
    n = 0
    while n * l_dbps < 16 + 8 * length + 6:
        n += 1
    return n


def test_c2_frame_arithmetic(verdict):
    t0 = time.perf_counter()
    cfg = PhyConfig(l_msdu_bytes=4000 - 28)
    bad = []
    for length in range(1, 4001):
        if n_data_symbols(length, 234) != brute_n_sym(length):
            bad.append(length)
            continue
        lay = layout_frame(length, cfg)
        w = lay.field_windows
        part = w[0][1] == 0 and w[-1][2] == lay.n_samples_frame and all(a[2] == b[1] for a, b in zip(w, w[1:]))
        if not part or lay.n_sym != brute_n_sym(length):
            bad.append(length)
    dt = time.perf_counter() - t0
    verdict("C2 frame arithmetic", not bad and dt < 1, f"{len(bad)} mismatches over LENGTH 1..4000, {dt:.3f} s")


def test_c3_closed_form_spot_values(verdict):
    mpmath.mp.dps = 50

    def oracle(ratio):
        q = mpmath.erfc(mpmath.sqrt(mpmath.mpf(2) / 7 * ratio) / mpmath.sqrt(2)) / 2
        return float(1 - (1 - mpmath.mpf(3) / 4 * q) ** 2)

    got = [ser_closed_form(14.0, 1.0), ser_closed_form(1.0, 0.0), ser_closed_form(1.0, 1e300)]
    want = [oracle(14), 0.0, 0.609375]
    ok = all(abs(g - w) <= 1e-6 for g, w in zip(got, want)) and abs(got[0] - 0.033834) <= 1e-6
    verdict("C3 closed-form spot values", ok, f"got {got}, oracle {want}")


def test_c4_energy_conservation(tx, verdict):
    rng = np.random.default_rng(4)
    worst = 0.0
    halving_ok = True
    for _ in range(100):
        scheme = SCHEMES[rng.integers(len(SCHEMES))]
        e_j = float(10 ** rng.uniform(-3, 6))
        rho = float(rng.uniform(0.02, 0.85))
        s = build_schedule(tx.plan, scheme, e_j, rho, 12, int(rng.integers(2**31)))
        spent = float(np.sum(np.abs(s.amplitude[s.beta]) ** 2))
        worst = max(worst, abs(spent - e_j) / e_j)
        # PerJDT width w vs w/2 at the same budget
        width = 2 * int(rng.integers(1, 3200))
        full = build_schedule(tx.plan, "PerJDT", e_j, width / 7120)
        half = build_schedule(tx.plan, "PerJDT", e_j, (width // 2) / 7120)
        halving_ok &= half.n_jammed * 2 == full.n_jammed and half.power == 2 * full.power
    verdict("C4 energy conservation", worst <= 1e-9 and halving_ok, f"max rel err {worst:.2e}, halving exact={halving_ok}")


def test_c5_cascade(tx, verdict):
    rhos = (0.05, 0.2, 0.4, 0.6, 0.85)
    cfg, rep = _sweep(tx, SCHEMES, (E_CASCADE,), rhos)
    rows = rep.feasible_rows()
    e_j = resolve_energy(cfg, tx, E_CASCADE)
    jsr = np.mean([r["jsr"] for r in rows if r["scheme"] == "PerJPT"])
    pt = mean_ser(rows, scheme="PerJPT", e_j=e_j)
    others = {s: _best(rows, s, e_j, rhos)[0] for s in SCHEMES if s != "PerJPT"}
    ok = jsr >= 1 and all(pt > v for v in others.values()) and abs(pt - 0.5) <= 0.05
    detail = f"JSR={jsr:.1f} PerJPT={pt:.4f} vs " + ", ".join(f"{k}={v:.4f}" for k, v in others.items())
    verdict("C5 preamble cascade", ok, detail)


@pytest.mark.parametrize("e", E_ORDERING)
def test_c6_scheme_ordering(tx, verdict, e):
    schemes = ("CJS", "PerJDT", "RepJDT", "RanJDT")
    cfg, rep = _sweep(tx, schemes, (e,))
    rows = rep.feasible_rows()
    e_j = resolve_energy(cfg, tx, e)
    best = {s: _best(rows, s, e_j, RHO10)[0] for s in schemes}
    ok = best["RepJDT"] >= best["CJS"] and best["RanJDT"] <= min(best["PerJDT"], best["RepJDT"])
    verdict(f"C6 ordering at e={e}", ok, ", ".join(f"{k}={v:.5f}" for k, v in best.items()))


def test_c7_perjdt_unimodal(tx, verdict):
    cfg, rep = _sweep(tx, ("PerJDT",), (E_UNIMODAL,))
    e_j = resolve_energy(cfg, tx, E_UNIMODAL)
    curve = [mean_ser(rep.rows, scheme="PerJDT", e_j=e_j, rho=r) for r in RHO10]
    verdict("C7 PerJDT unimodal", is_unimodal(curve), " ".join(f"{v:.5f}" for v in curve))


def test_c8_bob_constraint(tx, verdict):
    cfg = ExperimentConfig(
        schemes=SCHEMES, e_j_grid=(0.4, 30.0), rho_grid=(0.2, 0.6), seeds=SEEDS[:3], frames=FRAMES, workers=WORKERS
    )
    rep = run_sweep(cfg, tx, audit=False)
    clean = all(r["bob_errors"] == 0 for r in rep.feasible_rows())
    bad_cfg = ExperimentConfig(
        schemes=("PerJPT",), e_j_grid=(30.0,), seeds=(0,), frames=FRAMES, channel=ChannelSpec(h_jb=1.0)
    )
    try:
        run_sweep(bad_cfg, tx)
        aborted = False
    except ConstraintViolation:
        aborted = True
    verdict("C8 Bob error-free", clean and aborted, f"{len(rep.rows)} default rows clean={clean}, h_jb=1 aborts={aborted}")


def test_c9_worker_determinism(tx, verdict, tmp_path):
    files = {}
    for w in (1, 8):
        cfg = ExperimentConfig(
            schemes=SCHEMES, e_j_grid=(0.4, 30.0), rho_grid=(0.2, 0.6), seeds=(0, 1), frames=2, workers=w
        )
        out = tmp_path / f"w{w}"
        run_sweep(cfg).write(out)
        files[w] = {name: (out / name).read_bytes() for name in ("sweep.csv", "analytic.csv", "summary.csv", "run.json")}
    same = files[1] == files[8]
    verdict("C9 worker determinism", same, f"{len(files[1]['sweep.csv'])} bytes of sweep.csv, identical={same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
