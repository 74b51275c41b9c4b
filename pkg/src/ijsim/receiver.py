"""Eavesdropper / legitimate receiver.

Per frame: L-STF correlation sync (optional), channel and noise-level
estimation from the last HT-LTF repetition, zero-forcing equalisation with the
per-subcarrier estimate, hard 64-QAM decisions, parity strip, descrambling
and FCS check.
Nothing about jamming is known to the receiver; a corrupted HT-LTF simply
yields a wrong channel estimate for the whole data field.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import correlate

from .frame_layout import FrameLayout, PhyConfig
from .phy import (
    REFS,
    Constellation,
    Transmission,
    fcs_ok,
    ofdm_bins,
    parity_expand,
    parity_strip,
    psdu_from_data_bits,
    scramble,
)


class SyncError(RuntimeError):
    pass


@dataclass(frozen=True)
class RxConfig:
    corruption_factor: float = 10.0
    # clean-calibrated noise level; the flag fires above factor x this
    expected_noise: float = 1e-3
    # preamble-bypass: stale channel estimate (scalar or 52 per-subcarrier values)
    bypass_h: complex | np.ndarray | None = None
    discard_failed: bool = True
    sync: bool = False
    sync_threshold: float = 0.6
    sync_search: int = 160


@dataclass
class RxEstimate:
    h_hat: complex
    noise_level_hat: float
    sync_index: int
    htltf_corrupted: bool
    h_sub: np.ndarray = field(repr=False, default=None)


@dataclass
class DecodeResult:
    """Outcome for one frame.

    ``bit_errors`` counts binary decision errors over the data-field
    information bits; ``qam_errors`` counts wrong 64-QAM decisions.
    """

    bits: np.ndarray
    bit_errors: int
    n_bits: int
    qam_errors: int
    n_qam: int
    fcs_pass: bool
    discarded: bool
    htltf_corrupted: bool = False
    psdu: bytes = b""


def sync_detect(
    rx: np.ndarray,
    reference: np.ndarray = REFS.lstf,
    threshold: float = 0.6,
    search: int | None = None,
) -> int:
    """Index maximising normalised cross-correlation with ``reference``."""
    rx = np.asarray(getattr(rx, "samples", rx))
    L = len(reference)
    if len(rx) < L:
        raise SyncError("stream shorter than the reference")
    n_pos = len(rx) - L + 1 if search is None else min(search, len(rx) - L + 1)
    seg = rx[: n_pos + L - 1]
    num = np.abs(correlate(seg, reference, mode="valid", method="fft"))
    energy = np.convolve(np.abs(seg) ** 2, np.ones(L), mode="valid")
    den = np.linalg.norm(reference) * np.sqrt(np.maximum(energy, 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        metric = np.where(den > 1e-12 * np.linalg.norm(reference), num / den, 0.0)
    k = int(np.argmax(metric))
    if metric[k] < threshold:
        raise SyncError(f"correlation peak {metric[k]:.3f} below threshold {threshold}")
    return k


def estimate_htltf(
    rx_frame: np.ndarray,
    layout: FrameLayout,
    known_htltf: np.ndarray = REFS.htltf,
    cfg: RxConfig = RxConfig(),
    sync_index: int = 0,
) -> RxEstimate:
    """Least-squares channel estimate from the critical HT-LTF repetition.

    ``h_hat`` is the flat LS fit over the 80 samples; ``h_sub`` the
    per-subcarrier LS estimate used by the equaliser. The noise level is the
    power of the per-subcarrier residual around the flat fit.
    """
    a, b = layout.htltf_critical_window
    y = rx_frame[a:b]
    x = known_htltf
    h_hat = complex(np.vdot(x, y) / np.vdot(x, x))
    x_bins = ofdm_bins(x)[0]
    y_bins = ofdm_bins(y)[0]
    h_sub = y_bins / x_bins
    noise = float(np.mean(np.abs(y_bins - h_hat * x_bins) ** 2))
    corrupted = noise > cfg.corruption_factor * cfg.expected_noise
    return RxEstimate(h_hat, noise, sync_index, bool(corrupted), h_sub)


def demodulate(
    rx_frame: np.ndarray,
    layout: FrameLayout,
    est: RxEstimate,
    truth_bits: np.ndarray | None = None,
    phy: PhyConfig = PhyConfig(),
    cfg: RxConfig = RxConfig(),
) -> DecodeResult:
    a, b = layout.data_window
    bins = ofdm_bins(rx_frame[a:b])
    h = est.h_sub if cfg.bypass_h is None else np.broadcast_to(cfg.bypass_h, bins.shape[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        eq = bins / h
    eq = np.nan_to_num(eq, nan=0.0, posinf=0.0, neginf=0.0)
    coded = Constellation(phy.modulation_order_bits).demap(eq.reshape(-1))
    bits = scramble(parity_strip(coded, phy))
    psdu = psdu_from_data_bits(bits, layout)
    ok = fcs_ok(psdu)

    bit_err = qam_err = 0
    n_qam = coded.size // phy.modulation_order_bits
    if truth_bits is not None:
        bit_err = int(np.count_nonzero(bits != truth_bits))
        wrong = parity_expand(scramble(truth_bits), phy) != coded
        qam_err = int(np.count_nonzero(wrong.reshape(n_qam, -1).any(axis=1)))
    return DecodeResult(
        bits=bits,
        bit_errors=bit_err,
        n_bits=bits.size,
        qam_errors=qam_err,
        n_qam=n_qam,
        fcs_pass=ok,
        discarded=cfg.discard_failed and not ok,
        htltf_corrupted=est.htltf_corrupted,
        psdu=psdu,
    )


def receive_frames(rx, tx: Transmission, cfg: RxConfig = RxConfig()) -> list[DecodeResult]:
    """Decode every frame of a received stream against the transmitted ground truth."""
    layout = tx.plan.layout
    n = layout.n_samples_frame
    samples = rx.samples
    out = []
    for f, start in enumerate(tx.stream.frame_boundaries):
        if cfg.sync:
            lo = max(0, start - cfg.sync_search // 2)
            window = samples[lo : lo + cfg.sync_search + len(REFS.lstf)]
            start = lo + sync_detect(window, threshold=cfg.sync_threshold)
        frame = samples[start : start + n]
        if len(frame) < n:
            frame = np.concatenate([frame, np.zeros(n - len(frame), complex)])
        est = estimate_htltf(frame, layout, cfg=cfg, sync_index=start)
        out.append(demodulate(frame, layout, est, tx.info_bits[f], tx.cfg, cfg))
    return out


def measure_ser(results: list[DecodeResult], unit: str = "bit") -> float:
    """Error fraction over all frames, discarded frames included.

    ``unit="bit"`` counts binary decisions (saturates at 0.5 under random
    decisions); ``unit="qam"`` counts 64-QAM symbol decisions.
    """
    if not results:
        raise ValueError("no frames")
    if unit == "bit":
        return sum(r.bit_errors for r in results) / sum(r.n_bits for r in results)
    if unit == "qam":
        return sum(r.qam_errors for r in results) / sum(r.n_qam for r in results)
    raise ValueError(f"unknown unit {unit!r}")


def recovered_payload(results: list[DecodeResult], tx: Transmission) -> bytes:
    """Concatenated MSDUs as Eve decoded them, trimmed to the message length."""
    from .phy import FCS_BYTES, MAC_HEADER_BYTES

    body = b"".join(r.psdu[MAC_HEADER_BYTES:-FCS_BYTES] for r in results)
    return body[: tx.plan.l_message_bytes]


def write_decode_log(results: list[DecodeResult], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "symbol_errors", "fcs_pass", "htltf_corrupted"])
        for i, r in enumerate(results):
            w.writerow([i, r.bit_errors, int(r.fcs_pass), int(r.htltf_corrupted)])
