"""Flat-fading received-signal model for Bob and Eve."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jamming import JamSchedule, frame_rngs
from .phy import SampleStream

_TAG_NOISE = {"Bob": 11, "Eve": 12}


@dataclass(frozen=True)
class ChannelSpec:
    h_ab: complex = 1.0
    h_ae: complex = 1.0
    h_jb: complex = 0.0
    h_je: complex = 1.0
    n0_bob: float = 0.0
    n0_eve: float = 1e-3
    sync_offset_samples: int = 0

    def __post_init__(self):
        if self.n0_bob < 0 or self.n0_eve < 0:
            raise ValueError("noise variances must be non-negative")
        for h in (self.h_ab, self.h_ae, self.h_jb, self.h_je):
            if not np.isfinite(h):
                raise ValueError("channel gains must be finite")

    def gains(self, who: str) -> tuple[complex, complex, float]:
        if who == "Bob":
            return self.h_ab, self.h_jb, self.n0_bob
        if who == "Eve":
            return self.h_ae, self.h_je, self.n0_eve
        raise ValueError(f"unknown receiver {who!r}")


def shift(x: np.ndarray, d: int) -> np.ndarray:
    """y[k] = x[k + d], zero outside the transmission."""
    if d == 0:
        return x
    y = np.zeros_like(x)
    if d > 0:
        y[: len(x) - d] = x[d:]
    else:
        y[-d:] = x[: len(x) + d]
    return y


def awgn(n: int, n0: float, seed: int, tag: int, n_frame: int) -> np.ndarray:
    """Circular complex Gaussian noise of variance ``n0``, one substream per frame."""
    out = np.zeros(n, dtype=complex)
    if n0 == 0:
        return out
    chunks = np.array_split(np.arange(n), n_frame)
    sigma = math.sqrt(n0 / 2)
    for idx, rng in zip(chunks, frame_rngs(seed, tag, n_frame)):
        out[idx] = sigma * (rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx)))
    return out


def receive(
    legit: SampleStream,
    jam: JamSchedule | None,
    chan: ChannelSpec,
    who: str,
    seed: int,
    jam_wave: np.ndarray | None = None,
) -> SampleStream:
    """r(k) = h s(k) + h_j beta(k+d) s_j(k+d) + n(k).

    ``jam_wave`` lets callers reuse a precomputed ``jam.waveform()``.
    """
    h, h_j, n0 = chan.gains(who)
    s = legit.samples
    r = h * s
    if jam is not None:
        if len(jam.beta) != len(s):
            raise ValueError("jamming schedule and legitimate stream lengths differ")
        if h_j != 0:
            wave = jam.waveform() if jam_wave is None else jam_wave
            r = r + h_j * shift(wave, chan.sync_offset_samples)
    n_frame = max(1, len(legit.frame_boundaries))
    r = r + awgn(len(s), n0, seed, _TAG_NOISE[who], n_frame)
    return SampleStream(r, legit.sample_rate_hz, list(legit.frame_boundaries), legit.layout, legit.data_scale)
