"""Legitimate transmitter: MAC framing, constellation mapping and OFDM sample assembly.

The PHY is deliberately simplified: no interleaver or convolutional code. The
data bits pass the standard x^7 + x^4 + 1 scrambler (fixed seed) so that
zero-padded frames still load the constellation evenly. Each OFDM data symbol carries ``l_dbps`` information bits expanded to
``l_dbps / r`` coded bits by a systematic single-parity code (one parity bit
per three information bits at r = 3/4), then Gray-mapped to 64-QAM on 52
data subcarriers (no pilots) with a 64-point IFFT and 16-sample cyclic prefix.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Final

import numpy as np

from .frame_layout import (
    SERVICE_BITS,
    TAIL_BITS,
    FrameLayout,
    MessagePlan,
    PhyConfig,
)

N_FFT: Final[int] = 64
N_CP: Final[int] = 16
# Subcarriers -26..-1 and 1..26 in numpy FFT bin order; DC unused, no pilots.
DATA_BINS: Final[np.ndarray] = np.r_[np.arange(1, 27), np.arange(64 - 26, 64)]
N_DATA_BINS: Final[int] = len(DATA_BINS)

# Seed for every fixed preamble reference sequence. Changing it changes the
# waveform, never the frame timing.
PREAMBLE_SEED: Final[int] = 0x802_11_E

MAC_HEADER_BYTES: Final[int] = 24
FCS_BYTES: Final[int] = 4

# 802.11 Gray labelling for one 8-PAM axis, index = 3-bit label b0b1b2 (b0 first).
_PAM8_BY_LABEL: Final[dict[tuple[int, int, int], int]] = {
    (0, 0, 0): -7,
    (0, 0, 1): -5,
    (0, 1, 1): -3,
    (0, 1, 0): -1,
    (1, 1, 0): 1,
    (1, 1, 1): 3,
    (1, 0, 1): 5,
    (1, 0, 0): 7,
}


def _pam_table(bits_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (level by label int, label bits by level index) for Gray PAM."""
    if bits_per_axis != 3:
        # binary-reflected Gray code generalises the 802.11 table
        n = 1 << bits_per_axis
        levels = np.arange(-(n - 1), n, 2)
        gray = np.array([i ^ (i >> 1) for i in range(n)])
        level_by_label = np.empty(n)
        level_by_label[gray] = levels
    else:
        level_by_label = np.empty(8)
        for bits, lvl in _PAM8_BY_LABEL.items():
            level_by_label[bits[0] << 2 | bits[1] << 1 | bits[2]] = lvl
    order = np.argsort(level_by_label)
    labels = order  # label of the i-th smallest level
    label_bits = ((labels[:, None] >> np.arange(bits_per_axis - 1, -1, -1)) & 1).astype(np.uint8)
    return level_by_label, label_bits


@dataclass(frozen=True)
class Constellation:
    """Square Gray-mapped QAM with unit average energy."""

    bits_per_symbol: int = 6

    def __post_init__(self):
        if self.bits_per_symbol % 2:
            raise ValueError("square QAM needs an even number of bits per symbol")

    @property
    def bits_per_axis(self) -> int:
        return self.bits_per_symbol // 2

    @property
    def scale(self) -> float:
        m = 1 << self.bits_per_symbol
        return float(np.sqrt(2 * (m - 1) / 3))

    @property
    def points(self) -> np.ndarray:
        """All points indexed by their integer label (first bit is MSB)."""
        labels = np.arange(1 << self.bits_per_symbol)
        bits = (labels[:, None] >> np.arange(self.bits_per_symbol - 1, -1, -1)) & 1
        return self.map(bits.astype(np.uint8).ravel())

    def map(self, bits: np.ndarray) -> np.ndarray:
        k = self.bits_per_axis
        level_by_label, _ = _pam_table(k)
        groups = np.asarray(bits, dtype=np.int64).reshape(-1, 2, k)
        weights = 1 << np.arange(k - 1, -1, -1)
        labels = groups @ weights
        return (level_by_label[labels[:, 0]] + 1j * level_by_label[labels[:, 1]]) / self.scale

    def demap(self, symbols: np.ndarray) -> np.ndarray:
        """Hard nearest-point decision; returns the decided bits."""
        k = self.bits_per_axis
        n = 1 << k
        _, label_bits = _pam_table(k)
        z = np.asarray(symbols) * self.scale

        def axis_index(x):
            idx = np.floor((x + (n - 1) + 1) / 2).astype(np.int64)
            return np.clip(idx, 0, n - 1)

        i_bits = label_bits[axis_index(z.real)]
        q_bits = label_bits[axis_index(z.imag)]
        return np.concatenate([i_bits, q_bits], axis=-1).reshape(-1).astype(np.uint8)


QAM64: Final[Constellation] = Constellation(6)


# --- scrambler -----------------------------------------------------------

SCRAMBLER_SEED: Final[int] = 0b1011101


def _scrambler_sequence(seed: int = SCRAMBLER_SEED) -> np.ndarray:
    state = [(seed >> i) & 1 for i in range(6, -1, -1)]  # x1..x7
    out = np.empty(127, np.uint8)
    for i in range(127):
        bit = state[3] ^ state[6]
        out[i] = bit
        state = [bit] + state[:-1]
    return out


_SCRAMBLE_SEQ: Final[np.ndarray] = _scrambler_sequence()


def scramble(bits: np.ndarray) -> np.ndarray:
    """XOR with the 127-periodic scrambler sequence; self-inverse."""
    bits = np.asarray(bits, dtype=np.uint8)
    return bits ^ np.resize(_SCRAMBLE_SEQ, bits.shape[-1])


# --- coding hook ---------------------------------------------------------


def parity_expand(info_bits: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Systematic rate-r expansion: append one XOR parity bit per group.

    Only r = (g)/(g+1) rates are supported; r = 3/4 gives groups of three.
    """
    r = cfg.coding_rate
    if r == 1:
        return np.asarray(info_bits, dtype=np.uint8)
    if r.denominator - r.numerator != 1:
        raise NotImplementedError(f"coding rate {r} has no parity-expansion mapping")
    g = r.numerator
    groups = np.asarray(info_bits, dtype=np.uint8).reshape(-1, g)
    parity = np.bitwise_xor.reduce(groups, axis=1)[:, None]
    return np.hstack([groups, parity]).reshape(-1)


def parity_strip(coded_bits: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    r = cfg.coding_rate
    if r == 1:
        return np.asarray(coded_bits, dtype=np.uint8)
    g = r.numerator
    return np.asarray(coded_bits, dtype=np.uint8).reshape(-1, g + 1)[:, :g].reshape(-1)


# --- OFDM ----------------------------------------------------------------

_BIN_GAIN: Final[float] = float(np.sqrt(N_FFT / N_DATA_BINS))


def ofdm_symbols(bins: np.ndarray) -> np.ndarray:
    """Map rows of 52 data-subcarrier values to 80-sample CP-OFDM symbols."""
    bins = np.atleast_2d(bins)
    grid = np.zeros((bins.shape[0], N_FFT), dtype=complex)
    grid[:, DATA_BINS] = bins * _BIN_GAIN
    body = np.fft.ifft(grid, axis=1, norm="ortho")
    return np.hstack([body[:, -N_CP:], body])


def ofdm_bins(samples: np.ndarray) -> np.ndarray:
    """Inverse of :func:`ofdm_symbols` for rows of 80 samples."""
    rows = np.asarray(samples).reshape(-1, N_FFT + N_CP)
    freq = np.fft.fft(rows[:, N_CP:], axis=1, norm="ortho")
    return freq[:, DATA_BINS] / _BIN_GAIN


# --- preamble references -------------------------------------------------


@dataclass(frozen=True)
class PreambleRefs:
    lstf: np.ndarray
    lltf: np.ndarray
    htstf: np.ndarray
    htltf: np.ndarray  # one 80-sample repetition
    lltf_bins: np.ndarray
    htltf_bins: np.ndarray


def _unit_power(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(np.mean(np.abs(x) ** 2))


def _ltf(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    qpsk = (rng.choice([-1.0, 1.0], N_DATA_BINS) + 1j * rng.choice([-1.0, 1.0], N_DATA_BINS))
    sym = _unit_power(ofdm_symbols(qpsk / np.sqrt(2))[0])
    return sym, ofdm_bins(sym)[0]


def _noise_like(rng: np.random.Generator, n: int) -> np.ndarray:
    return _unit_power(rng.standard_normal(n) + 1j * rng.standard_normal(n))


def preamble_refs() -> PreambleRefs:
    rng = np.random.default_rng(PREAMBLE_SEED)
    lstf = _noise_like(rng, N_FFT + N_CP)
    lltf, lltf_bins = _ltf(rng)
    htstf = _noise_like(rng, N_FFT + N_CP)
    htltf, htltf_bins = _ltf(rng)
    return PreambleRefs(lstf, lltf, htstf, htltf, lltf_bins, htltf_bins)


REFS: Final[PreambleRefs] = preamble_refs()


# --- MAC -----------------------------------------------------------------


def crc32(data: bytes) -> int:
    # zlib implements the reflected IEEE 802.3 CRC-32 (poly 0x04C11DB7)
    return zlib.crc32(data) & 0xFFFFFFFF


@dataclass(frozen=True)
class MacFrame:
    header: bytes
    msdu: bytes
    fcs: bytes

    @property
    def psdu(self) -> bytes:
        return self.header + self.msdu + self.fcs

    @property
    def length(self) -> int:
        return len(self.header) + len(self.msdu) + len(self.fcs)

    def fcs_ok(self) -> bool:
        return fcs_ok(self.psdu)


def fcs_ok(psdu: bytes) -> bool:
    if len(psdu) < FCS_BYTES:
        return False
    body, fcs = psdu[:-FCS_BYTES], psdu[-FCS_BYTES:]
    return crc32(body) == int.from_bytes(fcs, "little")


def mac_header(seq: int) -> bytes:
    frame_control = b"\x08\x00"  # data frame
    duration = b"\x00\x00"
    bob = bytes.fromhex("02000000000b")
    alice = bytes.fromhex("02000000000a")
    bssid = bytes.fromhex("0200000000ff")
    seq_ctrl = ((seq & 0xFFF) << 4).to_bytes(2, "little")
    return frame_control + duration + bob + alice + bssid + seq_ctrl


def make_mac_frame(msdu: bytes, seq: int = 0) -> MacFrame:
    header = mac_header(seq)
    fcs = crc32(header + msdu).to_bytes(FCS_BYTES, "little")
    return MacFrame(header, bytes(msdu), fcs)


def build_mac_frames(payload: bytes, plan: MessagePlan) -> list[MacFrame]:
    if len(payload) != plan.l_message_bytes:
        raise ValueError(
            f"payload has {len(payload)} bytes, plan expects {plan.l_message_bytes}"
        )
    l_msdu = plan.layout.length_bytes - MAC_HEADER_BYTES - FCS_BYTES
    padded = bytes(payload) + bytes(plan.l_pad_message_bytes)
    return [make_mac_frame(padded[i * l_msdu : (i + 1) * l_msdu], i) for i in range(plan.n_frame)]


# --- bit streams ---------------------------------------------------------


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")


def bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def data_field_bits(psdu: bytes, layout: FrameLayout) -> np.ndarray:
    """SERVICE + PSDU + tail + pad, i.e. the information bits of the data field."""
    if len(psdu) != layout.length_bytes:
        raise ValueError(f"PSDU of {len(psdu)} bytes does not match LENGTH={layout.length_bytes}")
    return np.concatenate(
        [
            np.zeros(SERVICE_BITS, np.uint8),
            bytes_to_bits(psdu),
            np.zeros(TAIL_BITS + layout.l_pad_bits, np.uint8),
        ]
    )


def psdu_from_data_bits(bits: np.ndarray, layout: FrameLayout) -> bytes:
    return bits_to_bytes(bits[SERVICE_BITS : SERVICE_BITS + 8 * layout.length_bytes])


# --- SIG fields ----------------------------------------------------------

SIG_BITS: Final[int] = 24
HT_MCS_64QAM_3_4: Final[int] = 6
_LEGACY_RATE_6M: Final[tuple[int, ...]] = (1, 1, 0, 1)


def _int_bits(v: int, n: int) -> list[int]:
    return [(v >> i) & 1 for i in range(n)]


def sig_bits(length_bytes: int, mcs: int = HT_MCS_64QAM_3_4) -> np.ndarray:
    """Three 24-bit SIG words: L-SIG, HT-SIG1, HT-SIG2 (CRC and smoothing fields zero)."""
    lsig = list(_LEGACY_RATE_6M) + [0] + _int_bits(length_bytes & 0xFFF, 12)
    lsig += [sum(lsig) & 1] + [0] * TAIL_BITS
    htsig1 = _int_bits(mcs, 7) + [0] + _int_bits(length_bytes & 0xFFFF, 16)
    htsig2 = [0] * SIG_BITS
    return np.array([lsig, htsig1, htsig2], dtype=np.uint8)


def sig_bins(words: np.ndarray) -> np.ndarray:
    """Rate-1/2 repetition + BPSK; the four spare subcarriers carry +1."""
    rows = []
    for w in np.atleast_2d(words):
        coded = np.repeat(w, 2)
        bpsk = 2.0 * coded - 1.0
        rows.append(np.concatenate([bpsk, np.ones(N_DATA_BINS - 2 * SIG_BITS)]))
    return np.array(rows, dtype=complex)


def decode_sig(bins: np.ndarray) -> np.ndarray:
    soft = np.real(np.atleast_2d(bins))[:, : 2 * SIG_BITS].reshape(-1, SIG_BITS, 2).sum(axis=2)
    return (soft > 0).astype(np.uint8)


def sig_length(words: np.ndarray) -> int:
    ht1 = words[1]
    return int(sum(int(b) << i for i, b in enumerate(ht1[8:24])))


# --- waveform ------------------------------------------------------------


@dataclass
class SampleStream:
    samples: np.ndarray
    sample_rate_hz: float
    frame_boundaries: list[int]
    layout: FrameLayout | None = None
    data_scale: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("sample stream contains non-finite values")

    def __len__(self) -> int:
        return len(self.samples)

    def frame(self, n: int) -> np.ndarray:
        start = self.frame_boundaries[n]
        return self.samples[start : start + self.layout.n_samples_frame]

    def data_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.samples), bool)
        a, b = self.layout.data_window
        for start in self.frame_boundaries:
            mask[start + a : start + b] = True
        return mask


def preamble_samples(layout: FrameLayout) -> np.ndarray:
    sig = ofdm_symbols(sig_bins(sig_bits(layout.length_bytes))).reshape(-1)
    return np.concatenate(
        [REFS.lstf, REFS.lltf, sig, REFS.htstf, np.tile(REFS.htltf, 3)]
    )


def info_bits_frame(frame: MacFrame, layout: FrameLayout) -> np.ndarray:
    return data_field_bits(frame.psdu, layout)


def modulate_bits(info_bits: np.ndarray, layout: FrameLayout, cfg: PhyConfig) -> tuple[np.ndarray, float]:
    """OFDM data field for one frame, power-normalised to unit mean.

    Returns the samples and the applied normalisation factor.
    """
    coded = parity_expand(scramble(info_bits), cfg)
    if coded.size % cfg.modulation_order_bits:
        raise AssertionError("coded bit count not divisible by bits per symbol (layout bug)")
    const = Constellation(cfg.modulation_order_bits)
    points = const.map(coded).reshape(layout.n_sym, cfg.symbols_per_ofdm)
    if cfg.symbols_per_ofdm != N_DATA_BINS:
        raise NotImplementedError("subcarrier mapping assumes 52 symbols per OFDM symbol")
    data = ofdm_symbols(points).reshape(-1)
    scale = 1.0 / np.sqrt(np.mean(np.abs(data) ** 2))
    return data * scale, scale


def modulate_frame(frame: MacFrame, layout: FrameLayout, cfg: PhyConfig = PhyConfig()) -> SampleStream:
    if frame.length != layout.length_bytes:
        raise ValueError("layout does not match frame LENGTH")
    data, scale = modulate_bits(info_bits_frame(frame, layout), layout, cfg)
    samples = np.concatenate([preamble_samples(layout), data])
    return SampleStream(samples, cfg.sample_rate_hz, [0], layout, np.array([scale]))


@dataclass
class Transmission:
    """Everything Alice sends for one message, plus the ground truth bits."""

    plan: MessagePlan
    frames: list[MacFrame]
    stream: SampleStream
    info_bits: np.ndarray  # (n_frame, n_sym * l_dbps)
    cfg: PhyConfig


def transmit(payload: bytes, cfg: PhyConfig = PhyConfig()) -> Transmission:
    from .frame_layout import plan_message

    plan = plan_message(len(payload), cfg)
    frames = build_mac_frames(payload, plan)
    layout = plan.layout
    pre = preamble_samples(layout)
    n = layout.n_samples_frame
    samples = np.empty(plan.n_frame * n, dtype=complex)
    bits = np.empty((plan.n_frame, layout.n_data_bits), dtype=np.uint8)
    scales = np.empty(plan.n_frame)
    a, _ = layout.data_window
    for i, fr in enumerate(frames):
        bits[i] = info_bits_frame(fr, layout)
        data, scales[i] = modulate_bits(bits[i], layout, cfg)
        samples[i * n : i * n + a] = pre
        samples[i * n + a : (i + 1) * n] = data
    stream = SampleStream(samples, cfg.sample_rate_hz, [i * n for i in range(plan.n_frame)], layout, scales)
    return Transmission(plan, frames, stream, bits, cfg)


def bit_energy(stream: SampleStream, cfg: PhyConfig = PhyConfig()) -> float:
    """Energy per information bit, in sample units (power x samples)."""
    if len(stream) == 0:
        raise ValueError("empty stream")
    if stream.layout is None:
        p = float(np.mean(np.abs(stream.samples) ** 2))
    else:
        p = float(np.mean(np.abs(stream.samples[stream.data_mask()]) ** 2))
    return cfg.samples_per_symbol * p / cfg.l_dbps


def dump_stream(stream: SampleStream, path: str | Path) -> None:
    """Write samples as little-endian interleaved float64 I/Q pairs."""
    np.asarray(stream.samples, dtype="<c16").tofile(path)


def load_stream(path: str | Path, sample_rate_hz: float = 20e6) -> SampleStream:
    samples = np.fromfile(path, dtype="<c16")
    return SampleStream(samples.astype(complex), sample_rate_hz, [0])
