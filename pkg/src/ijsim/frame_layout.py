"""Frame and timing arithmetic for HT-mixed 20 MHz frames.

All sample indices are 0-based and all windows are half-open ``[start, stop)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Final

SERVICE_BITS: Final[int] = 16
TAIL_BITS: Final[int] = 6

FIELDS: Final[tuple[str, ...]] = (
    "L-STF",
    "L-LTF",
    "L-SIG",
    "HT-SIG",
    "HT-STF",
    "HT-LTF",
    "DATA",
)

# (field, start_us, stop_us); HT-LTF carries three repetitions, the last one
# at [32, 36) us is the one the data decoder relies on.
PREAMBLE_US: Final[tuple[tuple[str, int, int], ...]] = (
    ("L-STF", 0, 4),
    ("L-LTF", 4, 8),
    ("L-SIG", 8, 12),
    ("HT-SIG", 12, 20),
    ("HT-STF", 20, 24),
    ("HT-LTF", 24, 36),
)
PREAMBLE_DURATION_US: Final[int] = 36
CRITICAL_HTLTF_US: Final[tuple[int, int]] = (32, 36)


@dataclass(frozen=True)
class PhyConfig:
    sample_rate_hz: float = 20e6
    ofdm_symbol_us: float = 4.0
    l_dbps: int = 234
    coding_rate: Fraction = Fraction(3, 4)
    modulation_order_bits: int = 6
    l_msdu_bytes: int = 2304
    mac_overhead_bytes: int = 28
    t_idle_us: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "coding_rate", Fraction(self.coding_rate))
        if self.sample_rate_hz <= 0 or self.ofdm_symbol_us <= 0 or self.t_idle_us < 0:
            raise ValueError("durations and sample rate must be positive")
        spb = self.sample_rate_hz * self.ofdm_symbol_us * 1e-6
        if abs(spb - round(spb)) > 1e-9 or round(spb) < 1:
            raise ValueError(f"OFDM symbol is not an integer number of samples ({spb})")
        coded = Fraction(self.l_dbps) / self.coding_rate
        if coded.denominator != 1 or coded.numerator % self.modulation_order_bits:
            raise ValueError(
                "l_dbps / coding_rate must be an integer multiple of modulation_order_bits"
            )

    @property
    def samples_per_symbol(self) -> int:
        return round(self.sample_rate_hz * self.ofdm_symbol_us * 1e-6)

    @property
    def coded_bits_per_symbol(self) -> int:
        return int(Fraction(self.l_dbps) / self.coding_rate)

    @property
    def symbols_per_ofdm(self) -> int:
        """Constellation symbols carried by one OFDM data symbol (52 by default)."""
        return self.coded_bits_per_symbol // self.modulation_order_bits

    @property
    def max_length_bytes(self) -> int:
        return self.l_msdu_bytes + self.mac_overhead_bytes

    def us_to_samples(self, t_us: float) -> int:
        n = t_us * 1e-6 * self.sample_rate_hz
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"{t_us} us is not an integer number of samples")
        return round(n)


@dataclass(frozen=True)
class FrameLayout:
    length_bytes: int
    n_sym: int
    l_pad_bits: int
    t_frame_us: float
    n_samples_frame: int
    field_windows: tuple[tuple[str, int, int], ...]
    htltf_critical_window: tuple[int, int]
    samples_per_symbol: int = field(repr=False, default=80)

    @property
    def data_window(self) -> tuple[int, int]:
        return self.window("DATA")

    @property
    def n_data_bits(self) -> int:
        return SERVICE_BITS + 8 * self.length_bytes + TAIL_BITS + self.l_pad_bits

    def window(self, field_id: str) -> tuple[int, int]:
        for name, start, stop in self.field_windows:
            if name == field_id:
                return start, stop
        raise KeyError(field_id)


@dataclass(frozen=True)
class MessagePlan:
    l_message_bytes: int
    n_frame: int
    l_pad_message_bytes: int
    t_signal_us: float
    n_s_total: int
    layout: FrameLayout


def n_data_symbols(length_bytes: int, l_dbps: int) -> int:
    return math.ceil((SERVICE_BITS + 8 * length_bytes + TAIL_BITS) / l_dbps)


def layout_frame(psdu_len_bytes: int, cfg: PhyConfig = PhyConfig()) -> FrameLayout:
    if psdu_len_bytes < 1:
        raise ValueError("PSDU length must be at least one byte")
    if psdu_len_bytes > cfg.max_length_bytes:
        raise ValueError(
            f"LENGTH={psdu_len_bytes} exceeds MSDU+overhead bound {cfg.max_length_bytes}"
        )
    n_sym = n_data_symbols(psdu_len_bytes, cfg.l_dbps)
    l_pad = n_sym * cfg.l_dbps - (SERVICE_BITS + 8 * psdu_len_bytes + TAIL_BITS)
    t_frame = PREAMBLE_DURATION_US + n_sym * cfg.ofdm_symbol_us

    windows = [(name, cfg.us_to_samples(a), cfg.us_to_samples(b)) for name, a, b in PREAMBLE_US]
    data_start = cfg.us_to_samples(PREAMBLE_DURATION_US)
    n_samples = data_start + n_sym * cfg.samples_per_symbol
    windows.append(("DATA", data_start, n_samples))
    critical = tuple(cfg.us_to_samples(t) for t in CRITICAL_HTLTF_US)

    return FrameLayout(
        length_bytes=psdu_len_bytes,
        n_sym=n_sym,
        l_pad_bits=l_pad,
        t_frame_us=t_frame,
        n_samples_frame=n_samples,
        field_windows=tuple(windows),
        htltf_critical_window=critical,
        samples_per_symbol=cfg.samples_per_symbol,
    )


def plan_message(l_message_bytes: int, cfg: PhyConfig = PhyConfig()) -> MessagePlan:
    if l_message_bytes < 1:
        raise ValueError("message must be at least one byte")
    n_frame = -(-l_message_bytes // cfg.l_msdu_bytes)
    pad = n_frame * cfg.l_msdu_bytes - l_message_bytes
    layout = layout_frame(cfg.l_msdu_bytes + cfg.mac_overhead_bytes, cfg)
    return MessagePlan(
        l_message_bytes=l_message_bytes,
        n_frame=n_frame,
        l_pad_message_bytes=pad,
        t_signal_us=n_frame * (layout.t_frame_us + cfg.t_idle_us),
        n_s_total=n_frame * layout.n_samples_frame,
        layout=layout,
    )


def field_of_sample(layout: FrameLayout, k: int) -> str:
    if not 0 <= k < layout.n_samples_frame:
        raise IndexError(f"sample {k} outside frame of {layout.n_samples_frame} samples")
    for name, start, stop in layout.field_windows:
        if start <= k < stop:
            return name
    raise AssertionError("field windows do not cover the frame")  # unreachable by construction
