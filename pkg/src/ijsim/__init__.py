"""Link-level simulator and closed-form model for intermittent friendly jamming."""

__version__ = "0.1.0"

from .frame_layout import FrameLayout, MessagePlan, PhyConfig, field_of_sample, layout_frame, plan_message
from .phy import SampleStream, Transmission, bit_energy, build_mac_frames, modulate_frame, transmit
from .jamming import (
    SCHEMES,
    JamBudget,
    JamSchedule,
    account,
    build_schedule,
    make_cjs,
    make_perj,
    make_perjpt,
    make_ranj,
    make_repj,
)
from .channel import ChannelSpec, receive
from .receiver import RxConfig, demodulate, estimate_htltf, measure_ser, receive_frames, sync_detect
from .analytic import AnalyticParams, optimize_schedule, seree, ser_closed_form

__all__ = [
    "AnalyticParams",
    "ChannelSpec",
    "FrameLayout",
    "JamBudget",
    "JamSchedule",
    "MessagePlan",
    "PhyConfig",
    "RxConfig",
    "SCHEMES",
    "SampleStream",
    "Transmission",
    "account",
    "bit_energy",
    "build_mac_frames",
    "build_schedule",
    "demodulate",
    "estimate_htltf",
    "field_of_sample",
    "layout_frame",
    "make_cjs",
    "make_perj",
    "make_perjpt",
    "make_ranj",
    "make_repj",
    "measure_ser",
    "modulate_frame",
    "optimize_schedule",
    "plan_message",
    "receive",
    "receive_frames",
    "ser_closed_form",
    "seree",
    "sync_detect",
    "transmit",
]
