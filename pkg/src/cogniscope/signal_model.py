"""Licensed-user baseband signal synthesis and channel occupancy dynamics.

Ground-truth generator for every experiment in the toolkit: modulated
frames at configurable discrete power levels in circular complex AWGN,
plus independent two-state (vacant/occupied) Markov chains per channel.

Modeling boundaries: symbol-rate sampling (one symbol per sample), no
pulse shaping, no fading, flat channels. Noise variance is split equally
between I and Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

__all__ = [
    "ModulationType",
    "Constellation",
    "TransmitPattern",
    "SlotConfig",
    "IQFrame",
    "TwoStateMarkov",
    "Occupancy",
    "ChannelOccupancyTrace",
    "make_constellation",
    "synthesize_frame",
    "simulate_occupancy",
]


class ModulationType(Enum):
    """Candidate modulations plus the channel-idle tag."""

    NOISE_ONLY = "noise_only"
    BPSK = "bpsk"
    QPSK = "qpsk"
    PSK8 = "psk8"
    QAM16 = "qam16"

    @classmethod
    def from_tag(cls, tag: str) -> "ModulationType":
        try:
            return cls(tag.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown modulation tag {tag!r} (valid: {valid})") from None


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power symbol alphabet with deterministic point order."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", pts)
        m = pts.size
        if m < 2 or (m & (m - 1)) != 0:
            raise ValueError(f"constellation size must be a power of two >= 2, got {m}")
        avg = float(np.mean(np.abs(pts) ** 2))
        if abs(avg - 1.0) > 1e-12:
            raise ValueError(f"constellation average power {avg} != 1 (tolerance 1e-12)")

    @property
    def size(self) -> int:
        return int(self.points.size)


@dataclass(frozen=True)
class TransmitPattern:
    """Joint (modulation, transmit power) label; power 0 means idle."""

    modulation: ModulationType
    power: float

    def __post_init__(self):
        if self.power < 0:
            raise ValueError(f"power must be >= 0, got {self.power}")
        idle = self.power == 0.0
        noise = self.modulation is ModulationType.NOISE_ONLY
        if idle != noise:
            raise ValueError(
                f"power == 0 iff modulation is NOISE_ONLY (got {self.modulation}, power={self.power})"
            )

    @property
    def is_idle(self) -> bool:
        return self.modulation is ModulationType.NOISE_ONLY


IDLE_PATTERN = TransmitPattern(ModulationType.NOISE_ONLY, 0.0)


@dataclass(frozen=True)
class SlotConfig:
    """Geometry of a multi-slot sensing frame."""

    slots_per_frame: int
    samples_per_slot: int

    def __post_init__(self):
        if self.slots_per_frame < 1:
            raise ValueError(f"slots_per_frame must be >= 1, got {self.slots_per_frame}")
        if self.samples_per_slot < 1:
            raise ValueError(f"samples_per_slot must be >= 1, got {self.samples_per_slot}")

    @property
    def frame_length(self) -> int:
        return self.slots_per_frame * self.samples_per_slot


@dataclass(frozen=True)
class IQFrame:
    """Slot-structured block of complex baseband samples at a known SNR.

    `truth` is the generator's ground-truth label, carried for evaluation
    only; inference code must not read it.
    """

    samples: np.ndarray
    slot_config: SlotConfig
    truth: TransmitPattern
    noise_variance: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", s)
        if s.size != self.slot_config.frame_length:
            raise ValueError(
                f"samples length {s.size} != frame length {self.slot_config.frame_length}"
            )
        if self.noise_variance <= 0:
            raise ValueError(f"noise_variance must be > 0, got {self.noise_variance}")


@dataclass(frozen=True)
class TwoStateMarkov:
    """First-order two-state chain over {VACANT, OCCUPIED} time slots.

    Geometric dwell times in both states; `p_occupy_given_vacant` is the
    V->O transition probability and `p_vacate_given_occupied` the O->V one.
    """

    p_occupy_given_vacant: float
    p_vacate_given_occupied: float

    def __post_init__(self):
        for name in ("p_occupy_given_vacant", "p_vacate_given_occupied"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")

    @property
    def is_degenerate(self) -> bool:
        """Both transition probabilities zero: no stationary distribution."""
        return self.p_occupy_given_vacant == 0.0 and self.p_vacate_given_occupied == 0.0

    @property
    def stationary_vacancy(self) -> float:
        if self.is_degenerate:
            raise ValueError("degenerate chain (both transition probabilities 0) has no stationary distribution")
        return self.p_vacate_given_occupied / (self.p_vacate_given_occupied + self.p_occupy_given_vacant)


class Occupancy(IntEnum):
    VACANT = 0
    OCCUPIED = 1


@dataclass(frozen=True)
class ChannelOccupancyTrace:
    """Binary occupancy history of one licensed channel."""

    states: np.ndarray
    channel_id: int
    started_degenerate: bool = False

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int8)
        object.__setattr__(self, "states", s)
        if s.size == 0:
            raise ValueError("trace must be non-empty")
        if not np.all((s == Occupancy.VACANT) | (s == Occupancy.OCCUPIED)):
            raise ValueError("trace states restricted to VACANT/OCCUPIED")


_SQRT2 = math.sqrt(2.0)
_SQRT10 = math.sqrt(10.0)


def make_constellation(tag: ModulationType) -> Constellation:
    """Return the unit-power constellation for `tag`.

    Point orderings are fixed so repeated calls are bit-identical.
    """
    if tag is ModulationType.NOISE_ONLY:
        raise ValueError("NOISE_ONLY carries no constellation")
    if tag is ModulationType.BPSK:
        pts = np.array([1.0 + 0.0j, -1.0 + 0.0j])
    elif tag is ModulationType.QPSK:
        pts = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / _SQRT2
    elif tag is ModulationType.PSK8:
        pts = np.exp(2j * np.pi * np.arange(8) / 8.0)
    elif tag is ModulationType.QAM16:
        grid = np.array([-3.0, -1.0, 1.0, 3.0])
        pts = (grid[:, None] + 1j * grid[None, :]).ravel() / _SQRT10
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unhandled modulation {tag}")
    return Constellation(points=pts)


def synthesize_frame(
    pattern: TransmitPattern,
    noise_variance: float,
    slot_config: SlotConfig,
    rng: np.random.Generator,
) -> IQFrame:
    """Synthesize one frame: sqrt(power) * iid constellation symbols + AWGN.

    Noise is circular complex Gaussian with total variance `noise_variance`
    (half in I, half in Q). Idle patterns produce noise only. Deterministic
    given the generator state.
    """
    if noise_variance <= 0:
        raise ValueError(f"noise_variance must be > 0, got {noise_variance}")
    n = slot_config.frame_length
    scale = math.sqrt(noise_variance / 2.0)
    noise = rng.standard_normal(n) * scale + 1j * rng.standard_normal(n) * scale
    if pattern.is_idle:
        samples = noise
    else:
        const = make_constellation(pattern.modulation)
        symbols = const.points[rng.integers(0, const.size, size=n)]
        samples = math.sqrt(pattern.power) * symbols + noise
    return IQFrame(samples=samples, slot_config=slot_config, truth=pattern, noise_variance=noise_variance)


def simulate_occupancy(
    models: list[TwoStateMarkov],
    horizon: int,
    rng: np.random.Generator,
    initial_states: list[Occupancy] | None = None,
) -> list[ChannelOccupancyTrace]:
    """Simulate one trace per chain, channels independent.

    Each chain starts from its stationary distribution unless
    `initial_states` pins the start. Degenerate chains (both transition
    probabilities 0) start VACANT by convention and are flagged.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if initial_states is not None and len(initial_states) != len(models):
        raise ValueError("initial_states length must match models")
    traces = []
    for ch, model in enumerate(models):
        degenerate = model.is_degenerate
        if initial_states is not None:
            state = int(initial_states[ch])
        elif degenerate:
            state = int(Occupancy.VACANT)
        else:
            state = int(Occupancy.OCCUPIED) if rng.random() >= model.stationary_vacancy else int(Occupancy.VACANT)
        states = np.empty(horizon, dtype=np.int8)
        states[0] = state
        u = rng.random(horizon - 1) if horizon > 1 else np.empty(0)
        p_vo = model.p_occupy_given_vacant
        p_ov = model.p_vacate_given_occupied
        for t in range(1, horizon):
            if state == Occupancy.VACANT:
                state = int(Occupancy.OCCUPIED) if u[t - 1] < p_vo else int(Occupancy.VACANT)
            else:
                state = int(Occupancy.VACANT) if u[t - 1] < p_ov else int(Occupancy.OCCUPIED)
            states[t] = state
        traces.append(
            ChannelOccupancyTrace(states=states, channel_id=ch, started_degenerate=degenerate)
        )
    return traces
