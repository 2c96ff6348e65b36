"""Domain types and the slotted-time model shared by both frame simulators.

Time is counted in global slot indices (integers from simulation start);
wall-clock quantities are always derived from slot counts so that runs are
bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

__all__ = [
    "PacketClass",
    "FrameConfig",
    "FrameLayout",
    "frame_layout",
    "Packet",
    "SlotKind",
    "SlotOutcome",
    "resolve_slot",
    "GlobalClock",
]

# Guard against IEEE representation error in alpha * S (e.g. 0.29 * 100 ==
# 28.999999999999996); small enough never to bump a genuinely fractional value.
_FLOOR_EPS = 1e-9


def stable_floor(x: float) -> int:
    return int(math.floor(x + _FLOOR_EPS))


class PacketClass(Enum):
    PULL = "pull"
    PUSH = "push"


@dataclass(frozen=True, slots=True)
class FrameConfig:
    """Frame geometry: slot grid, per-class packet sizes and the pull fraction.

    ``alpha`` is the fraction of the frame's usable slots reserved for
    pull-based traffic.  ``overhead_slots`` models per-frame control signaling
    (beacon/query); those slots are taken off the top of the frame before the
    alpha split and carry no data.
    """

    slots_per_frame: int
    frame_duration: float  # seconds
    pull_packet_slots: int
    push_packet_slots: int
    alpha: float
    overhead_slots: int = 0

    def __post_init__(self) -> None:
        if self.slots_per_frame < 1:
            raise ValueError(f"slots_per_frame must be >= 1, got {self.slots_per_frame}")
        if not (self.frame_duration > 0.0) or not math.isfinite(self.frame_duration):
            raise ValueError(f"frame_duration must be positive, got {self.frame_duration}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha out of [0,1]: {self.alpha}")
        if self.pull_packet_slots < 1 or self.pull_packet_slots > self.slots_per_frame:
            raise ValueError(
                f"pull_packet_slots must be in [1, {self.slots_per_frame}], got {self.pull_packet_slots}"
            )
        if self.push_packet_slots < 1 or self.push_packet_slots > self.slots_per_frame:
            raise ValueError(
                f"push_packet_slots must be in [1, {self.slots_per_frame}], got {self.push_packet_slots}"
            )
        if not 0 <= self.overhead_slots < self.slots_per_frame:
            raise ValueError(
                f"overhead_slots must be in [0, {self.slots_per_frame}), got {self.overhead_slots}"
            )

    @property
    def slot_duration(self) -> float:
        return self.frame_duration / self.slots_per_frame

    @property
    def usable_slots(self) -> int:
        return self.slots_per_frame - self.overhead_slots

    @property
    def data_start_slot(self) -> int:
        """Offset of the first data slot within a frame (past the overhead)."""
        return self.overhead_slots

    @property
    def pull_slot_budget(self) -> int:
        return stable_floor(self.alpha * self.usable_slots)

    @property
    def push_slot_budget(self) -> int:
        return self.usable_slots - self.pull_slot_budget

    @property
    def pull_tx_capacity(self) -> int:
        """Whole pull packets fitting in the pull sub-frame."""
        return self.pull_slot_budget // self.pull_packet_slots

    @property
    def push_tx_capacity(self) -> int:
        """Whole push packets fitting in the push sub-frame (contention opportunities)."""
        return self.push_slot_budget // self.push_packet_slots


@dataclass(frozen=True, slots=True)
class FrameLayout:
    pull_tx_capacity: int
    pull_slot_budget: int
    push_slot_budget: int


def frame_layout(config: FrameConfig) -> FrameLayout:
    """Split a frame's usable slots into the pull and push sub-frames."""
    return FrameLayout(
        pull_tx_capacity=config.pull_tx_capacity,
        pull_slot_budget=config.pull_slot_budget,
        push_slot_budget=config.push_slot_budget,
    )


@dataclass(slots=True)
class Packet:
    """One uplink data unit.

    ``delivery_slot`` is the global index of the last slot of the packet's
    successful transmission; latency runs from the arrival slot to the end of
    that slot.
    """

    id: int
    klass: PacketClass
    arrival_slot: int
    delivery_slot: Optional[int] = None
    attempts: int = 0

    @property
    def delivered(self) -> bool:
        return self.delivery_slot is not None

    @property
    def latency_slots(self) -> Optional[int]:
        if self.delivery_slot is None:
            return None
        return self.delivery_slot + 1 - self.arrival_slot

    def latency_seconds(self, slot_duration: float) -> float:
        lat = self.latency_slots
        return math.inf if lat is None else lat * slot_duration


class SlotKind(Enum):
    IDLE = "idle"
    SUCCESS = "success"
    COLLISION = "collision"


@dataclass(frozen=True, slots=True)
class SlotOutcome:
    """Channel result of one slot: idle, a single winner, or a collision."""

    kind: SlotKind
    winner: Optional[int] = None  # packet/device id, success only
    count: int = 0  # simultaneous transmitters

    def __post_init__(self) -> None:
        if self.kind is SlotKind.SUCCESS and (self.winner is None or self.count != 1):
            raise ValueError("success outcome requires a winner and count == 1")
        if self.kind is SlotKind.COLLISION and self.count < 2:
            raise ValueError(f"collision count must be >= 2, got {self.count}")
        if self.kind is SlotKind.IDLE and (self.winner is not None or self.count != 0):
            raise ValueError("idle outcome carries no transmitters")

    @classmethod
    def idle(cls) -> "SlotOutcome":
        return cls(SlotKind.IDLE)

    @classmethod
    def success(cls, winner: int) -> "SlotOutcome":
        return cls(SlotKind.SUCCESS, winner=winner, count=1)

    @classmethod
    def collision(cls, count: int) -> "SlotOutcome":
        return cls(SlotKind.COLLISION, count=count)


def resolve_slot(transmitter_ids: Iterable[int]) -> SlotOutcome:
    """Collision channel without capture: one transmitter wins, two or more all fail."""
    ids = set(transmitter_ids)
    if not ids:
        return SlotOutcome.idle()
    if len(ids) == 1:
        return SlotOutcome.success(next(iter(ids)))
    return SlotOutcome.collision(len(ids))


@dataclass(slots=True)
class GlobalClock:
    """Monotone slot counter with frame bookkeeping."""

    slots_per_frame: int
    current_slot: int = 0

    def __post_init__(self) -> None:
        if self.slots_per_frame < 1:
            raise ValueError("slots_per_frame must be >= 1")
        if self.current_slot < 0:
            raise ValueError("current_slot must be >= 0")

    @property
    def current_frame(self) -> int:
        return self.current_slot // self.slots_per_frame

    @property
    def at_frame_boundary(self) -> bool:
        return self.current_slot % self.slots_per_frame == 0

    def tick(self) -> int:
        self.current_slot += 1
        return self.current_slot
