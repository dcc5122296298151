from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Join:
    time: float
    user: int
    operator: int
    position: tuple[float, float] | None = None


@dataclass(frozen=True)
class Leave:
    time: float
    user: int


@dataclass(frozen=True)
class Move:
    time: float
    user: int
    position: tuple[float, float] | None = None


class EventStream(tuple):
    """Time-ordered tuple of Join / Leave / Move events."""

    def __new__(cls, events=()):
        events = tuple(events)
        for prev, nxt in zip(events, events[1:]):
            if nxt.time < prev.time:
                raise ValueError("events are not time-ordered")
        return super().__new__(cls, events)

    def validate(self) -> None:
        present = set()
        for ev in self:
            if isinstance(ev, Join):
                if ev.user in present:
                    raise ValueError(f"user {ev.user} joins twice")
                present.add(ev.user)
            elif ev.user not in present:
                raise ValueError(f"{type(ev).__name__} for absent user {ev.user}")
            elif isinstance(ev, Leave):
                present.remove(ev.user)

    def population(self) -> list[tuple[float, int]]:
        """(time, population) after every Join/Leave."""
        n = 0
        out = []
        for ev in self:
            if isinstance(ev, Join):
                n += 1
            elif isinstance(ev, Leave):
                n -= 1
            else:
                continue
            out.append((ev.time, n))
        return out
