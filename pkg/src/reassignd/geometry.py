"""Regions used for robot reachability checks.

All coordinates are millimetres. Containment is closed: a point exactly on
the boundary counts as inside, so a location at the very edge of a robot's
reach is still reachable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .errors import InvariantError

Point = tuple[float, float, float]

_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, inclusive of its faces."""

    min_corner: Point
    max_corner: Point

    def __post_init__(self) -> None:
        for axis, lo, hi in zip(_AXES, self.min_corner, self.max_corner):
            if lo > hi:
                raise InvariantError(f"box {axis} range inverted: {lo} > {hi}")

    def contains(self, point: Sequence[float]) -> bool:
        return all(
            lo <= coord <= hi
            for coord, lo, hi in zip(point, self.min_corner, self.max_corner)
        )


@dataclass(frozen=True)
class Disc:
    """Disc in the XY plane extruded over a z range (a vertical cylinder)."""

    center: tuple[float, float]
    radius: float
    z_range: tuple[float, float]

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise InvariantError(f"disc radius must be positive, got {self.radius}")
        lo, hi = self.z_range
        if lo > hi:
            raise InvariantError(f"disc z range inverted: {lo} > {hi}")

    def contains(self, point: Sequence[float]) -> bool:
        x, y, z = point
        dx = x - self.center[0]
        dy = y - self.center[1]
        lo, hi = self.z_range
        return dx * dx + dy * dy <= self.radius * self.radius and lo <= z <= hi


Region = Union[Box, Disc]


def point_in_region(point: Sequence[float], region: Region) -> bool:
    """True iff the point lies inside the closed region."""
    return region.contains(point)
