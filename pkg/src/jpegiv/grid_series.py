"""Grid-indexed series container and decomposition bookkeeping.

A series is a pair (t_i, u_i), i = 1..n, with strictly increasing locations
t_i.  All algorithm descriptions in this package use 1-based positions, so
"odd elements" means positions 1, 3, 5, ... of the sequence.

The multiresolution schedule tracks segment sizes under repeated halving with
ceiling rounding: a series of length n supports at most J = ceil(log2 n)
decomposition levels, and the segment carried into depth k has
ceil(n / 2^(k-1)) points.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NonFiniteValue, NonMonotonicGrid, TooShort


@dataclass(frozen=True)
class GridSeries:
    """Values sampled at strictly increasing locations."""

    locations: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        locations = np.atleast_1d(np.asarray(self.locations, dtype=np.float64))
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "values", values)
        _check(self)

    def __len__(self) -> int:
        return self.locations.shape[0]


def _check(series: GridSeries) -> None:
    if series.locations.ndim != 1 or series.values.ndim != 1:
        raise LengthMismatch("locations and values must be one-dimensional")
    if series.locations.shape[0] != series.values.shape[0]:
        raise LengthMismatch(
            f"{series.locations.shape[0]} locations vs {series.values.shape[0]} values"
        )
    if series.locations.shape[0] < 1:
        raise TooShort("a series needs at least one point")
    if not np.all(np.isfinite(series.locations)) or not np.all(np.isfinite(series.values)):
        raise NonFiniteValue("locations and values must be finite")
    if np.any(np.diff(series.locations) <= 0.0):
        raise NonMonotonicGrid("locations must be strictly increasing")


def validate(series: GridSeries) -> GridSeries:
    """Re-check the invariants and return the series unchanged.

    Useful after in-place mutation of the underlying arrays, which the frozen
    dataclass cannot prevent.
    """
    _check(series)
    return series


def interleave_split(series: GridSeries) -> tuple[GridSeries, GridSeries]:
    """Split into odd-position and even-position subseries (1-based).

    ``values [a, b, c, d] -> odd [a, c], even [b, d]``.
    """
    if len(series) < 2:
        raise TooShort("interleave_split needs at least two points")
    odd = GridSeries(series.locations[0::2], series.values[0::2])
    even = GridSeries(series.locations[1::2], series.values[1::2])
    return odd, even


def interleave_merge(odd: GridSeries, even: GridSeries) -> GridSeries:
    """Inverse of :func:`interleave_split`."""
    n = len(odd) + len(even)
    if not len(odd) - 1 <= len(even) <= len(odd):
        raise LengthMismatch("parts do not interleave to a single series")
    locations = np.empty(n)
    values = np.empty(n)
    locations[0::2] = odd.locations
    locations[1::2] = even.locations
    values[0::2] = odd.values
    values[1::2] = even.values
    return GridSeries(locations, values)


@dataclass(frozen=True)
class LevelSchedule:
    """Segment sizes m(j) = ceil(n / 2^(J-j)) for j = 1..J, J = ceil(log2 n)."""

    n: int
    max_level: int
    level_sizes: tuple[int, ...]

    @classmethod
    def for_length(cls, n: int) -> "LevelSchedule":
        if n < 2:
            raise TooShort("a decomposition needs at least two points")
        max_level = max(1, math.ceil(math.log2(n)))
        sizes = []
        for j in range(1, max_level + 1):
            sizes.append(math.ceil(n / 2 ** (max_level - j)))
        return cls(n=n, max_level=max_level, level_sizes=tuple(sizes))

    def segment_size(self, depth: int) -> int:
        """Length of the segment transformed at a given depth (depth 1 = full n)."""
        if not 1 <= depth <= self.max_level:
            raise IndexError(f"depth {depth} outside 1..{self.max_level}")
        return self.level_sizes[self.max_level - depth]

    def head_size(self, depth: int) -> int:
        """Length of the approximation block remaining after ``depth`` passes."""
        if depth == self.max_level:
            # One past the coarsest tabulated size: ceil(m(1) / 2).
            return math.ceil(self.level_sizes[0] / 2)
        return self.level_sizes[self.max_level - depth - 1]


def read_series_csv(path: str, sort: bool = False) -> GridSeries:
    """Read a two-column ``t,u`` CSV; the header row is optional.

    With ``sort=True`` rows are stably sorted by location first.
    """
    locations: list[float] = []
    values: list[float] = []
    with open(path, newline="") as handle:
        for row in csv.reader(handle):
            if not row or not row[0].strip():
                continue
            try:
                t = float(row[0])
                u = float(row[1])
            except (ValueError, IndexError):
                if not locations:
                    continue  # header row
                raise
            locations.append(t)
            values.append(u)
    loc = np.asarray(locations)
    val = np.asarray(values)
    if sort:
        order = np.argsort(loc, kind="stable")
        loc, val = loc[order], val[order]
    return GridSeries(loc, val)


def write_series_csv(path: str, series: GridSeries) -> None:
    """Write a series as a ``t,u`` CSV with a header row."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "u"])
        for t, u in zip(series.locations, series.values):
            writer.writerow([repr(float(t)), repr(float(u))])
