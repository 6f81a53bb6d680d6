"""Unions of closed arcs on the circle (-180, 180] degrees."""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

# arcs closer than this are merged, shorter arcs dropped
ADJACENCY_TOL = 1e-9


def wrap_angle(delta):
    """Wrap degrees into (-180, 180]. Works on scalars and arrays."""
    w = np.mod(np.asarray(delta, dtype=float) + 180.0, 360.0) - 180.0
    w = np.where(w == -180.0, 180.0, w)
    if w.ndim == 0:
        return float(w)
    return w


class AngleSet:
    """Canonical union of closed arcs ``[lo, hi]`` on (-180, 180].

    Arcs are sorted, pairwise disjoint and non-adjacent. An arc that crosses
    the +/-180 seam is stored as two pieces, so ``-180`` and ``180`` name the
    same point on the circle.
    """

    __slots__ = ("arcs",)

    def __init__(self, arcs: Iterable[Sequence[float]] = ()):
        self.arcs: tuple[tuple[float, float], ...] = _canonical(arcs)

    @classmethod
    def empty(cls) -> "AngleSet":
        return cls()

    @classmethod
    def full(cls) -> "AngleSet":
        return cls([(-180.0, 180.0)])

    @classmethod
    def arc(cls, lo: float, hi: float) -> "AngleSet":
        """Arc running counter-clockwise from ``lo`` to ``hi``; may wrap the seam.

        A span of 360 degrees or more gives the full circle.
        """
        if hi - lo >= 360.0:
            return cls.full()
        if hi < lo:
            return cls.empty()
        a, b = wrap_angle(lo), wrap_angle(hi)
        if a == 180.0:
            a = -180.0
        if b < a or (b == a and hi > lo):
            return cls([(a, 180.0), (-180.0, b)])
        return cls([(a, b)])

    @property
    def is_empty(self) -> bool:
        return not self.arcs

    @property
    def is_full(self) -> bool:
        return self.arcs == ((-180.0, 180.0),)

    def measure(self) -> float:
        return sum(hi - lo for lo, hi in self.arcs)

    def contains(self, delta):
        """Membership test; ``delta`` may be any real angle or an array of them."""
        w = np.asarray(wrap_angle(delta), dtype=float)
        out = np.zeros(w.shape, dtype=bool)
        for lo, hi in self.arcs:
            out |= (w >= lo) & (w <= hi)
            if lo == -180.0:
                out |= w == 180.0
        if out.ndim == 0:
            return bool(out)
        return out

    __contains__ = contains

    def complement(self) -> "AngleSet":
        if not self.arcs:
            return AngleSet.full()
        pieces = []
        cursor = -180.0
        for lo, hi in self.arcs:
            if lo > cursor:
                pieces.append((cursor, lo))
            cursor = hi
        if cursor < 180.0:
            pieces.append((cursor, 180.0))
        return AngleSet(pieces)

    def union(self, other: "AngleSet") -> "AngleSet":
        return AngleSet(self.arcs + other.arcs)

    def intersection(self, other: "AngleSet") -> "AngleSet":
        pieces = []
        for a_lo, a_hi in self.arcs:
            for b_lo, b_hi in other.arcs:
                lo, hi = max(a_lo, b_lo), min(a_hi, b_hi)
                if hi >= lo:
                    pieces.append((lo, hi))
        return AngleSet(pieces)

    def difference(self, other: "AngleSet") -> "AngleSet":
        return self.intersection(other.complement())

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def boundaries(self) -> list[float]:
        """Angles where membership actually changes, seam excluded when covered."""
        seam_is_edge = self.contains(179.999999) != self.contains(-179.999999)
        out = []
        for lo, hi in self.arcs:
            for e in (lo, hi):
                if abs(e) == 180.0:
                    if not seam_is_edge:
                        continue
                    e = 180.0
                if e not in out:
                    out.append(e)
        return out

    def as_array(self, size: int = 8) -> tuple[np.ndarray, int]:
        """Arcs packed as a ``(size, 2)`` float array plus the live count."""
        if len(self.arcs) > size:
            raise ValueError(f"{len(self.arcs)} arcs do not fit in {size} slots")
        buf = np.zeros((size, 2))
        for i, (lo, hi) in enumerate(self.arcs):
            buf[i] = lo, hi
        return buf, len(self.arcs)

    def spans(self) -> list[tuple[float, float]]:
        """Arcs with the seam pieces rejoined, so ``hi`` may exceed 180."""
        arcs = list(self.arcs)
        if len(arcs) > 1 and arcs[0][0] == -180.0 and arcs[-1][1] == 180.0:
            lo = arcs.pop()[0]
            hi = arcs.pop(0)[1] + 360.0
            arcs.append((lo, hi))
        return arcs

    def to_list(self, ndigits: int | None = None) -> list[list[float]]:
        if ndigits is None:
            return [[lo, hi] for lo, hi in self.arcs]
        return [[round(lo, ndigits), round(hi, ndigits)] for lo, hi in self.arcs]

    def __eq__(self, other):
        if not isinstance(other, AngleSet):
            return NotImplemented
        return self.arcs == other.arcs

    def __hash__(self):
        return hash(self.arcs)

    def __repr__(self):
        if not self.arcs:
            return "AngleSet(empty)"
        body = " U ".join(f"[{lo:.4f}, {hi:.4f}]" for lo, hi in self.arcs)
        return f"AngleSet({body})"

    def isclose(self, other: "AngleSet", tol: float = 1e-9) -> bool:
        if len(self.arcs) != len(other.arcs):
            return False
        return all(
            math.isclose(a, c, abs_tol=tol) and math.isclose(b, d, abs_tol=tol)
            for (a, b), (c, d) in zip(self.arcs, other.arcs)
        )


def _canonical(arcs: Iterable[Sequence[float]]) -> tuple[tuple[float, float], ...]:
    clean = []
    for lo, hi in arcs:
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("arc endpoints must not be NaN")
        if lo < -180.0 or hi > 180.0 or lo > hi:
            raise ValueError(f"arc [{lo}, {hi}] is not inside [-180, 180] in order")
        if hi - lo < ADJACENCY_TOL:
            continue
        clean.append((lo, hi))
    clean.sort()
    merged: list[list[float]] = []
    for lo, hi in clean:
        if merged and lo <= merged[-1][1] + ADJACENCY_TOL:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return tuple((lo, hi) for lo, hi in merged)
