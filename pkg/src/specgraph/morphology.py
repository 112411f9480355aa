"""Binary image operations: thresholding, dilation, topology-safe thinning.

Foreground is 8-connected and background 4-connected throughout.  Thinning
is the classic two-subiteration scheme with a staircase cleanup pass; the
cleanup removes 2-neighbor corner pixels whose neighbors are an orthogonal
pair (the pair stays diagonally adjacent, so components, holes and endpoints
are all preserved).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import EnergyWindow, ScalarField


@dataclass(frozen=True)
class BinaryImage:
    """Boolean pixel grid over an energy window."""

    window: EnergyWindow
    bits: np.ndarray

    def __post_init__(self):
        r = self.window.resolution
        if self.bits.shape != (r, r):
            raise ValueError("bit grid shape must match the window resolution")
        if self.bits.dtype != np.bool_:
            object.__setattr__(self, "bits", self.bits.astype(bool))
        self.bits.setflags(write=False)

    def as_field(self) -> ScalarField:
        return ScalarField(window=self.window, values=self.bits.astype(np.float64), kind="binary")

    @classmethod
    def from_field(cls, field: ScalarField) -> "BinaryImage":
        return cls(window=field.window, bits=field.values > 0.5)

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


def binarize_mean(field: ScalarField) -> BinaryImage:
    """Threshold strictly above the mean over the field's support set.

    A constant field therefore binarizes to the empty image.
    """
    if field.values.size == 0:
        raise ValueError("cannot binarize an empty field")
    if field.support is not None and field.support.any():
        mean = float(field.values[field.support].mean())
        bits = (field.values > mean) & field.support
    else:
        mean = float(field.values.mean())
        bits = field.values > mean
    return BinaryImage(window=field.window, bits=bits)


def dilate_disk2(img: BinaryImage) -> BinaryImage:
    """Dilation by the 2x2 structuring element anchored at its top-left."""
    b = img.bits
    out = b.copy()
    out[1:, :] |= b[:-1, :]
    out[:, 1:] |= b[:, :-1]
    out[1:, 1:] |= b[:-1, :-1]
    return BinaryImage(window=img.window, bits=out)


def _neighbors(b: np.ndarray) -> tuple[np.ndarray, ...]:
    """P2..P9 of every pixel: N, NE, E, SE, S, SW, W, NW (padded grid)."""
    p = np.pad(b, 1, mode="constant")
    n = p[:-2, 1:-1]
    ne = p[:-2, 2:]
    e = p[1:-1, 2:]
    se = p[2:, 2:]
    s = p[2:, 1:-1]
    sw = p[2:, :-2]
    w = p[1:-1, :-2]
    nw = p[:-2, :-2]
    return n, ne, e, se, s, sw, w, nw


def _thin_pass(b: np.ndarray, first: bool) -> np.ndarray:
    n, ne, e, se, s, sw, w, nw = _neighbors(b)
    ring = (n, ne, e, se, s, sw, w, nw)
    count = sum(x.astype(np.int8) for x in ring)
    trans = sum(
        ((~a) & bb).astype(np.int8)
        for a, bb in zip(ring, ring[1:] + ring[:1])
    )
    if first:
        cond = (~n | ~e | ~s) & (~e | ~s | ~w)
    else:
        cond = (~n | ~e | ~w) & (~n | ~s | ~w)
    remove = b & (count >= 2) & (count <= 6) & (trans == 1) & cond
    if not remove.any():
        return b
    return b & ~remove


def _staircase_pass(b: np.ndarray) -> np.ndarray:
    """Remove corner pixels whose only neighbors are an orthogonal pair.

    Candidates of one orientation are never mutually adjacent, so each
    orientation can be removed in one parallel step; orientations repeat
    until stable.
    """
    changed = True
    while changed:
        changed = False
        for orient in range(4):
            n, ne, e, se, s, sw, w, nw = _neighbors(b)
            count = sum(x.astype(np.int8) for x in (n, ne, e, se, s, sw, w, nw))
            two = b & (count == 2)
            pair = ((n & w), (n & e), (s & w), (s & e))[orient]
            remove = two & pair
            if remove.any():
                b = b & ~remove
                changed = True
    return b


def skeletonize(img: BinaryImage) -> BinaryImage:
    """Iterative thinning to a one-pixel-wide, topology-preserving skeleton."""
    b = img.bits.copy()
    while True:
        b1 = _thin_pass(b, first=True)
        b2 = _thin_pass(b1, first=False)
        if np.array_equal(b2, b):
            break
        b = b2
    b = _staircase_pass(b)
    return BinaryImage(window=img.window, bits=b)
