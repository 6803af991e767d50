"""Geometry of the closed complex sector Delta(alpha) = {r e^{i theta} : r >= 0, |theta| <= alpha}.

Points are plain Python ``complex`` numbers (or numpy complex / paired real
arrays for the vectorised helpers).  The sector is closed: points whose
argument equals +-alpha are inside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# relative slack on the angular test; absorbs rounding in atan2 and tan
ANGLE_RTOL = 1e-12
_HALF_PI = math.pi / 2


def _clean_tan(alpha: float) -> float:
    t = math.tan(alpha)
    # tan(pi/4) evaluates to 0.9999999999999999; snap near-integers so that
    # segment endpoints land exactly on the grid
    r = round(t)
    if r != 0 and abs(t - r) <= 8 * np.finfo(float).eps * abs(r):
        return float(r)
    return t


@dataclass(frozen=True)
class Sector:
    """Closed sector of half-angle ``alpha`` (radians, 0 < alpha <= pi/2)."""

    alpha: float
    tan_alpha: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = float(self.alpha)
        if not (math.isfinite(a) and 0.0 < a <= _HALF_PI):
            raise ValueError(f"sector half-angle must lie in (0, pi/2], got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "tan_alpha", _clean_tan(a) if a < _HALF_PI else math.inf)

    # -- membership ---------------------------------------------------------

    def contains(self, p) -> bool:
        """True iff the point ``p`` (complex or (x, y)) lies in the closed sector."""
        x, y = _xy(p)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite point {p!r}")
        if x == 0.0 and y == 0.0:
            return True
        return math.atan2(abs(y), x) <= self.alpha * (1.0 + ANGLE_RTOL)

    def contains_xy(self, x, y) -> np.ndarray:
        """Vectorised membership for coordinate arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ang = np.arctan2(np.abs(y), x)
        return (ang <= self.alpha * (1.0 + ANGLE_RTOL)) | ((x == 0.0) & (y == 0.0))

    # -- measures -----------------------------------------------------------

    def truncated_area(self, t: float) -> float:
        """Area of Delta_t = {s in Delta : |s| <= t}, i.e. alpha * t^2."""
        t = float(t)
        if not t >= 0.0:
            raise ValueError(f"truncation radius must be >= 0, got {t!r}")
        return self.alpha * t * t

    def segment_length(self, n: float) -> float:
        """Length R_n = 2 n tan(alpha) of the vertical chord {Re s = n} of the sector."""
        return 2.0 * n * self.tan_alpha

    def segment_points(self, n: float, r: float) -> list[complex]:
        """Evenly spaced points on the chord Re s = n, from the top endpoint down.

        Returns the floor(R_n / r) + 1 points ``n + i(n tan(alpha) - j r)``.
        Requires R_n > r strictly.
        """
        return list(self.segment_points_array(n, r))

    def segment_points_array(self, n: float, r: float) -> np.ndarray:
        n = float(n)
        r = float(r)
        if not r > 0.0:
            raise ValueError(f"spacing must be positive, got {r!r}")
        if self.alpha >= _HALF_PI:
            raise ValueError("vertical chords of the half-plane are unbounded")
        top = n * self.tan_alpha
        length = 2.0 * top
        if not length > r * (1.0 + 1e-12):
            raise ValueError(
                f"chord at n={n} has length {length:g} <= spacing {r:g}; take n larger"
            )
        count = math.floor(length / r + 1e-9) + 1
        ys = top - r * np.arange(count, dtype=float)
        return n + 1j * ys


def _xy(p) -> tuple[float, float]:
    if isinstance(p, (complex, np.complexfloating)):
        return float(p.real), float(p.imag)
    if isinstance(p, (int, float, np.floating, np.integer)):
        return float(p), 0.0
    x, y = p
    return float(x), float(y)


def as_complex(p) -> complex:
    x, y = _xy(p)
    return complex(x, y)
