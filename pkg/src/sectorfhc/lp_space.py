"""Step functions on a square grid over the sector, as elements of L^p_rho.

A :class:`GridFunction` is a finite map from cell indices (i, j) to real
coefficients; cell (i, j) is ``[ih, (i+1)h) x [jh, (j+1)h)`` and belongs to
the sector when its centre does.  Translations by grid vectors are exact
index shifts, so identities such as ``T_t S_t f = f`` hold bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .sector_geometry import Sector
from .weights import WeightFn

_KEY_OFFSET = 1 << 30
_KEY_SHIFT = 31


class AlignmentError(ValueError):
    """A translation vector is not a multiple of the cell side."""


def parse_dyadic(h) -> Fraction:
    f = Fraction(h) if not isinstance(h, str) else Fraction(h.strip())
    if f <= 0 or (f.denominator & (f.denominator - 1)):
        raise ValueError(f"cell side must be a positive dyadic rational, got {h!r}")
    return f


def _keys(i, j):
    return ((np.asarray(i, np.int64) + _KEY_OFFSET) << _KEY_SHIFT) + (np.asarray(j, np.int64) + _KEY_OFFSET)


class GridFunction:
    """Compactly supported step function restricted to the sector.

    Zero coefficients are dropped and cells are kept in lexicographic
    (i, j) order; instances are treated as immutable.
    """

    __slots__ = ("sector", "h", "I", "J", "C", "_hf")

    def __init__(self, sector: Sector, h, I, J, C, *, _trusted=False):
        self.sector = sector
        self.h = parse_dyadic(h)
        self._hf = float(self.h)
        I = np.asarray(I, dtype=np.int64).ravel()
        J = np.asarray(J, dtype=np.int64).ravel()
        C = np.asarray(C, dtype=float).ravel()
        if not _trusted:
            if not (len(I) == len(J) == len(C)):
                raise ValueError("index and coefficient arrays differ in length")
            if not np.all(np.isfinite(C)):
                raise ValueError("coefficients must be finite")
            keys = _keys(I, J)
            order = np.argsort(keys, kind="stable")
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate cells")
            I, J, C = I[order], J[order], C[order]
            keep = C != 0.0
            cx, cy = self._centers(I, J)
            if not np.all(sector.contains_xy(cx[keep], cy[keep])):
                raise ValueError("a cell centre lies outside the sector")
            I, J, C = I[keep], J[keep], C[keep]
        self.I, self.J, self.C = I, J, C

    # -- basics ---------------------------------------------------------------

    @classmethod
    def zero(cls, sector: Sector, h) -> "GridFunction":
        e = np.zeros(0, dtype=np.int64)
        return cls(sector, h, e, e, np.zeros(0), _trusted=True)

    @classmethod
    def from_cells(cls, sector: Sector, h, cells) -> "GridFunction":
        """Build from a mapping {(i, j): c} or an iterable of (i, j, c)."""
        items = cells.items() if isinstance(cells, dict) else ((k[:2], k[2]) for k in cells)
        I, J, C = [], [], []
        for (i, j), c in items:
            I.append(i)
            J.append(j)
            C.append(c)
        return cls(sector, h, I, J, C)

    def _centers(self, I, J):
        return (I + 0.5) * self._hf, (J + 0.5) * self._hf

    def centers(self):
        return self._centers(self.I, self.J)

    def __len__(self):
        return len(self.C)

    def cells(self) -> dict:
        return {(int(i), int(j)): float(c) for i, j, c in zip(self.I, self.J, self.C)}

    def same_cells(self, other: "GridFunction") -> bool:
        return (self.h == other.h and np.array_equal(self.I, other.I)
                and np.array_equal(self.J, other.J) and np.array_equal(self.C, other.C))

    @property
    def support_radius(self) -> float:
        """s_f: largest centre modulus over nonzero cells, plus one cell side."""
        if len(self.C) == 0:
            return 0.0
        cx, cy = self.centers()
        return float(np.max(np.hypot(cx, cy))) + self._hf

    @property
    def sup_norm(self) -> float:
        """M_f"""
        return float(np.max(np.abs(self.C))) if len(self.C) else 0.0

    def __mul__(self, s: float) -> "GridFunction":
        return lincomb([s], [self])

    __rmul__ = __mul__

    def __add__(self, other):
        return lincomb([1.0, 1.0], [self, other])

    def __sub__(self, other):
        return lincomb([1.0, -1.0], [self, other])

    # -- serialisation ----------------------------------------------------------

    def to_json(self) -> dict:
        h = self.h
        return {"alpha": self.sector.alpha, "h": f"{h.numerator}/{h.denominator}",
                "cells": [[int(i), int(j), float(c)] for i, j, c in zip(self.I, self.J, self.C)]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def from_json(cls, doc) -> "GridFunction":
        if isinstance(doc, str):
            doc = json.loads(doc)
        cells = doc["cells"]
        I = [c[0] for c in cells]
        J = [c[1] for c in cells]
        C = [c[2] for c in cells]
        return cls(Sector(doc["alpha"]), doc["h"], I, J, C)


def indicator(sector: Sector, h, radius: float, scale: float = 1.0) -> GridFunction:
    """scale * 1_{Delta_radius}, on cells whose centre lies in Delta_radius."""
    hf = float(parse_dyadic(h))
    n = int(math.ceil(radius / hf)) + 1
    ii, jj = np.meshgrid(np.arange(0, n), np.arange(-n, n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    cx, cy = (ii + 0.5) * hf, (jj + 0.5) * hf
    keep = sector.contains_xy(cx, cy) & (np.hypot(cx, cy) <= radius)
    return GridFunction(sector, h, ii[keep], jj[keep], np.full(int(keep.sum()), float(scale)))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LpContext:
    p: float
    weight: WeightFn

    def __post_init__(self):
        if not (1.0 <= self.p < math.inf):
            raise ValueError("p must lie in [1, inf)")

    @property
    def sector(self) -> Sector:
        return self.weight.sector


def _check_sector(f: GridFunction, sector: Sector):
    if f.sector.alpha != sector.alpha:
        raise ValueError(f"grid function lives on alpha={f.sector.alpha}, context on alpha={sector.alpha}")


def norm(f: GridFunction, ctx: LpContext) -> float:
    """(sum |c|^p rho(centre) h^2)^(1/p), midpoint rule, index-sorted summation."""
    _check_sector(f, ctx.sector)
    if len(f) == 0:
        return 0.0
    cx, cy = f.centers()
    hh = f._hf * f._hf
    s = float(np.sum(np.abs(f.C) ** ctx.p * ctx.weight.at_xy(cx, cy) * hh))
    return s ** (1.0 / ctx.p)


def grid_offset(f_or_h, t) -> tuple[int, int]:
    """Integer cell offset (a, b) of the grid vector t = (a h, b h)."""
    h = f_or_h.h if isinstance(f_or_h, GridFunction) else parse_dyadic(f_or_h)
    t = complex(t)
    out = []
    for comp in (t.real, t.imag):
        q = Fraction(comp) / h
        if q.denominator != 1:
            raise AlignmentError(f"{t!r} is not a multiple of the cell side {h}")
        out.append(int(q))
    return out[0], out[1]


def snap(t: complex, h) -> complex:
    """Nearest grid vector to t."""
    hf = float(parse_dyadic(h))
    t = complex(t)
    return complex(round(t.real / hf) * hf, round(t.imag / hf) * hf)


def _shift(f: GridFunction, a: int, b: int, keep_fn) -> GridFunction:
    I, J = f.I + a, f.J + b
    cx, cy = (I + 0.5) * f._hf, (J + 0.5) * f._hf
    keep = keep_fn(cx, cy)
    # a uniform shift preserves lexicographic order
    return GridFunction(f.sector, f.h, I[keep], J[keep], f.C[keep], _trusted=True)


def translate(f: GridFunction, t) -> GridFunction:
    """(T_t f)(x) = f(x + t) on the sector; cells whose centres leave the sector are dropped."""
    a, b = grid_offset(f, t)
    if not f.sector.contains(complex(t)):
        raise ValueError(f"translation {t!r} is not in the sector")
    return _shift(f, -a, -b, f.sector.contains_xy)


def backshift(f: GridFunction, t) -> GridFunction:
    """(S_t f)(tau) = f(tau - t) for tau in t + Delta, 0 otherwise."""
    a, b = grid_offset(f, t)
    t = complex(t)
    if not f.sector.contains(t):
        raise ValueError(f"translation {t!r} is not in the sector")
    sec = f.sector
    return _shift(f, a, b, lambda x, y: sec.contains_xy(x - t.real, y - t.imag) & sec.contains_xy(x, y))


def lincomb(coeffs, fs) -> GridFunction:
    """Pointwise sum of ``coeffs[k] * fs[k]``, zero cells pruned.

    Cells are accumulated in input order, so equal inputs give bit-equal output.
    """
    fs = list(fs)
    coeffs = [float(c) for c in coeffs]
    if len(coeffs) != len(fs):
        raise ValueError("coefficient and function lists differ in length")
    if not fs:
        raise ValueError("empty linear combination")
    sec, h = fs[0].sector, fs[0].h
    for g in fs[1:]:
        if g.h != h or g.sector.alpha != sec.alpha:
            raise ValueError("grid functions live on different grids")
    keys = np.concatenate([_keys(g.I, g.J) for g in fs])
    vals = np.concatenate([c * g.C for c, g in zip(coeffs, fs)])
    if len(keys) == 0:
        return GridFunction.zero(sec, h)
    uniq, inv = np.unique(keys, return_inverse=True)
    acc = np.zeros(len(uniq))
    np.add.at(acc, inv, vals)
    keep = acc != 0.0
    uniq = uniq[keep]
    I = (uniq >> _KEY_SHIFT) - _KEY_OFFSET
    J = (uniq & ((1 << _KEY_SHIFT) - 1)) - _KEY_OFFSET
    return GridFunction(sec, h, I, J, acc[keep], _trusted=True)


def growth_bound_check(f: GridFunction, t, ctx: LpContext, slack: float = 0.01) -> bool:
    """||T_t f|| <= (M e^{omega |t|})^{1/p} ||f||, allowing 1% quadrature slack."""
    lhs = norm(translate(f, t), ctx)
    w = ctx.weight
    rhs = (w.M * math.exp(w.omega * abs(complex(t)))) ** (1.0 / ctx.p) * norm(f, ctx)
    return lhs <= rhs * (1.0 + slack)


def translate_distance(x: GridFunction, offset: tuple[int, int], y: GridFunction,
                       ctx: LpContext) -> float:
    """||T_t x - y|| for the grid vector t with cell offset ``offset``, without building T_t x.

    Matches ``norm(lincomb([1, -1], [translate(x, t), y]), ctx)`` up to summation order;
    exactly zero when the two agree cell for cell.
    """
    a, b = offset
    hf = x._hf
    I, J = x.I - a, x.J - b
    cx, cy = (I + 0.5) * hf, (J + 0.5) * hf
    inside = x.sector.contains_xy(cx, cy)
    I, J, xv = I[inside], J[inside], x.C[inside]
    cx, cy = cx[inside], cy[inside]

    ykeys = _keys(y.I, y.J)
    xkeys = _keys(I, J)
    if len(ykeys):
        pos_c = np.minimum(np.searchsorted(ykeys, xkeys), len(ykeys) - 1)
        matched = ykeys[pos_c] == xkeys
    else:
        pos_c = np.zeros(len(xkeys), dtype=np.int64)
        matched = np.zeros(len(xkeys), dtype=bool)
    diff = xv.copy()
    diff[matched] -= y.C[pos_c[matched]]
    y_hit = np.zeros(len(ykeys), dtype=bool)
    y_hit[pos_c[matched]] = True

    p = ctx.p
    hh = hf * hf
    total = 0.0
    if len(diff):
        total += float(np.sum(np.abs(diff) ** p * ctx.weight.at_xy(cx, cy)))
    rest = ~y_hit
    if np.any(rest):
        ycx, ycy = y.centers()
        total += float(np.sum(np.abs(y.C[rest]) ** p * ctx.weight.at_xy(ycx[rest], ycy[rest])))
    return (total * hh) ** (1.0 / p)
