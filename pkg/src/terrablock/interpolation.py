"""Scattered yield points onto grid cells: Delaunay plus barycentric weights.

The triangulation is built by incremental Bowyer-Watson insertion.  Instead
of a super-triangle the structure carries one "ghost" triangle per hull edge
(third vertex at infinity), which makes outside-hull insertion a uniform
cavity operation and avoids the super-triangle's false hull flips.

Orientation and in-circle tests evaluate a floating-point determinant with a
forward error bound; results inside the bound are recomputed in exact
rational arithmetic.  Harvester tracks are nearly collinear, so the exact
fallback is load-bearing, not decoration.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .raster import Grid

GHOST = -1

_ORIENT_BOUND = 3.3306690738754716e-16  # ~= (3 + 16eps) * eps
_INCIRCLE_BOUND = 1.1102230246251565e-14  # comfortably above (10 + 96eps) * eps


class YieldFormatError(ValueError):
    """Raised for malformed yield CSV content.  ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class YieldPointSet:
    """Scattered (x, y, yield) observations for one season."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    season: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if not (x.shape == y.shape == v.shape) or x.ndim != 1:
            raise ValueError("x, y, values must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("coordinates must be finite")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("yield values must be finite and nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.x.size)


def parse_yield_csv(text: str, default_season: str = "") -> list[YieldPointSet]:
    """Parse "x,y,yield[,season]" CSV into one point set per season.

    Seasons are returned in order of first appearance; without a season
    column the single set takes ``default_season``.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise YieldFormatError(1, 'expected header "x,y,yield"') from None
    cols = [c.strip().lower() for c in header]
    if cols not in (["x", "y", "yield"], ["x", "y", "yield", "season"]):
        raise YieldFormatError(1, 'expected header "x,y,yield" with optional trailing "season"')
    has_season = len(cols) == 4

    by_season: dict[str, list[list[float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(cols):
            raise YieldFormatError(lineno, f"expected {len(cols)} fields, found {len(row)}")
        try:
            x, y, val = (float(row[i]) for i in range(3))
        except ValueError:
            raise YieldFormatError(lineno, f"non-numeric field in {row!r}") from None
        if not all(math.isfinite(t) for t in (x, y, val)):
            raise YieldFormatError(lineno, "non-finite coordinate or yield")
        if val < 0:
            raise YieldFormatError(lineno, f"negative yield {val}")
        season = row[3].strip() if has_season else default_season
        by_season.setdefault(season, []).append([x, y, val])

    out = []
    for season, rows in by_season.items():
        arr = np.asarray(rows, dtype=np.float64)
        out.append(YieldPointSet(x=arr[:, 0], y=arr[:, 1], values=arr[:, 2], season=season))
    if not out:
        raise YieldFormatError(2, "no data rows")
    return out


# ---------------------------------------------------------------------------
# Robust predicates


def orient2d(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> int:
    """Sign of the cross product (b-a) x (c-a): 1 if c is left of a->b."""
    t1 = (bx - ax) * (cy - ay)
    t2 = (by - ay) * (cx - ax)
    det = t1 - t2
    bound = _ORIENT_BOUND * (abs(t1) + abs(t2))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _orient2d_exact(ax, ay, bx, by, cx, cy)


def _orient2d_exact(ax, ay, bx, by, cx, cy) -> int:
    det = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) - (
        Fraction(by) - Fraction(ay)
    ) * (Fraction(cx) - Fraction(ax))
    return (det > 0) - (det < 0)


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """Sign test: 1 if d lies strictly inside the circumcircle of ccw (a,b,c)."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy

    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady

    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy

    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy

    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = (
        alift * (abs(bdxcdy) + abs(cdxbdy))
        + blift * (abs(cdxady) + abs(adxcdy))
        + clift * (abs(adxbdy) + abs(bdxady))
    )
    bound = _INCIRCLE_BOUND * permanent
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def _incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    fax, fay = Fraction(ax) - Fraction(dx), Fraction(ay) - Fraction(dy)
    fbx, fby = Fraction(bx) - Fraction(dx), Fraction(by) - Fraction(dy)
    fcx, fcy = Fraction(cx) - Fraction(dx), Fraction(cy) - Fraction(dy)
    det = (
        (fax * fax + fay * fay) * (fbx * fcy - fcx * fby)
        + (fbx * fbx + fby * fby) * (fcx * fay - fax * fcy)
        + (fcx * fcx + fcy * fcy) * (fax * fby - fbx * fay)
    )
    return (det > 0) - (det < 0)


# ---------------------------------------------------------------------------
# Triangulation


def _dedupe(points: YieldPointSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merge exact coordinate duplicates, averaging their yields; first-seen order."""
    seen: dict[tuple[float, float], int] = {}
    sums: list[float] = []
    counts: list[int] = []
    xs: list[float] = []
    ys: list[float] = []
    for x, y, v in zip(points.x, points.y, points.values):
        key = (float(x), float(y))
        idx = seen.get(key)
        if idx is None:
            seen[key] = len(xs)
            xs.append(float(x))
            ys.append(float(y))
            sums.append(float(v))
            counts.append(1)
        else:
            sums[idx] += float(v)
            counts[idx] += 1
    values = np.asarray(sums) / np.asarray(counts, dtype=np.float64)
    return np.asarray(xs), np.asarray(ys), values


class Triangulation:
    """Delaunay triangulation supporting point location and interpolation.

    Immutable once built; concurrent queries are safe.  ``triangles`` lists
    counterclockwise vertex-index triples covering the convex hull.
    """

    def __init__(self, points: YieldPointSet):
        self.x, self.y, self.values = _dedupe(points)
        self.season = points.season
        n = self.x.size
        if n < 3:
            raise ValueError(f"triangulation needs at least 3 unique points, got {n}")
        self._tris: dict[int, tuple[int, int, int]] = {}
        self._edge_owner: dict[tuple[int, int], int] = {}
        self._next_id = 0
        self._build()
        self.triangles = self._canonical_triangles()

    # -- construction ------------------------------------------------------

    def _orient(self, i: int, j: int, k: int, px: float | None = None, py: float | None = None) -> int:
        if px is None:
            px, py = self.x[k], self.y[k]
        return orient2d(self.x[i], self.y[i], self.x[j], self.y[j], px, py)

    def _add_tri(self, a: int, b: int, c: int) -> int:
        # keep any ghost vertex in the last slot; rotation preserves cyclic order
        if a == GHOST:
            a, b, c = b, c, a
        elif b == GHOST:
            a, b, c = c, a, b
        tid = self._next_id
        self._next_id += 1
        self._tris[tid] = (a, b, c)
        for u, v in ((a, b), (b, c), (c, a)):
            self._edge_owner[(u, v)] = tid
        return tid

    def _remove_tri(self, tid: int):
        a, b, c = self._tris.pop(tid)
        for u, v in ((a, b), (b, c), (c, a)):
            del self._edge_owner[(u, v)]

    def _build(self):
        n = self.x.size
        k = None
        for i in range(2, n):
            if self._orient(0, 1, i) != 0:
                k = i
                break
        if k is None:
            raise ValueError("all points are collinear; no triangulation exists")

        if self._orient(0, 1, k) > 0:
            first = self._add_tri(0, 1, k)
        else:
            first = self._add_tri(1, 0, k)
        a, b, c = self._tris[first]
        self._add_tri(b, a, GHOST)
        self._add_tri(c, b, GHOST)
        self._add_tri(a, c, GHOST)
        self._hint = first

        for i in range(2, n):
            if i != k:
                self._insert(i)

    def _in_circumdisk(self, tid: int, px: float, py: float) -> bool:
        a, b, c = self._tris[tid]
        if c == GHOST:
            # hull edge (a, b), outside half-plane on its left; a point on the
            # open segment itself also belongs to the (degenerate) disk
            side = orient2d(self.x[a], self.y[a], self.x[b], self.y[b], px, py)
            if side > 0:
                return True
            if side < 0:
                return False
            return self._on_open_segment(a, b, px, py)
        return (
            incircle(
                self.x[a], self.y[a], self.x[b], self.y[b], self.x[c], self.y[c], px, py
            )
            > 0
        )

    def _on_open_segment(self, a: int, b: int, px: float, py: float) -> bool:
        ax, ay, bx, by = self.x[a], self.y[a], self.x[b], self.y[b]
        if ax != bx:
            lo, hi = (ax, bx) if ax < bx else (bx, ax)
            return lo < px < hi
        lo, hi = (ay, by) if ay < by else (by, ay)
        return lo < py < hi

    def _find_bad_seed(self, px: float, py: float) -> int:
        tid = self._hint
        for step in range(4 * len(self._tris) + 16):
            tri = self._tris.get(tid)
            if tri is None or tri[2] == GHOST:
                break
            a, b, c = tri
            edges = ((a, b), (b, c), (c, a))
            moved = False
            for off in range(3):
                u, v = edges[(step + off) % 3]
                if orient2d(self.x[u], self.y[u], self.x[v], self.y[v], px, py) < 0:
                    tid = self._edge_owner[(v, u)]
                    moved = True
                    break
            if not moved:
                return tid  # p inside or on this triangle, hence in its disk
            if self._tris[tid][2] == GHOST:
                if self._in_circumdisk(tid, px, py):
                    return tid
                break  # collinear beyond the hull; scan instead
        for tid in self._tris:  # fallback: exhaustive, correctness over speed
            if self._in_circumdisk(tid, px, py):
                return tid
        raise RuntimeError(f"no triangle's circumdisk contains ({px}, {py}); duplicate point?")

    def _insert(self, p: int):
        px, py = self.x[p], self.y[p]
        seed = self._find_bad_seed(px, py)

        bad = {seed}
        stack = [seed]
        while stack:
            a, b, c = self._tris[stack.pop()]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = self._edge_owner[(v, u)]
                if nb not in bad and self._in_circumdisk(nb, px, py):
                    bad.add(nb)
                    stack.append(nb)

        boundary = []
        for tid in bad:
            a, b, c = self._tris[tid]
            for u, v in ((a, b), (b, c), (c, a)):
                if self._edge_owner[(v, u)] not in bad:
                    boundary.append((u, v))
        for tid in bad:
            self._remove_tri(tid)
        for u, v in boundary:
            tid = self._add_tri(u, v, p)
            if self._tris[tid][2] != GHOST:
                self._hint = tid

    def _canonical_triangles(self) -> list[tuple[int, int, int]]:
        out = []
        for a, b, c in self._tris.values():
            if c == GHOST:
                continue
            m = min(a, b, c)
            if m == b:
                a, b, c = b, c, a
            elif m == c:
                a, b, c = c, a, b
            out.append((a, b, c))
        out.sort()
        return out

    # -- queries -----------------------------------------------------------

    def locate(self, qx: float, qy: float, hint: int | None = None) -> tuple[int, int, int] | None:
        """Vertex triple of a triangle containing (qx, qy), or None outside the hull."""
        tid = hint if hint is not None and hint in self._tris else self._hint
        if self._tris[tid][2] == GHOST:
            tid = self._hint
        for step in range(4 * len(self._tris) + 16):
            a, b, c = self._tris[tid]
            if c == GHOST:
                return None  # walked across a hull edge: outside
            edges = ((a, b), (b, c), (c, a))
            moved = False
            for off in range(3):
                u, v = edges[(step + off) % 3]
                if orient2d(self.x[u], self.y[u], self.x[v], self.y[v], qx, qy) < 0:
                    tid = self._edge_owner[(v, u)]
                    moved = True
                    break
            if not moved:
                self._last_tid = tid
                return (a, b, c)
        for tid, (a, b, c) in self._tris.items():  # fallback scan
            if c == GHOST:
                continue
            if all(
                orient2d(self.x[u], self.y[u], self.x[v], self.y[v], qx, qy) >= 0
                for u, v in ((a, b), (b, c), (c, a))
            ):
                self._last_tid = tid
                return (a, b, c)
        return None

    def interpolate_at(self, qx: float, qy: float) -> float | None:
        """Barycentric interpolation at (qx, qy); None outside the convex hull."""
        tri = self.locate(qx, qy, hint=getattr(self, "_last_tid", None))
        if tri is None:
            return None
        i, j, k = tri
        l1, l2, l3 = barycentric_weights(
            self.x[i], self.y[i], self.x[j], self.y[j], self.x[k], self.y[k], qx, qy
        )
        value = l1 * self.values[i] + l2 * self.values[j] + l3 * self.values[k]
        # clamp away simplex-boundary rounding so the convex-combination
        # guarantee holds exactly
        lo = min(self.values[i], self.values[j], self.values[k])
        hi = max(self.values[i], self.values[j], self.values[k])
        return float(min(max(value, lo), hi))


def delaunay(points: YieldPointSet) -> Triangulation:
    return Triangulation(points)


def barycentric_weights(x1, y1, x2, y2, x3, y3, qx, qy) -> tuple[float, float, float]:
    """Barycentric coordinates of (qx, qy) in the triangle (v1, v2, v3).

    lambda1 = ((y2-y3)(qx-x3) + (x3-x2)(qy-y3)) / D
    lambda2 = ((y3-y1)(qx-x3) + (x1-x3)(qy-y3)) / D
    lambda3 = 1 - lambda1 - lambda2,  D = (y2-y3)(x1-x3) + (x3-x2)(y1-y3)
    """
    denom = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    if denom == 0.0:
        raise ValueError("degenerate triangle: zero barycentric denominator")
    l1 = ((y2 - y3) * (qx - x3) + (x3 - x2) * (qy - y3)) / denom
    l2 = ((y3 - y1) * (qx - x3) + (x1 - x3) * (qy - y3)) / denom
    return (l1, l2, 1.0 - l1 - l2)


def interpolate_grid(points: YieldPointSet, target: Grid) -> Grid:
    """Interpolated yield at every cell center of ``target``'s geometry."""
    tri = delaunay(points)
    xs = target.x_centers()
    ys = target.y_centers()
    values = np.full((target.nrows, target.ncols), np.nan)
    for r in range(target.nrows):
        for c in range(target.ncols):
            v = tri.interpolate_at(xs[c], ys[r])
            if v is not None:
                values[r, c] = v
    return target.with_values(values)
