"""
Closed curves and link configurations
=====================================

Curves are closed polygons (the last sample connects back to the first).
Integrals over curves use the midpoint rule on segments, and every double
sum is accumulated with :func:`math.fsum`, so results do not depend on the
order of the samples: swapping the two curves, or reversing one of them,
gives bitwise-identical magnitudes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .spectral import Grid3

__all__ = [
    "ClosedCurve",
    "TubeSpec",
    "LinkConfig",
    "ValidationReport",
    "CurveFormatError",
    "make_circle",
    "make_parametric",
    "trefoil",
    "borromean_curves",
    "hopf_pair_config",
    "single_ring_config",
    "gauss_linking",
    "writhe",
    "rotation_minimizing_frame",
    "framed_pushoff",
    "validate_config",
    "linked_groups",
    "load_curve_csv",
    "save_curve_csv",
]

MIN_SAMPLES = 64


class CurveFormatError(ConfigurationError):
    """A curve CSV could not be parsed; ``line`` is 1-based."""

    def __init__(self, path, line: int, msg: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


@dataclass(frozen=True, eq=False)
class ClosedCurve:
    """Closed polygon with ``m`` ordered sample points, shape ``(m, 3)``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("curve points must have shape (m, 3)")
        if len(pts) < MIN_SAMPLES:
            raise ValueError(f"closed curve needs at least {MIN_SAMPLES} samples, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("curve points must be finite")
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        mean = seg.mean()
        if seg.min() < mean / 4 or seg.max() > 4 * mean:
            raise ValueError("curve samples are too unevenly spaced (factor 4 rule)")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return len(self.points)

    def segments(self) -> np.ndarray:
        return np.roll(self.points, -1, axis=0) - self.points

    def midpoints(self) -> np.ndarray:
        return self.points + 0.5 * self.segments()

    def length(self) -> float:
        return float(np.linalg.norm(self.segments(), axis=1).sum())

    def vertex_tangents(self) -> np.ndarray:
        t = np.roll(self.points, -1, axis=0) - np.roll(self.points, 1, axis=0)
        return t / np.linalg.norm(t, axis=1)[:, None]

    def arc_positions(self) -> np.ndarray:
        """Cumulative arc length at each vertex, starting at 0."""
        seg = np.linalg.norm(self.segments(), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)[:-1]])

    def curvature_radius(self) -> np.ndarray:
        """Discrete radius of curvature at each vertex (circumradius of neighbours)."""
        p0 = np.roll(self.points, 1, axis=0)
        p1 = self.points
        p2 = np.roll(self.points, -1, axis=0)
        a = np.linalg.norm(p1 - p0, axis=1)
        b = np.linalg.norm(p2 - p1, axis=1)
        c = np.linalg.norm(p2 - p0, axis=1)
        area2 = np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
        with np.errstate(divide="ignore"):
            return np.where(area2 > 0, a * b * c / (2 * np.maximum(area2, 1e-300)), np.inf)

    def reversed(self) -> "ClosedCurve":
        return ClosedCurve(self.points[::-1].copy())

    def translated(self, offset) -> "ClosedCurve":
        return ClosedCurve(self.points + np.asarray(offset, dtype=float))

    def reflected(self, point, normal) -> "ClosedCurve":
        """Mirror image through the plane with the given point and normal."""
        nrm = np.asarray(normal, dtype=float)
        nrm = nrm / np.linalg.norm(nrm)
        d = (self.points - np.asarray(point, dtype=float)) @ nrm
        return ClosedCurve(self.points - 2 * d[:, None] * nrm)


@dataclass(frozen=True)
class TubeSpec:
    """
    Flux tube around a closed curve.

    ``twist_correction`` is the uniform twist, in turns, applied along the
    tube on top of the rotation-minimizing frame. It defaults to
    ``-writhe(curve)`` so that field lines inside the tube do not link each
    other.
    """

    curve: ClosedCurve
    radius: float
    flux: float = 1.0
    twist_correction: float | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("tube radius must be positive")
        if self.twist_correction is None:
            object.__setattr__(self, "twist_correction", -writhe(self.curve))

    def with_flux(self, flux: float) -> "TubeSpec":
        return TubeSpec(self.curve, self.radius, flux, self.twist_correction)


@dataclass(frozen=True)
class LinkConfig:
    tubes: tuple[TubeSpec, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tubes", tuple(self.tubes))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.tubes) != len(self.labels):
            raise ValueError("one label per tube is required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("tube labels must be unique")

    def __len__(self):
        return len(self.tubes)

    def reflected(self, point, normal) -> "LinkConfig":
        tubes = [
            TubeSpec(t.curve.reflected(point, normal), t.radius, t.flux, -t.twist_correction)
            for t in self.tubes
        ]
        return LinkConfig(tuple(tubes), self.labels)

    def subset(self, labels) -> "LinkConfig":
        idx = [self.labels.index(lab) for lab in labels]
        return LinkConfig(tuple(self.tubes[i] for i in idx), tuple(labels))


@dataclass
class ValidationReport:
    ok: bool
    min_clearance: float
    min_curvature_ratio: float
    box_clearance: float
    failures: list[str] = field(default_factory=list)

    def raise_if_failed(self):
        if not self.ok:
            raise ConfigurationError("; ".join(self.failures))


def _frame_for(normal):
    nrm = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(nrm)
    if not np.isfinite(norm) or norm < 1e-12:
        raise ValueError("degenerate normal vector")
    nrm = nrm / norm
    helper = np.array([1.0, 0.0, 0.0]) if abs(nrm[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(nrm, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nrm, e1)
    return nrm, e1, e2


def make_circle(center, normal, radius: float, m: int = 512, phase: float = 0.0) -> ClosedCurve:
    """Uniformly sampled circle, oriented counter-clockwise about ``normal``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    if m < MIN_SAMPLES:
        raise ValueError(f"m must be at least {MIN_SAMPLES}")
    _, e1, e2 = _frame_for(normal)
    t = phase + 2 * np.pi * np.arange(m) / m
    pts = np.asarray(center, dtype=float) + radius * (
        np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2
    )
    return ClosedCurve(pts)


def make_parametric(f, m: int = 512) -> ClosedCurve:
    """Sample ``f(t) -> (x, y, z)`` at ``m`` equally spaced ``t`` in ``[0, 2 pi)``."""
    t = 2 * np.pi * np.arange(m) / m
    return ClosedCurve(np.stack([np.asarray(c, dtype=float) for c in f(t)], axis=1))


def trefoil(center=(0.0, 0.0, 0.0), scale: float = 1.0, m: int = 512) -> ClosedCurve:
    c = np.asarray(center, dtype=float)
    return make_parametric(
        lambda t: (
            c[0] + scale * (np.sin(t) + 2 * np.sin(2 * t)),
            c[1] + scale * (np.cos(t) - 2 * np.cos(2 * t)),
            c[2] - scale * np.sin(3 * t),
        ),
        m,
    )


def borromean_curves(center, scale: float = 1.0, m: int = 512) -> list[ClosedCurve]:
    """Three mutually orthogonal ellipses forming Borromean rings (pairwise unlinked)."""
    c = np.asarray(center, dtype=float)
    a, b = 1.0 * scale, 0.5 * scale
    t = 2 * np.pi * np.arange(m) / m
    ca, sb = a * np.cos(t), b * np.sin(t)
    zero = np.zeros_like(t)
    return [
        ClosedCurve(c + np.stack([ca, sb, zero], axis=1)),
        ClosedCurve(c + np.stack([zero, ca, sb], axis=1)),
        ClosedCurve(c + np.stack([sb, zero, ca], axis=1)),
    ]


def _min_distance(p: np.ndarray, q: np.ndarray, chunk: int = 1024) -> float:
    best = np.inf
    for i in range(0, len(p), chunk):
        d = p[i : i + chunk, None, :] - q[None, :, :]
        best = min(best, float(np.sqrt(np.min(np.einsum("ijk,ijk->ij", d, d)))))
    return best


def _gauss_terms(mid1, seg1, mid2, seg2):
    r = mid1[:, None, :] - mid2[None, :, :]
    dist3 = np.einsum("ijk,ijk->ij", r, r) ** 1.5
    cr = np.cross(seg1[:, None, :], seg2[None, :, :])
    return np.einsum("ijk,ijk->ij", r, cr) / dist3


def gauss_linking(c1: ClosedCurve, c2: ClosedCurve, scale: float | None = None) -> float:
    """
    Gauss linking integral of two disjoint closed polygons.

    Midpoint rule on both curves, ``(1/4pi) sum (r1 - r2) . (dr1 x dr2) / |r1 - r2|^3``.
    Raises ``ValueError`` if the curves come closer than ``1e-6 * scale``
    (``scale`` defaults to the joint bounding-box diagonal).
    """
    p1, p2 = c1.points, c2.points
    if scale is None:
        both = np.vstack([p1, p2])
        scale = float(np.linalg.norm(both.max(axis=0) - both.min(axis=0)))
    if _min_distance(p1, p2) < 1e-6 * scale:
        raise ValueError("curves touch; linking number undefined")
    mid1, seg1 = c1.midpoints(), c1.segments()
    mid2, seg2 = c2.midpoints(), c2.segments()
    parts = []
    for i in range(0, len(mid1), 512):
        parts.extend(_gauss_terms(mid1[i : i + 512], seg1[i : i + 512], mid2, seg2).ravel())
    return math.fsum(parts) / (4 * np.pi)


def writhe(c: ClosedCurve, skip: int = 2) -> float:
    """
    Writhe as the Gauss self-integral over segment pairs.

    Pairs whose indices are closer than ``skip`` along the curve (cyclically)
    are excluded; for polygons these pairs contribute nothing exactly.
    """
    mid, seg = c.midpoints(), c.segments()
    m = len(mid)
    idx = np.arange(m)
    parts = []
    for i in range(0, m, 512):
        rows = idx[i : i + 512]
        gap = np.abs(rows[:, None] - idx[None, :])
        gap = np.minimum(gap, m - gap)
        terms = np.zeros((len(rows), m))
        mask = gap >= skip
        r = mid[rows][:, None, :] - mid[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", r, r)
        d2[~mask] = 1.0
        cr = np.cross(seg[rows][:, None, :], seg[None, :, :])
        terms[mask] = (np.einsum("ijk,ijk->ij", r, cr) / d2**1.5)[mask]
        parts.extend(terms.ravel())
    return math.fsum(parts) / (4 * np.pi)


def rotation_minimizing_frame(c: ClosedCurve) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """
    Parallel-transport frame along the curve (double reflection method).

    Returns ``(T, U, V, holonomy)``: unit tangent, normal and binormal at each
    vertex, and the angle (radians, in ``(-pi, pi]``) by which the frame
    transported once around fails to close.
    """
    T = c.vertex_tangents()
    pts = c.points
    m = len(pts)
    _, u0, _ = _frame_for(T[0])
    U = np.empty_like(T)
    U[0] = u0
    for i in range(m):
        j = (i + 1) % m
        v1 = pts[j] - pts[i]
        c1 = v1 @ v1
        rL = U[i] - (2 / c1) * (v1 @ U[i]) * v1
        tL = T[i] - (2 / c1) * (v1 @ T[i]) * v1
        v2 = T[j] - tL
        c2 = v2 @ v2
        u_next = rL - (2 / c2) * (v2 @ rL) * v2 if c2 > 0 else rL
        if j == 0:
            u_end = u_next
        else:
            U[j] = u_next
    V = np.cross(T, U)
    holonomy = float(np.arctan2(u_end @ V[0], u_end @ U[0]))
    return T, U, V, holonomy


def framed_pushoff(c: ClosedCurve, distance: float, extra_turns: float = 0.0) -> ClosedCurve:
    """
    Push the curve off along its rotation-minimizing frame.

    The frame is rotated linearly in arc length so that it closes up, plus
    ``extra_turns`` full turns; the linking number of the push-off with the
    curve is then an integer equal to the framing.
    """
    T, U, V, hol = rotation_minimizing_frame(c)
    s = c.arc_positions() / c.length()
    ang = -hol * s + 2 * np.pi * extra_turns * s
    d = np.cos(ang)[:, None] * U + np.sin(ang)[:, None] * V
    return ClosedCurve(c.points + distance * d)


def _curve_box_clearance(c: ClosedCurve, L: float) -> float:
    p = c.points
    return float(min(p.min(), (L - p).min()))


def validate_config(cfg: LinkConfig, g: Grid3) -> ValidationReport:
    """Check the geometric invariants of a link configuration on grid ``g``."""
    h = g.h
    failures = []
    min_clear = np.inf
    min_ratio = np.inf
    box_clear = np.inf
    for lab, t in zip(cfg.labels, cfg.tubes):
        a = t.radius
        if a <= 2 * h:
            failures.append(f"grid too coarse: tube {lab} radius {a:.4g} <= 2h = {2 * h:.4g}")
        ratio = float(np.min(t.curve.curvature_radius())) / a
        min_ratio = min(min_ratio, ratio)
        if ratio <= 1:
            failures.append(f"tube {lab} radius exceeds its radius of curvature")
        bc = _curve_box_clearance(t.curve, g.L) - a
        box_clear = min(box_clear, bc)
        if bc < 2 * h:
            failures.append(f"box clearance: tube {lab} is {bc:.4g} from the box face (< 2h)")
    for i in range(len(cfg)):
        for j in range(i + 1, len(cfg)):
            ti, tj = cfg.tubes[i], cfg.tubes[j]
            gap = _min_distance(ti.curve.points, tj.curve.points) - ti.radius - tj.radius
            min_clear = min(min_clear, gap)
            if gap < 2 * h:
                failures.append(
                    f"tubes {cfg.labels[i]} and {cfg.labels[j]} overlap "
                    f"(clearance {gap:.4g} < 2h)"
                )
    return ValidationReport(
        ok=not failures,
        min_clearance=float(min_clear),
        min_curvature_ratio=float(min_ratio),
        box_clearance=float(box_clear),
        failures=failures,
    )


def linked_groups(cfg: LinkConfig, threshold: float = 0.5) -> list[tuple[str, ...]]:
    """Connected components of the 'links with' relation (``|lk| > threshold``)."""
    k = len(cfg)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            lk = gauss_linking(cfg.tubes[i].curve, cfg.tubes[j].curve)
            if abs(lk) > threshold:
                parent[find(i)] = find(j)
    groups: dict[int, list[str]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(cfg.labels[i])
    return [tuple(v) for v in groups.values()]


def hopf_pair_config(
    separation: float = np.pi,
    a: float = 0.25,
    flux: float = 1.0,
    L: float = 2 * np.pi,
    r: float = 1.0,
    m: int = 512,
    g: Grid3 | None = None,
) -> LinkConfig:
    """
    Two Hopf links with opposite linking numbers.

    Each link is a pair of radius-``r`` circles in orthogonal planes with
    centres ``r`` apart. The ``+`` link sits at ``y = L/2 - separation/2``;
    the ``-`` link is its mirror image through ``y = L/2``. Labels are
    ``T1+, T2+, T1-, T2-``. When ``g`` is given the configuration is
    validated on it and a :class:`ConfigurationError` names the offending
    pair.
    """
    mid = L / 2
    c1 = np.array([mid - r / 2, mid - separation / 2, mid])
    t1 = make_circle(c1, (0, 0, 1), r, m)
    # orientation chosen so that lk(T1+, T2+) = +1
    t2 = make_circle(c1 + np.array([r, 0.0, 0.0]), (0, 1, 0), r, m)
    plus = LinkConfig((TubeSpec(t1, a, flux), TubeSpec(t2, a, flux)), ("T1+", "T2+"))
    minus = plus.reflected((mid, mid, mid), (0, 1, 0))
    cfg = LinkConfig(plus.tubes + minus.tubes, ("T1+", "T2+", "T1-", "T2-"))
    if g is not None:
        validate_config(cfg, g).raise_if_failed()
    else:
        # geometric sanity without a grid: tubes must at least be disjoint
        for i in range(len(cfg)):
            for j in range(i + 1, len(cfg)):
                gap = _min_distance(cfg.tubes[i].curve.points, cfg.tubes[j].curve.points)
                if gap <= 2 * a:
                    raise ConfigurationError(
                        f"tubes {cfg.labels[i]} and {cfg.labels[j]} overlap (core distance {gap:.4g})"
                    )
    return cfg


def single_ring_config(radius: float = 1.0, a: float = 0.25, flux: float = 1.0,
                       L: float = 2 * np.pi, m: int = 512) -> LinkConfig:
    """One planar, untwisted ring at the box centre."""
    c = make_circle((L / 2, L / 2, L / 2), (0, 0, 1), radius, m)
    return LinkConfig((TubeSpec(c, a, flux),), ("R",))


def load_curve_csv(path) -> ClosedCurve:
    """Read ``x,y,z`` lines (blank lines and ``#`` comments skipped)."""
    path = Path(path)
    pts = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise CurveFormatError(path, lineno, f"expected 3 values, got {len(row)}")
            try:
                pts.append([float(v) for v in row])
            except ValueError:
                raise CurveFormatError(path, lineno, f"non-numeric value in {row!r}") from None
    try:
        return ClosedCurve(np.array(pts, dtype=float).reshape(-1, 3))
    except ValueError as exc:
        raise CurveFormatError(path, len(pts), str(exc)) from None


def save_curve_csv(c: ClosedCurve, path):
    np.savetxt(path, c.points, delimiter=",", fmt="%.17g")
