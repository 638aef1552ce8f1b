"""
Divergence-free fields modeled on links
=======================================

Each tube carries ``B = flux * phi(r) * (T + w r e_theta)`` where ``r`` is the
distance to the core, ``T`` the core tangent at the nearest point, ``e_theta``
the azimuthal direction around the core and ``w = 2 pi twist / length`` a
uniform twist rate. With ``twist = -writhe`` the field lines in one tube do
not link each other and the tube has zero self-helicity.

The raw field is sampled as cell averages (``supersample**3`` midpoint
sub-samples per cell) and then Leray projected on the grid, which makes it
exactly solenoidal in the spectral sense.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import exp1

from .errors import ConfigurationError, GridMismatchError, GridTooCoarseError
from .links import LinkConfig, TubeSpec, linked_groups, rotation_minimizing_frame, validate_config
from .spectral import Grid3, VectorField, divergence_residual, fft3, ifft3

log = logging.getLogger(__name__)

__all__ = [
    "ComponentFields",
    "bump_profile",
    "bump_normalization",
    "raw_tube_field",
    "build_tube_field",
    "build_link_field",
    "flux_through_disk",
    "support_overlap",
    "LEAKAGE_LIMIT",
]

LEAKAGE_LIMIT = 0.05
OVERLAP_LIMIT = 1e-2

# int_0^1 exp(-1/(1-u^2)) u du = (exp(-1) - E1(1)) / 2
_UNIT_MASS = 0.5 * (np.exp(-1.0) - exp1(1.0))


def bump_normalization(a: float) -> float:
    """Constant ``C`` with ``2 pi int_0^a C exp(-1/(1-(r/a)^2)) r dr = 1``."""
    return 1.0 / (2 * np.pi * a * a * _UNIT_MASS)


def bump_profile(r, a: float):
    """Unit-mass smooth bump on the disk of radius ``a``; zero for ``r >= a``."""
    if not a > 0:
        raise ValueError("bump radius must be positive")
    r = np.asarray(r, dtype=float)
    u2 = (r / a) ** 2
    inside = u2 < 1
    out = np.zeros_like(r)
    out[inside] = bump_normalization(a) * np.exp(-1.0 / (1.0 - u2[inside]))
    return out if out.ndim else float(out)


@dataclass
class ComponentFields:
    """Per-tube decomposition ``B = sum_k B_k`` carried through a run."""

    components: list[VectorField]
    labels: tuple[str, ...]
    groups: list[tuple[str, ...]] = field(default_factory=list)
    leakage: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if len(self.components) != len(self.labels):
            raise ValueError("one label per component is required")
        grids = {c.grid for c in self.components}
        if len(grids) > 1:
            raise GridMismatchError("components live on different grids")
        if not self.groups:
            self.groups = [(lab,) for lab in self.labels]

    @property
    def grid(self) -> Grid3:
        return self.components[0].grid

    def __len__(self):
        return len(self.components)

    def __getitem__(self, label: str) -> VectorField:
        return self.components[self.labels.index(label)]

    def total(self) -> VectorField:
        data = np.sum([c.data for c in self.components], axis=0)
        return VectorField(self.grid, data)

    def group_field(self, group) -> VectorField:
        data = np.sum([self[lab].data for lab in group], axis=0)
        return VectorField(self.grid, data)


def _nearest_on_polyline(q, pts, seg, tree):
    """Foot point data of each query point on the closed polygon."""
    m = len(pts)
    _, j = tree.query(q)
    best_d = np.full(len(q), np.inf)
    best_j = np.zeros(len(q), dtype=int)
    best_t = np.zeros(len(q))
    for shift in (-1, 0):
        jj = (j + shift) % m
        p0 = pts[jj]
        sv = seg[jj]
        tpar = np.clip(np.einsum("ij,ij->i", q - p0, sv) / np.einsum("ij,ij->i", sv, sv), 0.0, 1.0)
        dist = np.linalg.norm(q - (p0 + tpar[:, None] * sv), axis=1)
        better = dist < best_d
        best_d = np.where(better, dist, best_d)
        best_j = np.where(better, jj, best_j)
        best_t = np.where(better, tpar, best_t)
    return best_d, best_j, best_t


def raw_tube_field(t: TubeSpec, g: Grid3, supersample: int = 3) -> VectorField:
    """Cell-averaged tube field before projection (compactly supported)."""
    curve = t.curve
    pts = curve.points
    seg = curve.segments()
    m = len(pts)
    a = t.radius
    h = g.h
    tree = cKDTree(pts)
    ds = float(np.linalg.norm(seg, axis=1).max())

    # cells whose box can reach the tube
    reach = a + ds + np.sqrt(3) * h / 2
    lo = np.floor((pts.min(axis=0) - reach) / h).astype(int)
    hi = np.ceil((pts.max(axis=0) + reach) / h).astype(int)
    if np.any(lo < 0) or np.any(hi >= g.n):
        raise ConfigurationError("tube leaves the box")
    axes = [np.arange(lo[d], hi[d] + 1) for d in range(3)]
    I, J, K = np.meshgrid(*axes, indexing="ij")
    cells = np.stack([I.ravel(), J.ravel(), K.ravel()], axis=1)
    centers = cells * h
    dcen, _ = tree.query(centers, distance_upper_bound=reach)
    cells = cells[np.isfinite(dcen)]
    centers = cells * h

    tang = curve.vertex_tangents()
    twist_rate = 2 * np.pi * t.twist_correction / curve.length()
    offs = ((np.arange(supersample) + 0.5) / supersample - 0.5) * h
    acc = np.zeros((len(cells), 3))
    for ox in offs:
        for oy in offs:
            for oz in offs:
                q = centers + np.array([ox, oy, oz])
                dist, jj, tpar = _nearest_on_polyline(q, pts, seg, tree)
                inside = dist < a
                if not np.any(inside):
                    continue
                qi, di, ji, ti = q[inside], dist[inside], jj[inside], tpar[inside]
                T = (1 - ti)[:, None] * tang[ji] + ti[:, None] * tang[(ji + 1) % m]
                T /= np.linalg.norm(T, axis=1)[:, None]
                foot = pts[ji] + ti[:, None] * seg[ji]
                radial = qi - foot
                # azimuthal direction times r: T x (x - foot)
                azim_r = np.cross(T, radial)
                prof = t.flux * bump_profile(di, a)
                acc[inside] += prof[:, None] * (T + twist_rate * azim_r)
    acc /= supersample**3
    data = np.zeros((3,) + g.shape)
    for c in range(3):
        data[c][cells[:, 0], cells[:, 1], cells[:, 2]] = acc[:, c]
    return VectorField(g, data)


def _project_mean_zero(raw: VectorField) -> VectorField:
    ops = raw.grid.ops
    hat = ops.project_hat(fft3(raw.data))
    hat[:, 0, 0, 0] = 0.0
    return VectorField(raw.grid, ifft3(hat, raw.grid.n))


def build_tube_field(t: TubeSpec, g: Grid3, supersample: int = 3,
                     leakage_limit: float = LEAKAGE_LIMIT, return_leakage: bool = False):
    """
    Solenoidal, mean-zero field of one flux tube on grid ``g``.

    The projection leakage ``||B - B_raw|| / ||B_raw||`` must stay below
    ``leakage_limit``; otherwise the grid is too coarse for the tube and
    :class:`GridTooCoarseError` is raised.
    """
    if t.radius <= 2 * g.h:
        raise GridTooCoarseError(
            f"grid too coarse: tube radius {t.radius:.4g} is thinner than 2 cells (h={g.h:.4g})"
        )
    raw = raw_tube_field(t, g, supersample)
    B = _project_mean_zero(raw)
    rn = raw.norm()
    leak = (B - raw).norm() / rn if rn > 0 else 0.0
    log.debug("tube leakage %.3e", leak)
    if leak > leakage_limit:
        raise GridTooCoarseError(f"grid too coarse: projection leakage {leak:.3f} > {leakage_limit}")
    return (B, leak) if return_leakage else B


def support_overlap(F: VectorField, G: VectorField) -> float:
    """Normalized overlap ``int |F||G| / (||F|| ||G||)``: 0 for disjoint supports."""
    fm = np.sqrt(np.sum(F.data**2, axis=0))
    gm = np.sqrt(np.sum(G.data**2, axis=0))
    den = np.sqrt(np.sum(fm**2) * np.sum(gm**2))
    return float(np.sum(fm * gm) / den) if den > 0 else 0.0


def build_link_field(cfg: LinkConfig, g: Grid3, supersample: int = 3,
                     overlap_limit: float = OVERLAP_LIMIT) -> ComponentFields:
    """
    Build one projected tube field per tube of ``cfg``.

    Raw supports are disjoint by the clearance rules of
    :func:`validate_config`; after projection every pair must keep a
    normalized overlap below ``overlap_limit``.
    """
    validate_config(cfg, g).raise_if_failed()
    comps, leaks = [], []
    for t in cfg.tubes:
        B, leak = build_tube_field(t, g, supersample, return_leakage=True)
        comps.append(B)
        leaks.append(leak)
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            ov = support_overlap(comps[i], comps[j])
            if ov > overlap_limit:
                raise GridTooCoarseError(
                    f"grid too coarse: supports of {cfg.labels[i]} and {cfg.labels[j]} "
                    f"overlap after projection ({ov:.2e})"
                )
    for lab, B in zip(cfg.labels, comps):
        res = divergence_residual(B)
        if res > 1e-10:
            raise RuntimeError(f"component {lab} not solenoidal after projection ({res:.2e})")
    return ComponentFields(comps, cfg.labels, groups=linked_groups(cfg), leakage=leaks)


def _trilinear(data: np.ndarray, pts: np.ndarray, h: float, n: int) -> np.ndarray:
    """Periodic trilinear interpolation of ``data`` (3, n, n, n) at ``pts`` (p, 3)."""
    u = pts / h
    i0 = np.floor(u).astype(int)
    f = u - i0
    out = np.zeros((data.shape[0], len(pts)))
    for dx in (0, 1):
        wx = f[:, 0] if dx else 1 - f[:, 0]
        ix = (i0[:, 0] + dx) % n
        for dy in (0, 1):
            wy = f[:, 1] if dy else 1 - f[:, 1]
            iy = (i0[:, 1] + dy) % n
            for dz in (0, 1):
                wz = f[:, 2] if dz else 1 - f[:, 2]
                iz = (i0[:, 2] + dz) % n
                out += (wx * wy * wz) * data[:, ix, iy, iz]
    return out


def flux_through_disk(B: VectorField, t: TubeSpec, radius_factor: float = 1.5,
                      nr: int = 192, ntheta: int = 384, vertex: int = 0) -> float:
    """
    Flux of ``B`` through the meridional disk of ``t`` at a curve vertex.

    The disk is centred on the core, normal to the core tangent, with radius
    ``radius_factor * t.radius``; the integrand is trilinearly interpolated
    and integrated by the midpoint rule in polar coordinates.
    """
    g = B.grid
    T, U, V, _ = rotation_minimizing_frame(t.curve)
    c = t.curve.points[vertex]
    R = radius_factor * t.radius
    dr = R / nr
    dth = 2 * np.pi / ntheta
    rr = (np.arange(nr) + 0.5) * dr
    th = (np.arange(ntheta) + 0.5) * dth
    RR, TH = np.meshgrid(rr, th, indexing="ij")
    offs = np.cos(TH.ravel())[:, None] * U[vertex] + np.sin(TH.ravel())[:, None] * V[vertex]
    pts = c + RR.ravel()[:, None] * offs
    if pts.min() < 0 or pts.max() >= g.L:
        raise ConfigurationError("flux disk exits the box")
    vals = _trilinear(B.data, pts, g.h, g.n)
    bn = T[vertex] @ vals
    return float(np.sum(bn * RR.ravel()) * dr * dth)
