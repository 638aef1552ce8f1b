"""
Woltjer's problem on the torus
==============================

Minimize ``E(B)`` over solenoidal mean-zero fields with ``H(B) = c``. In
the helical basis every Fourier mode splits into the two eigenvectors of
``curl`` with eigenvalues ``+|k|`` and ``-|k|``, so that

    E = sum |b+|^2 + |b-|^2,     H = sum (|b+|^2 - |b-|^2) / |k|

and ``E >= lambda1 |H|`` with ``lambda1 = 2 pi / L``. The minimum is
attained by a lowest-shell eigenfield; the canonical choice here is the
mode ``k = (0, 0, lambda1)`` with phase 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Grid3, VectorField, fft3, ifft3

__all__ = [
    "WoltjerSolution",
    "DescentOptions",
    "DescentResult",
    "helical_decompose",
    "helical_energies",
    "helicity_helical",
    "beltrami_residual",
    "woltjer_minimizer",
    "constrained_descent",
    "eigenmode",
    "mixed_start",
]


@dataclass
class WoltjerSolution:
    field: VectorField
    lam: float
    E: float
    H: float


def _helical_parts(b_hat: np.ndarray, grid: Grid3):
    ops = grid.ops
    kmag = np.where(ops.kmag > 0, ops.kmag, 1.0)
    cb = ops.curl_hat(b_hat) / kmag
    plus = 0.5 * (b_hat + cb)
    minus = 0.5 * (b_hat - cb)
    plus[..., ops.kmag == 0] = 0.0
    minus[..., ops.kmag == 0] = 0.0
    return plus, minus


def helical_decompose(B: VectorField) -> tuple[VectorField, VectorField]:
    """Split ``B`` into its positive- and negative-helicity parts."""
    if not B.is_mean_zero(1e-10):
        raise ValueError("helical decomposition requires a mean-zero field")
    plus, minus = _helical_parts(B.hat(), B.grid)
    n = B.grid.n
    return VectorField(B.grid, ifft3(plus, n)), VectorField(B.grid, ifft3(minus, n))


def helical_energies(B: VectorField) -> tuple[float, float]:
    plus, minus = _helical_parts(B.hat(), B.grid)
    ops = B.grid.ops
    return ops.inner_hat(plus, plus), ops.inner_hat(minus, minus)


def helicity_helical(B: VectorField) -> float:
    """Helicity from the helical spectrum, ``sum (|b+|^2 - |b-|^2) / |k|``."""
    ops = B.grid.ops
    plus, minus = _helical_parts(B.hat(), B.grid)
    inv = np.where(ops.kmag > 0, 1.0 / np.where(ops.kmag > 0, ops.kmag, 1.0), 0.0)
    # inner_hat is bilinear, so weighting one argument by 1/|k| gives the sum
    return ops.inner_hat(plus * inv, plus) - ops.inner_hat(minus * inv, minus)


def beltrami_residual(B: VectorField, lam: float) -> float:
    """``||curl B - lam B|| / ||B||`` (0 for the zero field)."""
    ops = B.grid.ops
    bh = B.hat()
    nrm = ops.inner_hat(bh, bh)
    if nrm == 0:
        return 0.0
    r = ops.curl_hat(bh) - lam * bh
    return math.sqrt(ops.inner_hat(r, r) / nrm)


def woltjer_minimizer(c: float, g: Grid3) -> WoltjerSolution:
    """
    Closed-form minimizer of the energy at helicity ``c``.

    ``c = 0`` gives the zero field. Otherwise the field is
    ``A (sin kz, cos kz, 0)`` (eigenvalue ``+lambda1``) or
    ``A (cos kz, sin kz, 0)`` (eigenvalue ``-lambda1``), ``k = lambda1``,
    scaled so that its helicity is ``c``; its energy is ``lambda1 |c|``.
    """
    lam1 = g.lambda1
    if c == 0:
        return WoltjerSolution(VectorField.zeros(g), 0.0, 0.0, 0.0)
    lam = math.copysign(lam1, c)
    amp = math.sqrt(abs(c) * lam1 / g.volume)
    _, _, Z = g.mesh()
    kz = lam1 * Z
    zero = np.zeros(g.shape)
    if lam > 0:
        data = np.array([np.sin(kz), np.cos(kz), zero])
    else:
        data = np.array([np.cos(kz), np.sin(kz), zero])
    B = VectorField(g, amp * data)
    E = lam1 * abs(c)
    return WoltjerSolution(B, lam, E, float(c))


def eigenmode(g: Grid3, axis: int = 2, sign: int = 1, k: int = 1, energy: float = 1.0) -> VectorField:
    """
    Single-wavevector curl eigenfield along ``axis`` with eigenvalue
    ``sign * k * lambda1`` and energy ``energy``.

    For ``axis = 2`` this is ``(sin kz, cos kz, 0)`` (``sign = +1``) or
    ``(cos kz, sin kz, 0)`` (``sign = -1``); other axes follow by cyclic
    permutation of coordinates, which preserves handedness.
    """
    if k < 1 or 3 * k >= g.n:
        raise ValueError(f"mode index {k} not resolved on n={g.n}")
    amp = math.sqrt(energy / g.volume)
    coords = g.mesh()
    q = k * g.lambda1 * coords[axis]
    if sign > 0:
        a, b = np.sin(q), np.cos(q)
    else:
        a, b = np.cos(q), np.sin(q)
    data = np.zeros((3,) + g.shape)
    data[(axis + 1) % 3] = a
    data[(axis + 2) % 3] = b
    return VectorField(g, amp * data)


def mixed_start(c: float, g: Grid3) -> VectorField:
    """
    Deterministic start for :func:`constrained_descent` with helicity ``c``.

    For ``c != 0`` it mixes a lowest-shell mode of each handedness and a
    ``|k| = 2`` mode, in energy ratio ``1 : 1/2 : 1``, scaled to helicity
    ``c``. For ``c = 0`` it is the sum of two lowest-shell modes of opposite
    handedness with equal energies.
    """
    lam1 = g.lambda1
    if c == 0:
        return eigenmode(g, 0, +1, 1, 1.0) + eigenmode(g, 1, -1, 1, 1.0)
    s = 1 if c > 0 else -1
    # helicities:  e / lam1  -  (e/2) / lam1  +  e / (2 lam1)  =  e / lam1
    e = abs(c) * lam1
    return (eigenmode(g, 0, s, 1, e) + eigenmode(g, 1, -s, 1, 0.5 * e)
            + eigenmode(g, 2, s, 2, e))


@dataclass
class DescentOptions:
    tol: float = 1e-14
    max_steps: int = 20000
    tau: float | None = None  # defaults to 0.1 / lambda1
    zero_energy: float = 1e-12  # relative to the starting energy, for c = 0


@dataclass
class DescentResult:
    field: VectorField
    converged: bool
    steps: int
    energies: list[float] = field(default_factory=list)
    helicities: list[float] = field(default_factory=list)
    beltrami_residual: float = float("nan")
    lam: float = 0.0


def constrained_descent(B0: VectorField, c: float, opts: DescentOptions | None = None) -> DescentResult:
    """
    Energy descent on the helicity level set ``H = c``.

    Each step moves ``B <- B - tau (B - mu A)`` with ``mu = <A, B> / <A, A>``
    (helicity stationary to first order), then rescales ``B`` so that its
    helicity is exactly ``c``. A step that would raise the energy is retried
    with ``tau / 2``. The iteration stops once the relative energy decrease
    per step falls below ``opts.tol`` (or, for ``c = 0``, once the energy
    drops below ``opts.zero_energy`` times its initial value).
    """
    opts = opts or DescentOptions()
    g = B0.grid
    ops = g.ops
    lam1 = g.lambda1
    tau = opts.tau if opts.tau is not None else 0.1 / lam1

    def helicity_of(bh):
        return ops.inner_hat(bh, ops.potential_hat(bh))

    b = fft3(B0.data)
    b[:, 0, 0, 0] = 0.0
    H0 = helicity_of(b)
    if abs(H0 - c) > 1e-6 * max(1.0, abs(c)):
        raise ValueError(f"initial helicity {H0:.6g} does not match c = {c:.6g}")
    E = ops.inner_hat(b, b)
    E_start = E
    energies, hels = [E], [H0]
    converged = False
    mu = 0.0
    steps = 0
    while steps < opts.max_steps:
        a = ops.potential_hat(b)
        aa = ops.inner_hat(a, a)
        mu = ops.inner_hat(a, b) / aa if aa > 0 else 0.0
        direction = b - mu * a
        accepted = False
        t_try = tau
        for _ in range(40):
            nb = b - t_try * direction
            if c != 0:
                hn = helicity_of(nb)
                if hn * c <= 0:
                    t_try *= 0.5
                    continue
                nb = nb * math.sqrt(c / hn)
            En = ops.inner_hat(nb, nb)
            if En <= E:
                accepted = True
                break
            t_try *= 0.5
        steps += 1
        if not accepted:
            converged = True  # no descent direction left at round-off level
            break
        dec = (E - En) / E if E > 0 else 0.0
        b, E = nb, En
        energies.append(E)
        hels.append(helicity_of(b) if c != 0 else 0.0)
        if c == 0 and E <= opts.zero_energy * E_start:
            converged = True
            break
        if c != 0 and dec < opts.tol:
            converged = True
            break
    B = VectorField(g, ifft3(b, g.n))
    res = beltrami_residual(B, mu) if c != 0 else 0.0
    return DescentResult(B, converged, steps, energies, hels, res, mu)
