"""
Periodic-box vector calculus
============================

Fields live on a uniform ``n x n x n`` grid of the torus of period ``L``.
Arrays are indexed ``[ix, iy, iz]`` (vector fields carry a leading component
axis), so a Fortran-order flattening gives the x-fastest layout used by the
snapshot format. Derivatives are spectral: ``rfftn`` over the three spatial
axes, multiplication by ``i k``, inverse transform.

Nyquist convention: the wavenumber ``-n/2`` is differentiated as zero, which
keeps every derivative of a real field real. The handful of "pure Nyquist"
modes (every index either 0 or ``n/2``, except the mean) therefore have no
resolvable derivative; the Leray projection removes them together with the
gradient part.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError, GridTooCoarseError, NonFiniteFieldError

__all__ = [
    "Grid3",
    "ScalarField",
    "VectorField",
    "SpectralOperators",
    "spectral_ops",
    "fft3",
    "ifft3",
    "curl",
    "divergence",
    "gradient",
    "leray_project",
    "inverse_laplacian",
    "vector_potential",
    "l2_inner",
    "spectral_inner",
    "divergence_residual",
    "mean_zero",
]


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with ``n`` points per axis and period ``L``."""

    n: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)):
            raise TypeError("n must be an integer")
        if self.n < 16:
            raise GridTooCoarseError(f"grid too coarse: n={self.n} < 16")
        if self.n % 2:
            raise ValueError(f"n must be even, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"box period must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def lambda1(self) -> float:
        """Smallest positive curl eigenvalue on the torus, ``2 pi / L``."""
        return 2 * np.pi / self.L

    def coords(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.coords()
        return tuple(np.meshgrid(x, x, x, indexing="ij"))

    def points(self) -> np.ndarray:
        """All grid points as an ``(n**3, 3)`` array in C (z-fastest) order."""
        X, Y, Z = self.mesh()
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    @property
    def ops(self) -> "SpectralOperators":
        return spectral_ops(self.n, float(self.L))


class SpectralOperators:
    """Wavenumber tables for one grid (cached per ``(n, L)``)."""

    def __init__(self, n: int, L: float):
        self.n = n
        self.L = L
        self.shape_hat = (n, n, n // 2 + 1)
        idx_full = np.fft.fftfreq(n, 1.0 / n)
        idx_half = np.fft.rfftfreq(n, 1.0 / n)
        IX, IY, IZ = np.meshgrid(idx_full, idx_full, idx_half, indexing="ij")
        self.index = np.stack([IX, IY, IZ])
        scale = 2 * np.pi / L
        nyq = n // 2
        # derivative wavenumbers with the Nyquist entry zeroed
        kd = self.index * scale
        kd[np.abs(self.index) == nyq] = 0.0
        self.k = kd
        self.k2 = np.sum(kd * kd, axis=0)
        zero_k = self.k2 == 0
        self.inv_k2 = np.where(zero_k, 0.0, 1.0 / np.where(zero_k, 1.0, self.k2))
        self.kmag = np.sqrt(self.k2)
        # modes with no resolvable derivative, other than the mean
        self.unresolved = zero_k.copy()
        self.unresolved[0, 0, 0] = False
        self.dealias = np.all(np.abs(self.index) < n / 3.0, axis=0)
        # Parseval weights for the half spectrum
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.weights = np.broadcast_to(w, self.shape_hat)

    def curl_hat(self, b: np.ndarray) -> np.ndarray:
        k = self.k
        bx, by, bz = b[..., 0, :, :, :], b[..., 1, :, :, :], b[..., 2, :, :, :]
        return 1j * np.stack(
            [k[1] * bz - k[2] * by, k[2] * bx - k[0] * bz, k[0] * by - k[1] * bx],
            axis=-4,
        )

    def div_hat(self, b: np.ndarray) -> np.ndarray:
        return 1j * np.sum(self.k * b, axis=-4)

    def project_hat(self, b: np.ndarray) -> np.ndarray:
        kb = np.sum(self.k * b, axis=-4, keepdims=True)
        out = b - self.k * (kb * self.inv_k2)
        out[..., self.unresolved] = 0.0
        return out

    def potential_hat(self, b: np.ndarray) -> np.ndarray:
        """Coulomb-gauge potential ``A = -lap^-1 curl B`` in Fourier space."""
        return self.curl_hat(b) * self.inv_k2

    def inner_hat(self, a: np.ndarray, b: np.ndarray) -> float:
        """``h^3 sum_x a.b`` from half-spectrum coefficients (Parseval)."""
        n = self.n
        fac = (self.L / n) ** 3 / n**3
        prod = self.weights * (a.real * b.real + a.imag * b.imag)
        return float(fac * prod.sum())


@lru_cache(maxsize=8)
def spectral_ops(n: int, L: float) -> SpectralOperators:
    return SpectralOperators(n, L)


def fft3(a: np.ndarray) -> np.ndarray:
    return sfft.rfftn(a, axes=(-3, -2, -1))


def ifft3(a: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfftn(a, s=(n, n, n), axes=(-3, -2, -1))


def _check_finite(arr: np.ndarray, what: str):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteFieldError(f"{what} contains non-finite values")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {self.values.shape}")

    def norm(self) -> float:
        return float(np.sqrt(self.grid.h**3 * np.sum(self.values**2)))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three-component real field sampled on ``grid``; ``data`` has shape ``(3, n, n, n)``."""

    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (3,) + self.grid.shape:
            raise ValueError(f"expected shape {(3,) + self.grid.shape}, got {self.data.shape}")

    @classmethod
    def zeros(cls, grid: Grid3) -> "VectorField":
        return cls(grid, np.zeros((3,) + grid.shape))

    @classmethod
    def from_function(cls, grid: Grid3, f) -> "VectorField":
        """Sample ``f(X, Y, Z) -> (Fx, Fy, Fz)`` on the grid."""
        X, Y, Z = grid.mesh()
        comps = [np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in f(X, Y, Z)]
        return cls(grid, np.array(comps))

    @classmethod
    def from_hat(cls, grid: Grid3, hat: np.ndarray) -> "VectorField":
        return cls(grid, ifft3(hat, grid.n))

    def hat(self) -> np.ndarray:
        return fft3(self.data)

    def norm(self) -> float:
        return float(np.sqrt(l2_inner(self, self)))

    def max_abs(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.data**2, axis=0))))

    def mean(self) -> np.ndarray:
        return self.data.mean(axis=(1, 2, 3))

    def is_mean_zero(self, tol: float = 1e-12) -> bool:
        scale = max(self.norm(), 1e-300)
        return float(np.linalg.norm(self.mean())) * np.sqrt(self.grid.volume) <= tol * scale

    def is_solenoidal(self, tol: float = 1e-10) -> bool:
        return divergence_residual(self) <= tol

    def _same(self, other: "VectorField"):
        if other.grid != self.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")

    def __add__(self, other: "VectorField") -> "VectorField":
        self._same(other)
        return VectorField(self.grid, self.data + other.data)

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._same(other)
        return VectorField(self.grid, self.data - other.data)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.grid, self.data * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(self.grid, -self.data)


def curl(F: VectorField) -> VectorField:
    """Spectral curl; the result is mean-zero."""
    _check_finite(F.data, "curl input")
    ops = F.grid.ops
    return VectorField.from_hat(F.grid, ops.curl_hat(F.hat()))


def divergence(F: VectorField) -> ScalarField:
    _check_finite(F.data, "divergence input")
    ops = F.grid.ops
    return ScalarField(F.grid, ifft3(ops.div_hat(F.hat()), F.grid.n))


def gradient(phi: ScalarField) -> VectorField:
    _check_finite(phi.values, "gradient input")
    ops = phi.grid.ops
    ph = fft3(phi.values)
    return VectorField.from_hat(phi.grid, 1j * ops.k * ph)


def leray_project(F: VectorField) -> VectorField:
    """Remove the gradient part of ``F``; the mean is kept."""
    _check_finite(F.data, "projection input")
    ops = F.grid.ops
    return VectorField.from_hat(F.grid, ops.project_hat(F.hat()))


def inverse_laplacian(f: ScalarField) -> ScalarField:
    """Mean-zero solution ``u`` of ``lap u = f - mean(f)``."""
    _check_finite(f.values, "inverse Laplacian input")
    ops = f.grid.ops
    return ScalarField(f.grid, ifft3(-fft3(f.values) * ops.inv_k2, f.grid.n))


def mean_zero(F: VectorField) -> VectorField:
    return VectorField(F.grid, F.data - F.mean()[:, None, None, None])


def vector_potential(B: VectorField) -> VectorField:
    """
    Coulomb-gauge vector potential of a solenoidal, mean-zero field.

    Returns ``A = -lap^-1 curl B``, which is divergence free, mean-zero and
    satisfies ``curl A = B``. Raises ``ValueError`` when ``B`` carries a mean
    (helicity on the torus is gauge dependent in that case).
    """
    _check_finite(B.data, "vector potential input")
    if not B.is_mean_zero(1e-10):
        raise ValueError("vector_potential requires a mean-zero field")
    ops = B.grid.ops
    return VectorField.from_hat(B.grid, ops.potential_hat(B.hat()))


def l2_inner(F: VectorField, G: VectorField) -> float:
    """Periodic midpoint rule ``h^3 sum F . G``."""
    if F.grid != G.grid:
        raise GridMismatchError(f"grids differ: {F.grid} vs {G.grid}")
    return float(F.grid.h**3 * np.sum(F.data * G.data))


def spectral_inner(a_hat: np.ndarray, b_hat: np.ndarray, grid: Grid3) -> float:
    """Same value as :func:`l2_inner`, evaluated on rfft coefficients."""
    return grid.ops.inner_hat(a_hat, b_hat)


def divergence_residual(F: VectorField) -> float:
    """``||div F||_2 / ||F||_2`` with the divergence taken spectrally (0 for F = 0)."""
    nrm = F.norm()
    if nrm == 0.0:
        return 0.0
    return divergence(F).norm() / nrm
