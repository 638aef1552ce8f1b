"""
Energies, helicities and time-series records
============================================

Conventions: the magnetic energy is ``E(B) = int |B|^2`` and the kinetic
energy ``int rho |v|^2``, both *without* the usual factor 1/2. Helicity is
the symmetric bilinear form ``H(B1, B2) = int B1 . A2`` with ``A2`` the
Coulomb-gauge potential of ``B2``, and ``H(B) = H(B, B)``. For two linked
unit-flux tubes this gives ``H(B1 + B2) = 2 lk``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import VectorField, l2_inner, vector_potential

__all__ = [
    "DiagnosticsRecord",
    "energy",
    "helicity",
    "cross_helicity",
    "arnold_gap",
    "record",
    "record_from_spectral",
    "csv_header",
    "write_series_csv",
    "read_series_csv",
]


def energy(B: VectorField) -> float:
    """``int |B|^2`` (no factor 1/2)."""
    return l2_inner(B, B)


def helicity(B: VectorField) -> float:
    return l2_inner(B, vector_potential(B))


def cross_helicity(B1: VectorField, B2: VectorField) -> float:
    return l2_inner(B1, vector_potential(B2))


def arnold_gap(B: VectorField, lambda1: float) -> float:
    """``E(B) - lambda1 |H(B)|``; non-negative for every mean-zero field on the torus."""
    return energy(B) - lambda1 * abs(helicity(B))


@dataclass
class DiagnosticsRecord:
    """
    One time sample of a run.

    ``H_cross`` is the full symmetric matrix of cross-helicities between
    components (its diagonal is ``H_comp``). ``H_group`` holds the helicity
    of each linked group of components, e.g. ``B+ = B1+ + B2+`` (CSV
    column ``Hgroup_T1+:T2+``), and ``arnold_lhs = lambda1 * sum |H_group|``
    is the energy floor certified by the energy-helicity estimate while
    group supports stay disjoint.
    """

    t: float
    E_mag: float
    E_kin: float
    H_total: float
    H_comp: list[float]
    H_cross: np.ndarray
    H_group: list[float]
    arnold_lhs: float
    div_residuals: dict[str, float]
    labels: tuple[str, ...] = ()
    group_names: tuple[str, ...] = ()
    lambda1: float = 1.0
    groups: tuple[tuple[str, ...], ...] = ()

    @property
    def E_total(self) -> float:
        return self.E_mag + self.E_kin

    @property
    def max_div_residual(self) -> float:
        return max(self.div_residuals.values()) if self.div_residuals else 0.0

    def row(self) -> list[float]:
        return (
            [self.t, self.E_mag, self.E_kin, self.H_total]
            + list(self.H_comp)
            + list(self.H_group)
            + [self.arnold_lhs, self.max_div_residual]
        )


def _group_name(group) -> str:
    return ":".join(group)


def csv_header(labels, group_names) -> list[str]:
    return (
        ["t", "E_mag", "E_kin", "H_total"]
        + [f"H_{lab}" for lab in labels]
        + [f"Hgroup_{g}" for g in group_names]
        + ["arnold_lhs", "max_div_residual"]
    )


def write_series_csv(records: list[DiagnosticsRecord], path):
    """One row per record; floats written with 17 significant digits."""
    if not records:
        raise ValueError("no records to write")
    first = records[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(first.labels, first.group_names))
        for rec in records:
            w.writerow([repr(float(v)) for v in rec.row()])


def read_series_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    return header, data.reshape(-1, len(header))


def record_from_spectral(t, b_hat, v_hat, grid, labels, groups, rho=1.0,
                         kinetic: bool = True) -> DiagnosticsRecord:
    """
    Build a record from rfft coefficients.

    ``b_hat`` has shape ``(ncomp, 3, ...)``; every inner product is evaluated
    with Parseval's identity, which equals the physical-space midpoint rule.
    """
    ops = grid.ops
    ncomp = b_hat.shape[0]
    a_hat = ops.potential_hat(b_hat)
    Hx = np.empty((ncomp, ncomp))
    for i in range(ncomp):
        for j in range(i, ncomp):
            if i == j:
                Hx[i, i] = ops.inner_hat(b_hat[i], a_hat[i])
            else:
                # symmetrize: the two orderings agree to round-off
                hij = 0.5 * (ops.inner_hat(b_hat[i], a_hat[j]) + ops.inner_hat(b_hat[j], a_hat[i]))
                Hx[i, j] = Hx[j, i] = hij
    btot = b_hat.sum(axis=0)
    E_mag = ops.inner_hat(btot, btot)
    E_kin = rho * ops.inner_hat(v_hat, v_hat) if (kinetic and v_hat is not None) else 0.0
    H_total = math.fsum(Hx.ravel())
    idx = {lab: i for i, lab in enumerate(labels)}
    H_group = []
    for grp in groups:
        ii = [idx[lab] for lab in grp]
        H_group.append(math.fsum(Hx[np.ix_(ii, ii)].ravel()))
    lam1 = grid.lambda1

    def resid(f_hat):
        nrm = ops.inner_hat(f_hat, f_hat)
        if nrm == 0:
            return 0.0
        d = ops.div_hat(f_hat)
        return math.sqrt(ops.inner_hat(d, d) / nrm)

    div = {lab: resid(b_hat[i]) for i, lab in enumerate(labels)}
    if v_hat is not None:
        div["v"] = resid(v_hat)
    return DiagnosticsRecord(
        t=float(t),
        E_mag=E_mag,
        E_kin=E_kin,
        H_total=H_total,
        H_comp=[float(Hx[i, i]) for i in range(ncomp)],
        H_cross=Hx,
        H_group=H_group,
        arnold_lhs=lam1 * sum(abs(h) for h in H_group),
        div_residuals=div,
        labels=tuple(labels),
        group_names=tuple(_group_name(g) for g in groups),
        lambda1=lam1,
        groups=tuple(tuple(g) for g in groups),
    )


def record(state) -> DiagnosticsRecord:
    """Diagnostics of a :class:`~toporelax.relaxation.RelaxationState`."""
    return record_from_spectral(
        state.t,
        state.b_hat,
        state.v_hat,
        state.grid,
        state.labels,
        state.groups,
        rho=state.rho,
        kinetic=state.scheme != "vallis",
    )
