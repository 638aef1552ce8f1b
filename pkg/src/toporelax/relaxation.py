"""
Energy-decreasing, topology-preserving dynamics
===============================================

Two schemes evolve a field decomposed into components ``B = sum_k B_k``,
each transported by the same velocity (``dB_k/dt = curl(v x B_k)``), which
keeps every component helicity and cross-helicity invariant:

``moffatt``
    viscous, perfectly conducting MHD with uniform density::

        rho dv/dt = P[J x B + rho v x omega] + mu lap v

``vallis``
    inertia-free relaxation, ``v = S P[J x B] / mu`` recomputed at every
    stage, where ``S = (1 - ell^2 lap)^-1`` is an optional smoothing of the
    velocity (``ell = 0`` gives the plain scheme).

Both are pseudo-spectral with 2/3-rule dealiasing of every product. The
state is kept band-limited to the dealiased shell, which makes the discrete
energy law (``d/dt (E_mag + E_kin) = -2 mu int |curl v|^2`` for moffatt,
``dE_mag/dt = -2 mu <v, S^-1 v>`` for vallis) and all helicity balances hold
exactly in the semi-discrete sense; only the time integrator (classical RK4)
leaves a residual.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .diagnostics import DiagnosticsRecord, record
from .errors import ConfigurationError, InvariantViolation, NonFiniteFieldError, TimeStepTooLarge
from .modeled import ComponentFields
from .spectral import Grid3, VectorField, fft3, ifft3

log = logging.getLogger(__name__)

__all__ = [
    "RelaxationState",
    "RunConfig",
    "RunResult",
    "lorentz_force",
    "step_moffatt",
    "step_vallis",
    "stable_dt",
    "run",
    "measure_dissipation",
    "SCHEMES",
]

SCHEMES = ("moffatt", "vallis")

# RK4 stays stable for the vallis diffusion-like operator up to ~2.78 on the
# negative real axis; 2.5 keeps a margin at cfl = 1
_VALLIS_DIFFUSIVE = 2.5


def _cross(a, b):
    ax, ay, az = a[..., 0, :, :, :], a[..., 1, :, :, :], a[..., 2, :, :, :]
    bx, by, bz = b[..., 0, :, :, :], b[..., 1, :, :, :], b[..., 2, :, :, :]
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-4)


def _max_norm(u: np.ndarray) -> float:
    return float(np.sqrt(np.max(np.einsum("i...,i...->...", u, u))))


@dataclass
class RelaxationState:
    """
    Spectral state of a run.

    ``b_hat`` holds the rfft coefficients of every component, shape
    ``(ncomp, 3, n, n, n//2 + 1)``; ``v_hat`` the velocity. For the vallis
    scheme ``v_hat`` is the diagnostic velocity of the current field and
    carries no kinetic energy.
    """

    grid: Grid3
    b_hat: np.ndarray
    v_hat: np.ndarray
    t: float = 0.0
    rho: float = 1.0
    mu: float = 1.0
    labels: tuple[str, ...] = ()
    groups: list[tuple[str, ...]] = field(default_factory=list)
    scheme: str = "vallis"
    smoothing: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if not (self.rho > 0 and self.mu > 0):
            raise ConfigurationError("rho and mu must be positive")
        if self.smoothing < 0:
            raise ConfigurationError("smoothing length must be non-negative")
        if not self.labels:
            self.labels = tuple(f"B{i}" for i in range(self.b_hat.shape[0]))
        self.labels = tuple(self.labels)
        if not self.groups:
            self.groups = [(lab,) for lab in self.labels]

    @classmethod
    def from_components(cls, comps: ComponentFields, v: VectorField | None = None, *,
                        scheme: str = "vallis", rho: float = 1.0, mu: float = 1.0,
                        smoothing: float | None = None, t: float = 0.0) -> "RelaxationState":
        """
        Start a run from component fields (and an optional velocity, zero by
        default). Every field is truncated to the dealiased shell, Leray
        projected and mean-zeroed.
        """
        g = comps.grid
        ops = g.ops
        b = np.stack([fft3(c.data) for c in comps.components])
        b = _clean(b, ops)
        vh = np.zeros((3,) + ops.shape_hat, dtype=complex) if v is None else _clean(fft3(v.data), ops)
        if smoothing is None:
            smoothing = default_smoothing(g)
        s = cls(g, b, vh, t, rho, mu, comps.labels, list(comps.groups), scheme, smoothing)
        if scheme == "vallis":
            s.v_hat = _vallis_velocity(s, b.sum(axis=0))
        return s

    @property
    def components(self) -> ComponentFields:
        n = self.grid.n
        data = ifft3(self.b_hat, n)
        return ComponentFields([VectorField(self.grid, d) for d in data], self.labels, list(self.groups))

    @property
    def velocity(self) -> VectorField:
        return VectorField(self.grid, ifft3(self.v_hat, self.grid.n))

    def total_field(self) -> VectorField:
        return VectorField(self.grid, ifft3(self.b_hat.sum(axis=0), self.grid.n))

    def total_energy(self) -> float:
        ops = self.grid.ops
        bt = self.b_hat.sum(axis=0)
        E = ops.inner_hat(bt, bt)
        if self.scheme == "moffatt":
            E += self.rho * ops.inner_hat(self.v_hat, self.v_hat)
        return E


def default_smoothing(g: Grid3) -> float:
    """Velocity smoothing length of the vallis scheme, ``L / (2 pi)``."""
    return g.L / (2 * np.pi)


def _clean(hat: np.ndarray, ops) -> np.ndarray:
    out = ops.project_hat(hat * ops.dealias)
    out[..., 0, 0, 0] = 0.0
    return out


def lorentz_force(B: VectorField) -> VectorField:
    """``curl(B) x B`` with the product dealiased by the 2/3 rule."""
    g = B.grid
    ops = g.ops
    bh = fft3(B.data)
    J = ifft3(ops.curl_hat(bh), g.n)
    f = fft3(_cross(J, B.data)) * ops.dealias
    return VectorField(g, ifft3(f, g.n))


# right-hand sides ----------------------------------------------------------

def _vallis_velocity(s: RelaxationState, bt_hat: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    ops = s.grid.ops
    n = s.grid.n
    if B is None:
        B = ifft3(bt_hat, n)
    J = ifft3(ops.curl_hat(bt_hat), n)
    f = fft3(_cross(J, B))
    return ops.project_hat(f * _smoother(s)) / s.mu


def _smoother(s: RelaxationState) -> np.ndarray:
    ops = s.grid.ops
    if s.smoothing == 0:
        return ops.dealias
    return ops.dealias / (1.0 + s.smoothing**2 * ops.k2)


def _induction(ops, bk, v):
    """``curl D(v x B_k)`` for every component."""
    return ops.curl_hat(fft3(_cross(v, bk)) * ops.dealias)


def _rhs_vallis(s: RelaxationState, b_hat: np.ndarray):
    ops = s.grid.ops
    n = s.grid.n
    bk = ifft3(b_hat, n)
    bt_hat = b_hat.sum(axis=0)
    v_hat = _vallis_velocity(s, bt_hat, bk.sum(axis=0))
    v = ifft3(v_hat, n)
    return _induction(ops, bk, v), v_hat


def _rhs_moffatt(s: RelaxationState, b_hat: np.ndarray, v_hat: np.ndarray):
    ops = s.grid.ops
    n = s.grid.n
    bk = ifft3(b_hat, n)
    bt_hat = b_hat.sum(axis=0)
    B = bk.sum(axis=0)
    J = ifft3(ops.curl_hat(bt_hat), n)
    v = ifft3(v_hat, n)
    w = ifft3(ops.curl_hat(v_hat), n)
    f = _cross(J, B) / s.rho + _cross(v, w)
    dv = ops.project_hat(fft3(f) * ops.dealias) - (s.mu / s.rho) * ops.k2 * v_hat
    return _induction(ops, bk, v), dv


def _finish(s: RelaxationState, b_hat, v_hat, dt) -> RelaxationState:
    ops = s.grid.ops
    if not (np.all(np.isfinite(b_hat)) and np.all(np.isfinite(v_hat))):
        raise NonFiniteFieldError(f"non-finite field after step at t={s.t:.6g}")
    b_hat = _clean(b_hat, ops)
    v_hat = _clean(v_hat, ops)
    return replace(s, b_hat=b_hat, v_hat=v_hat, t=s.t + dt)


def _advance_moffatt(s: RelaxationState, dt: float) -> RelaxationState:
    b0, v0 = s.b_hat, s.v_hat
    kb1, kv1 = _rhs_moffatt(s, b0, v0)
    kb2, kv2 = _rhs_moffatt(s, b0 + 0.5 * dt * kb1, v0 + 0.5 * dt * kv1)
    kb3, kv3 = _rhs_moffatt(s, b0 + 0.5 * dt * kb2, v0 + 0.5 * dt * kv2)
    kb4, kv4 = _rhs_moffatt(s, b0 + dt * kb3, v0 + dt * kv3)
    b = b0 + (dt / 6) * (kb1 + 2 * kb2 + 2 * kb3 + kb4)
    v = v0 + (dt / 6) * (kv1 + 2 * kv2 + 2 * kv3 + kv4)
    return _finish(s, b, v, dt)


def _advance_vallis(s: RelaxationState, dt: float, k1=None) -> RelaxationState:
    b0 = s.b_hat
    if k1 is None:
        k1, _ = _rhs_vallis(s, b0)
    k2, _ = _rhs_vallis(s, b0 + 0.5 * dt * k1)
    k3, _ = _rhs_vallis(s, b0 + 0.5 * dt * k2)
    k4, _ = _rhs_vallis(s, b0 + dt * k3)
    b = b0 + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    new = _finish(s, b, s.v_hat, dt)
    new.v_hat = _vallis_velocity(new, new.b_hat.sum(axis=0))
    return new


# time-step control ----------------------------------------------------------

def _limits(s: RelaxationState) -> dict[str, float]:
    g = s.grid
    h = g.h
    n = g.n
    B = ifft3(s.b_hat.sum(axis=0), n)
    bmax = _max_norm(B)
    vmax = _max_norm(ifft3(s.v_hat, n))
    inf = math.inf
    lim = {"advective": h / vmax if vmax > 0 else inf}
    if s.scheme == "moffatt":
        lim["alfven"] = h * math.sqrt(s.rho) / bmax if bmax > 0 else inf
        lim["viscous"] = s.rho * h * h / (6 * s.mu)
    else:
        # linearized vallis operator acts like a diffusion with coefficient
        # ~ |B|^2 / (mu (1 + ell^2 k^2)), largest at the grid scale
        lim["diffusive"] = (_VALLIS_DIFFUSIVE * s.mu * (s.smoothing**2 + (h / np.pi) ** 2) / bmax**2
                            if bmax > 0 else inf)
    return lim


def stable_dt(s: RelaxationState, cfl: float = 0.4) -> float:
    """
    Largest stable time step for ``s``.

    moffatt: ``cfl * min(h / max|v|, h sqrt(rho) / max|B|, rho h^2 / (6 mu))``.
    vallis: ``cfl * min(h / max|v|, 2.5 mu (ell^2 + (h/pi)^2) / max|B|^2)``.
    When no limit is active (vallis with ``B = 0``) the viscous bound
    ``cfl * rho h^2 / (6 mu)`` is returned.
    """
    lim = min(_limits(s).values())
    if not math.isfinite(lim):
        lim = s.rho * s.grid.h ** 2 / (6 * s.mu)
    return cfl * lim


def _check_dt(s, dt, cfl_max=0.5):
    if not dt > 0:
        raise TimeStepTooLarge(f"time step must be positive, got {dt}")
    limit = stable_dt(s, cfl=cfl_max)
    if dt > limit * (1 + 1e-12):
        raise TimeStepTooLarge(f"dt={dt:.4g} exceeds the stability limit {limit:.4g}")


def step_moffatt(s: RelaxationState, dt: float) -> RelaxationState:
    """
    One RK4 step of viscous perfectly conducting MHD.

    Raises :class:`TimeStepTooLarge` (without stepping) if ``dt`` exceeds
    ``stable_dt(s, cfl=0.5)`` and :class:`NonFiniteFieldError` if the step
    produced NaN or Inf; ``s`` is left untouched in both cases.
    """
    if s.scheme != "moffatt":
        s = replace(s, scheme="moffatt")
    _check_dt(s, dt)
    return _advance_moffatt(s, dt)


def step_vallis(s: RelaxationState, dt: float) -> RelaxationState:
    """One RK4 step of the inertia-free scheme; errors as :func:`step_moffatt`."""
    if s.scheme != "vallis":
        s = replace(s, scheme="vallis", v_hat=_vallis_velocity(s, s.b_hat.sum(axis=0)))
    _check_dt(s, dt)
    return _advance_vallis(s, dt)


# driver -------------------------------------------------------------------

@dataclass
class RunConfig:
    """
    Parameters of one relaxation run.

    Exactly one initial condition is used: ``link`` (a
    :class:`~toporelax.links.LinkConfig`), ``components`` (prebuilt
    :class:`ComponentFields`) or ``snapshot`` (path of a snapshot file).
    """

    scheme: str = "vallis"
    t_end: float = 5.0
    cfl: float = 0.4
    record_every: int = 10
    n: int = 64
    L: float = 2 * np.pi
    rho: float = 1.0
    mu: float = 1.0
    smoothing: float | None = None
    link: object | None = None
    components: ComponentFields | None = None
    snapshot: str | Path | None = None
    snapshot_dir: str | Path | None = None
    max_steps: int = 1_000_000
    wall_limit: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r} (expected one of {SCHEMES})")
        if not (isinstance(self.t_end, (int, float)) and self.t_end > 0 and math.isfinite(self.t_end)):
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl <= 0.5:
            raise ConfigurationError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if int(self.record_every) < 1:
            raise ConfigurationError("record_every must be at least 1")
        if not (self.rho > 0 and self.mu > 0):
            raise ConfigurationError("rho and mu must be positive")
        given = sum(x is not None for x in (self.link, self.components, self.snapshot))
        if given > 1:
            raise ConfigurationError("give only one of link, components or snapshot")

    @property
    def grid(self) -> Grid3:
        return Grid3(int(self.n), float(self.L))


@dataclass
class RunResult:
    series: list[DiagnosticsRecord]
    final: RelaxationState
    initial: RelaxationState
    steps: int = 0
    aborted: bool = False
    reason: str = ""
    rejected: int = 0
    wall_time: float = 0.0

    def __iter__(self):
        # allows ``series, final = run(cfg)``
        return iter((self.series, self.final))


def initial_state(cfg: RunConfig) -> RelaxationState:
    from .modeled import build_link_field

    if cfg.snapshot is not None:
        from .snapshot import read_snapshot

        snap = read_snapshot(cfg.snapshot)
        comps, v = snap.component_fields()
        return RelaxationState.from_components(comps, v if cfg.scheme == "moffatt" else None,
                                               scheme=cfg.scheme, rho=cfg.rho, mu=cfg.mu,
                                               smoothing=cfg.smoothing, t=snap.t)
    if cfg.components is not None:
        comps = cfg.components
    elif cfg.link is not None:
        comps = build_link_field(cfg.link, cfg.grid)
    else:
        raise ConfigurationError("no initial condition: set link, components or snapshot")
    return RelaxationState.from_components(comps, scheme=cfg.scheme, rho=cfg.rho, mu=cfg.mu,
                                           smoothing=cfg.smoothing)


def run(cfg: RunConfig, state: RelaxationState | None = None, progress=None) -> RunResult:
    """
    Integrate from the configured initial condition to ``t_end``.

    The step is ``stable_dt`` (clipped to land on ``t_end``). A step that
    would raise the total energy above the lowest value seen so far by more
    than ``1e-10 E0`` is rejected and retried with half the step, so the
    recorded energies are monotone. Records are taken at the start, every
    ``record_every`` accepted steps and at the end. A non-finite state or an
    unrecoverable energy increase stops the run; the partial series and the
    last good state are returned with ``aborted=True``.
    """
    t_wall = _time.perf_counter()
    s = state if state is not None else initial_state(cfg)
    s0 = s
    series = [record(s)]
    E0 = s.total_energy()
    E_floor = E0
    tol = 1e-10 * max(E0, 1e-300)
    t_end = s.t + cfg.t_end if state is None and cfg.snapshot is not None else cfg.t_end
    advance = _advance_moffatt if s.scheme == "moffatt" else _advance_vallis
    steps = rejected = 0
    aborted, reason = False, ""
    if cfg.snapshot_dir is not None:
        _write_snap(cfg.snapshot_dir, "initial", s)

    while s.t < t_end * (1 - 1e-14):
        if steps >= cfg.max_steps:
            aborted, reason = True, f"max_steps={cfg.max_steps} reached at t={s.t:.6g}"
            break
        if cfg.wall_limit is not None and _time.perf_counter() - t_wall > cfg.wall_limit:
            aborted, reason = True, f"wall-time limit reached at t={s.t:.6g}"
            break
        dt = min(stable_dt(s, cfg.cfl), t_end - s.t)
        new = None
        for _ in range(30):
            try:
                cand = advance(s, dt)
            except NonFiniteFieldError as exc:
                aborted, reason = True, str(exc)
                break
            E = cand.total_energy()
            if E <= E_floor + tol:
                new = cand
                break
            rejected += 1
            log.debug("energy rose by %.3e at t=%.6g, halving dt", E - E_floor, s.t)
            dt *= 0.5
        if aborted:
            break
        if new is None:
            aborted = True
            reason = str(InvariantViolation("energy monotonicity", f"no decreasing step found at t={s.t:.6g}"))
            break
        s = new
        E_floor = min(E_floor, E)
        steps += 1
        at_end = not s.t < t_end * (1 - 1e-14)
        if steps % cfg.record_every == 0 or at_end:
            series.append(record(s))
            if progress is not None:
                progress(series[-1], steps)

    if aborted and series[-1].t != s.t:
        series.append(record(s))
    if cfg.snapshot_dir is not None:
        _write_snap(cfg.snapshot_dir, "final", s)
    return RunResult(series, s, s0, steps, aborted, reason, rejected, _time.perf_counter() - t_wall)


def _write_snap(directory, tag, s):
    from .snapshot import write_state_snapshot

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_state_snapshot(d / f"{tag}.snap", s)


def dissipation_rate(s: RelaxationState) -> float:
    """
    Predicted ``d(E_mag + E_kin)/dt``: ``-2 mu int |curl v|^2`` for moffatt,
    ``-2 mu <v, S^-1 v>`` for vallis.
    """
    ops = s.grid.ops
    if s.scheme == "moffatt":
        w = ops.curl_hat(s.v_hat)
        return -2 * s.mu * ops.inner_hat(w, w)
    v = s.v_hat
    return -2 * s.mu * ops.inner_hat(v, v * (1 + s.smoothing**2 * ops.k2))


def measure_dissipation(s: RelaxationState, interval: float, dt: float) -> tuple[float, float]:
    """
    Compare the measured and predicted energy decay over ``interval``.

    Integrates with the fixed step ``dt`` (``interval / dt`` must be an
    integer) and returns ``(measured, predicted)`` mean rates: the energy
    change divided by ``interval`` and the trapezoidal time average of
    :func:`dissipation_rate` at the step points.
    """
    nsteps = int(round(interval / dt))
    if nsteps < 1 or abs(nsteps * dt - interval) > 1e-9 * interval:
        raise ValueError("interval must be a whole number of steps")
    advance = _advance_moffatt if s.scheme == "moffatt" else _advance_vallis
    E_start = s.total_energy()
    rates = [dissipation_rate(s)]
    cur = s
    for _ in range(nsteps):
        cur = advance(cur, dt)
        rates.append(dissipation_rate(cur))
    measured = (cur.total_energy() - E_start) / interval
    predicted = float(trapezoid(rates, dx=dt)) / interval
    return measured, predicted


# post-run certification -----------------------------------------------------

ENERGY_TOL = 1e-10
HELICITY_DRIFT_TOL = 1e-3
COMPONENT_DRIFT_TOL = 1e-2
DIV_TOL = 1e-8


def _group_cross(rec: DiagnosticsRecord) -> float:
    """Sum of |H(B_i, B_j)| over component pairs from different groups."""
    where = {lab: gi for gi, grp in enumerate(rec.groups) for lab in grp}
    tot = 0.0
    for i, a in enumerate(rec.labels):
        for j in range(i + 1, len(rec.labels)):
            if where.get(a) != where.get(rec.labels[j]):
                tot += abs(rec.H_cross[i, j])
    return tot


def floor_certified(rec: DiagnosticsRecord, E0: float) -> bool:
    """The group floor holds while cross-helicity between groups stays below ``1e-2 E0``."""
    return _group_cross(rec) < 1e-2 * E0


def linked_floor(rec: DiagnosticsRecord) -> float:
    """``lambda1 * sum |H_group|`` over groups with more than one component."""
    return rec.lambda1 * sum(
        abs(h) for h, grp in zip(rec.H_group, rec.groups) if len(grp) > 1
    )


def run_invariants(result: RunResult) -> list[InvariantViolation]:
    """
    Re-check a finished run against the invariants it must satisfy:

    * total energy nonincreasing across records to ``1e-10 E0``;
    * ``E_mag >= lambda1 |H_total| - 1e-10 E0`` at every record;
    * ``E_mag >= arnold_lhs - 1e-10 E0`` at every record where the group
      floor is certified;
    * helicity drift ``<= 1e-3 E0``, component and cross-helicity drift
      ``<= 1e-2 E0``;
    * divergence residuals ``<= 1e-8``;
    * final ``E_mag`` not below the Woltjer minimum for ``H_total(0)``;
    * the run reached ``t_end`` without aborting.
    """
    out = []
    series = result.series
    first = series[0]
    E0 = first.E_total
    tol = ENERGY_TOL * max(E0, 1e-300)
    lowest = E0
    for rec in series:
        if rec.E_total > lowest + tol:
            out.append(InvariantViolation("energy monotonicity",
                                          f"E={rec.E_total!r} above earlier {lowest!r} at t={rec.t:.6g}"))
            break
        lowest = min(lowest, rec.E_total)
    for rec in series:
        if rec.E_mag < rec.lambda1 * abs(rec.H_total) - tol:
            out.append(InvariantViolation("arnold bound", f"E_mag={rec.E_mag:.6g} at t={rec.t:.6g}"))
            break
    for rec in series:
        if floor_certified(rec, E0) and rec.E_mag < rec.arnold_lhs - tol:
            out.append(InvariantViolation("subhelicity floor",
                                          f"E_mag={rec.E_mag:.6g} < {rec.arnold_lhs:.6g} at t={rec.t:.6g}"))
            break
    H0 = first.H_total
    Hx0 = first.H_cross
    for rec in series:
        if abs(rec.H_total - H0) > HELICITY_DRIFT_TOL * E0:
            out.append(InvariantViolation("helicity conservation",
                                          f"drift {rec.H_total - H0:.3e} at t={rec.t:.6g}"))
            break
    for rec in series:
        d = np.max(np.abs(rec.H_cross - Hx0))
        if d > COMPONENT_DRIFT_TOL * E0:
            out.append(InvariantViolation("component helicity conservation",
                                          f"drift {d:.3e} at t={rec.t:.6g}"))
            break
    for rec in series:
        if rec.max_div_residual > DIV_TOL:
            out.append(InvariantViolation("solenoidality",
                                          f"residual {rec.max_div_residual:.3e} at t={rec.t:.6g}"))
            break
    last = series[-1]
    if last.E_mag < last.lambda1 * abs(H0) - 1e-6:
        out.append(InvariantViolation("woltjer floor", f"final E_mag={last.E_mag:.6g}"))
    if result.aborted:
        out.append(InvariantViolation("run aborted", result.reason))
    return out
