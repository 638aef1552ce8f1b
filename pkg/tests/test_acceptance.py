"""
Acceptance criteria, one test per criterion.

Each test prints a ``criterion N PASS/FAIL`` line (also collected in the
terminal summary). The three relaxation runs are module fixtures shared by
criteria 5 to 9:

* Hopf pair, vallis, n = 64, t_end = 5 (through the same code path as
  ``toporelax hopf-pair --n 64 --scheme vallis --t-end 5``);
* Hopf pair, moffatt, n = 64, about 100 steps, followed by the dt-halving
  dissipation check;
* single writhe-compensated ring, vallis, n = 64, t_end = 5.
"""

import time

import numpy as np
import pytest

from acceptance_log import criterion
from toporelax.cli import hopf_pair_experiment, relax_experiment
from toporelax.diagnostics import cross_helicity, energy, helicity
from toporelax.links import gauss_linking, hopf_pair_config, single_ring_config
from toporelax.modeled import build_link_field, flux_through_disk
from toporelax.relaxation import RunConfig, measure_dissipation, run_invariants, stable_dt
from toporelax.snapshot import snapshot_roundtrip
from toporelax.spectral import Grid3, divergence_residual
from toporelax.woltjer import beltrami_residual, constrained_descent, mixed_start, woltjer_minimizer

PAIRS = (("T1+", "T2+"), ("T1-", "T2-"))
MOFFATT_T_END = 0.065


# shared runs -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def vallis_hopf(tmp_path_factory):
    out = tmp_path_factory.mktemp("hopf_vallis")
    t0 = time.perf_counter()
    result, violations, line = hopf_pair_experiment(n=64, scheme="vallis", t_end=5.0, out=out,
                                                    record_every=5, plot=True)
    return result, violations, line, out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def moffatt_hopf(tmp_path_factory):
    out = tmp_path_factory.mktemp("hopf_moffatt")
    t0 = time.perf_counter()
    result, violations, line = hopf_pair_experiment(n=64, scheme="moffatt", t_end=MOFFATT_T_END,
                                                    out=out, record_every=5)
    s = result.final
    dt = stable_dt(s)
    errs = []
    for k in (1, 2, 4):
        measured, predicted = measure_dissipation(s, 4 * dt, dt / k)
        errs.append(abs(measured / predicted - 1))
    return result, violations, errs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def vallis_ring(tmp_path_factory):
    out = tmp_path_factory.mktemp("ring_vallis")
    cfg = RunConfig(scheme="vallis", t_end=5.0, n=64)
    cfg.link = single_ring_config()
    result, violations, line = relax_experiment(cfg, out)
    return result, violations


def _drifts(result):
    first = result.series[0]
    E0 = first.E_total
    dH = max(abs(r.H_total - first.H_total) for r in result.series) / E0
    dX = max(np.max(np.abs(r.H_cross - first.H_cross)) for r in result.series) / E0
    return dH, dX


def _energy_rise(result):
    """Largest increase of total energy between records, relative to E0."""
    E = np.array([r.E_total for r in result.series])
    return float(np.max(np.diff(E))) / E[0] if len(E) > 1 else 0.0


def _arnold_slack(result):
    """Smallest ``(E_mag - lambda1 |H_total|) / E0`` over all records."""
    E0 = result.series[0].E_total
    return min((r.E_mag - r.lambda1 * abs(r.H_total)) / E0 for r in result.series)


# modeled-field measurements -----------------------------------------------------------

def _linking_errors(m):
    cfg = hopf_pair_config(m=m)
    cur = dict(zip(cfg.labels, (t.curve for t in cfg.tubes)))
    lk = [gauss_linking(cur["T1+"], cur["T2+"]), gauss_linking(cur["T1-"], cur["T2-"])]
    cross = [gauss_linking(cur[a], cur[b]) for a in PAIRS[0] for b in PAIRS[1]]
    return {"linked": max(abs(lk[0] - 1), abs(lk[1] + 1)), "unlinked": max(abs(c) for c in cross)}


def _field_errors(n, m=512):
    g = Grid3(n)
    cfg = hopf_pair_config(m=m, g=g)
    F = build_link_field(cfg, g)
    lab = cfg.labels
    return {
        "flux": max(abs(flux_through_disk(F[a], t) - 1) for a, t in zip(lab, cfg.tubes)),
        "self": max(abs(helicity(F[a])) / energy(F[a]) for a in lab),
        "cross": max(abs(cross_helicity(F["T1+"], F["T2+"]) - 1), abs(cross_helicity(F["T1-"], F["T2-"]) + 1),
                     *(abs(cross_helicity(F[a], F[b])) for a in PAIRS[0] for b in PAIRS[1])),
        "total": abs(helicity(F.total())),
        "sub": max(abs(helicity(F.group_field(PAIRS[0])) - 2), abs(helicity(F.group_field(PAIRS[1])) + 2)),
        "div": max(divergence_residual(F[a]) for a in lab),
    }


FIELD_TOL = {"flux": 1e-3, "self": 2e-3, "cross": 2e-2, "total": 4e-2, "sub": 4e-2, "div": 1e-10}


def _fmt(errs):
    return ", ".join(f"{k}={v:.2e}" for k, v in errs.items())


# criteria ----------------------------------------------------------------------------

@criterion(1, "linking numbers of the Hopf pair")
def test_criterion_1_linking_numbers():
    t0 = time.perf_counter()
    errs = _linking_errors(512)
    elapsed = time.perf_counter() - t0
    assert errs["linked"] <= 1e-4, errs
    assert errs["unlinked"] <= 1e-4, errs
    assert elapsed < 5.0
    return f"{_fmt(errs)}, {elapsed:.2f}s"


@criterion(2, "modeled-field identities at n=64")
def test_criterion_2_modeled_field_identities():
    t0 = time.perf_counter()
    errs = _field_errors(64)
    elapsed = time.perf_counter() - t0
    for k, tol in FIELD_TOL.items():
        assert errs[k] <= tol, f"{k}: {errs[k]:.3e} > {tol}"
    assert elapsed < 120.0
    return f"{_fmt(errs)}, {elapsed:.1f}s"


@criterion(3, "convergence ladder n=64 -> n=128 within halved tolerances")
def test_criterion_3_convergence_ladder():
    lk = _linking_errors(1024)
    for k, v in lk.items():
        assert v <= 0.5e-4, f"linking {k}: {v:.3e}"
    errs = _field_errors(128, m=1024)
    for k, tol in FIELD_TOL.items():
        assert errs[k] <= tol / 2, f"{k}: {errs[k]:.3e} > {tol / 2}"
    return f"{_fmt(lk)}, {_fmt(errs)}"


@criterion(4, "Woltjer solver")
def test_criterion_4_woltjer():
    t0 = time.perf_counter()
    g = Grid3(32)
    sol = woltjer_minimizer(1.0, g)
    assert sol.lam == pytest.approx(1.0, abs=1e-12)
    assert sol.E == pytest.approx(1.0, abs=1e-10)
    assert energy(sol.field) == pytest.approx(1.0, abs=1e-10)
    assert helicity(sol.field) == pytest.approx(1.0, abs=1e-10)
    res_closed = beltrami_residual(sol.field, sol.lam)
    assert res_closed <= 1e-10
    res = constrained_descent(mixed_start(1.0, g), 1.0)
    dE = energy(res.field) - sol.E
    assert res.converged and abs(dE) <= 1e-6
    zero = woltjer_minimizer(0.0, g)
    assert zero.E == 0.0 and zero.field.max_abs() == 0.0
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    return f"residual={res_closed:.1e}, descent dE={dE:.1e} in {res.steps} steps, {elapsed:.1f}s"


@criterion(5, "energy monotonicity and the viscous dissipation law")
def test_criterion_5_energy_monotonicity(vallis_hopf, moffatt_hopf):
    result, _, _, _, wall = vallis_hopf
    mres, _, errs, mwall = moffatt_hopf
    assert not result.aborted and result.final.t == pytest.approx(5.0)
    rise = _energy_rise(result)
    assert rise <= 1e-10
    mrise = _energy_rise(mres)
    assert mrise <= 1e-10
    assert errs[-1] <= 5e-2
    assert errs[2] <= errs[1] <= errs[0]
    assert wall + mwall < 15 * 60
    return (f"vallis max rise {rise:.1e} over {len(result.series)} records ({result.rejected} rejected steps), "
            f"moffatt max rise {mrise:.1e} ({mres.rejected} rejected); dissipation error {errs[0]:.1e}, {errs[1]:.1e}, {errs[2]:.1e} "
            f"at dt, dt/2, dt/4; {wall + mwall:.0f}s")


@criterion(6, "ideal invariants over the Hopf-pair runs")
def test_criterion_6_ideal_invariants(vallis_hopf, moffatt_hopf):
    out = []
    for name, res in (("vallis", vallis_hopf[0]), ("moffatt", moffatt_hopf[0])):
        dH, dX = _drifts(res)
        assert dH <= 1e-3, f"{name} helicity drift {dH:.3e}"
        assert dX <= 1e-2, f"{name} component drift {dX:.3e}"
        out.append(f"{name} ({res.steps} steps) dH={dH:.1e} dHcross={dX:.1e}")
    return ", ".join(out)


@criterion(7, "gap between the relaxed Hopf pair and the Woltjer minimum")
def test_criterion_7_gap(vallis_hopf):
    result, violations, line, out, _ = vallis_hopf
    assert violations == []
    last = result.series[-1]
    floor = last.lambda1 * sum(abs(h) for h in result.series[0].H_group)
    wE = woltjer_minimizer(0.0, result.initial.grid).E
    assert wE == 0.0
    assert last.E_mag >= 0.95 * floor
    assert last.E_mag >= 3.8
    assert last.E_mag - wE > 0
    snapshot_roundtrip(out / "final.snap")
    assert line.startswith("final_E=") and "woltjer_E=0," in line
    return line


@criterion(8, "energy-helicity estimate at every record")
def test_criterion_8_arnold_estimate(vallis_hopf, moffatt_hopf, vallis_ring):
    slacks = {name: _arnold_slack(res) for name, res in
              (("hopf-vallis", vallis_hopf[0]), ("hopf-moffatt", moffatt_hopf[0]), ("ring", vallis_ring[0]))}
    for name, s in slacks.items():
        assert s >= -1e-10, f"{name}: {s:.3e}"
    return ", ".join(f"{k} min slack {v:.3g}" for k, v in slacks.items())


@criterion(9, "control: unlinked ring relaxes")
def test_criterion_9_control_ring(vallis_ring):
    result, violations = vallis_ring
    assert violations == []
    E0, E1 = result.series[0].E_mag, result.series[-1].E_mag
    loss = 1 - E1 / E0
    assert loss >= 0.2
    return f"E_mag {E0:.3f} -> {E1:.3f} (loss {100 * loss:.1f}%)"
