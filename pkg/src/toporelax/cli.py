"""
Command-line experiment runner
==============================

::

    toporelax hopf-pair --n 64 --scheme vallis --t-end 5 --out runs/hopf
    toporelax woltjer --helicity 1 --descent --out runs/woltjer
    toporelax relax --config my_link.ini --out runs/custom

Exit codes: 0 success, 1 usage, configuration or I/O error, 2 a physical or
numerical invariant was violated (the failing invariant is named on
stderr).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .diagnostics import energy, write_series_csv
from .errors import ConfigurationError, CorruptSnapshotError, GridTooCoarseError, InvariantViolation
from .links import (
    LinkConfig,
    TubeSpec,
    borromean_curves,
    hopf_pair_config,
    load_curve_csv,
    make_circle,
    single_ring_config,
    trefoil,
)
from .plot import write_series_svg
from .relaxation import SCHEMES, RunConfig, RunResult, linked_floor, run, run_invariants
from .snapshot import Snapshot, write_snapshot
from .spectral import Grid3
from .woltjer import DescentOptions, constrained_descent, mixed_start, woltjer_minimizer

log = logging.getLogger(__name__)

__all__ = ["main", "relax_experiment", "hopf_pair_experiment", "gap_summary", "load_run_config"]

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2
DEFAULT_TUBE_RADIUS = 0.25


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# experiments ----------------------------------------------------------------

def gap_summary(result: RunResult) -> tuple[str, dict]:
    """
    The gap report ``final_E=..., woltjer_E=..., floor=...``.

    ``woltjer_E`` is the energy of the Woltjer minimizer at the initial
    total helicity, taken as zero when that helicity is round-off
    (``|H| <= 1e-10 E0``). ``floor`` is ``lambda1 * sum |H(group)|`` over
    linked groups at ``t = 0``.
    """
    first, last = result.series[0], result.series[-1]
    c = first.H_total
    if abs(c) <= 1e-10 * first.E_total:
        c = 0.0
    wE = woltjer_minimizer(c, result.initial.grid).E
    floor = linked_floor(first)
    vals = {"final_E": last.E_mag, "woltjer_E": wE, "floor": floor, "gap": last.E_mag - wE}
    return f"final_E={last.E_mag:.6f}, woltjer_E={wE:.6g}, floor={floor:.6f}", vals


def relax_experiment(cfg: RunConfig, out, plot: bool = False, title: str = ""):
    """
    Run ``cfg`` and write ``series.csv``, ``initial.snap``, ``final.snap``,
    ``summary.txt`` (and ``series.svg`` with ``plot``) into ``out``.

    Returns ``(result, violations, summary_line)``.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.snapshot_dir = out
    result = run(cfg)
    write_series_csv(result.series, out / "series.csv")
    violations = run_invariants(result)
    line, _ = gap_summary(result)
    (out / "summary.txt").write_text(line + "\n")
    if plot:
        write_series_svg(result.series, out / "series.svg", title or f"{cfg.scheme} relaxation")
    return result, violations, line


def _check_tube_resolution(radius: float, n: int, L: float):
    h = L / n
    if radius <= 2 * h:
        raise GridTooCoarseError(
            f"grid too coarse: tube radius {radius:.4g} is thinner than 2 cells (h={h:.4g})"
        )


def hopf_pair_experiment(n: int = 64, scheme: str = "vallis", t_end: float = 5.0, out="toporelax-out",
                         L: float = 2 * np.pi, radius: float = DEFAULT_TUBE_RADIUS, cfl: float = 0.4,
                         record_every: int = 10, rho: float = 1.0, mu: float = 1.0,
                         smoothing: float | None = None, plot: bool = False):
    _check_tube_resolution(radius, n, L)
    cfg = RunConfig(scheme=scheme, t_end=t_end, cfl=cfl, record_every=record_every, n=n, L=L,
                    rho=rho, mu=mu, smoothing=smoothing)
    cfg.link = hopf_pair_config(a=radius, L=L, g=cfg.grid)
    return relax_experiment(cfg, out, plot, "Hopf pair")


# config files ----------------------------------------------------------------

def _floats(text: str, count: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"{what}: expected {count} comma-separated numbers") from None
    if len(vals) != count:
        raise ConfigurationError(f"{what}: expected {count} numbers, got {len(vals)}")
    return vals


def _preset(sec, L: float) -> LinkConfig:
    name = sec.get("preset")
    a = sec.getfloat("radius", DEFAULT_TUBE_RADIUS)
    flux = sec.getfloat("flux", 1.0)
    mid = L / 2
    if name == "hopf-pair":
        return hopf_pair_config(separation=sec.getfloat("separation", math.pi), a=a, flux=flux, L=L)
    if name == "hopf-single":
        return hopf_pair_config(a=a, flux=flux, L=L).subset(["T1+", "T2+"])
    if name == "single-ring":
        return single_ring_config(radius=sec.getfloat("ring_radius", 1.0), a=a, flux=flux, L=L)
    if name == "two-rings":
        sep = sec.getfloat("separation", math.pi)
        r = sec.getfloat("ring_radius", 1.0)
        c1 = make_circle((mid, mid - sep / 2, mid), (0, 0, 1), r)
        c2 = make_circle((mid, mid + sep / 2, mid), (0, 0, 1), r)
        return LinkConfig((TubeSpec(c1, a, flux), TubeSpec(c2, a, flux)), ("R1", "R2"))
    if name == "borromean":
        curves = borromean_curves((mid, mid, mid), sec.getfloat("scale", 2.0))
        return LinkConfig(tuple(TubeSpec(c, a, flux) for c in curves), ("E1", "E2", "E3"))
    raise ConfigurationError(f"unknown link preset {name!r}")


def _tube_from_section(name: str, sec, base: Path) -> TubeSpec:
    m = sec.getint("points", 512)
    keys = [k for k in ("curve", "circle", "trefoil") if k in sec]
    if len(keys) != 1:
        raise ConfigurationError(f"[tube {name}] needs exactly one of curve, circle, trefoil")
    if "curve" in sec:
        path = Path(sec["curve"])
        curve = load_curve_csv(path if path.is_absolute() else base / path)
    elif "circle" in sec:
        cx, cy, cz, nx, ny, nz, r = _floats(sec["circle"], 7, f"[tube {name}] circle")
        curve = make_circle((cx, cy, cz), (nx, ny, nz), r, m)
    else:
        cx, cy, cz, sc = _floats(sec["trefoil"], 4, f"[tube {name}] trefoil")
        curve = trefoil((cx, cy, cz), sc, m)
    twist = sec.get("twist", "auto").strip()
    tw = None if twist == "auto" else float(twist)
    return TubeSpec(curve, sec.getfloat("radius", DEFAULT_TUBE_RADIUS), sec.getfloat("flux", 1.0), tw)


def load_run_config(path) -> RunConfig:
    """
    Read a run configuration from an INI file.

    ``[run]`` holds scheme, t_end, n, L, cfl, record_every, rho, mu,
    smoothing and optionally ``snapshot`` (restart file). The link is either
    ``[link] preset = ...`` or one ``[tube NAME]`` section per tube; see the
    README for every key.
    """
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    if "run" not in cp:
        raise ConfigurationError(f"{path}: missing [run] section")
    r = cp["run"]
    known = {"scheme", "t_end", "n", "l", "cfl", "record_every", "rho", "mu", "smoothing", "snapshot"}
    unknown = set(r.keys()) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown [run] keys {sorted(unknown)}")
    try:
        smoothing = r.get("smoothing")
        kw = dict(
            scheme=r.get("scheme", "vallis"),
            t_end=r.getfloat("t_end", 5.0),
            n=r.getint("n", 64),
            L=r.getfloat("L", 2 * math.pi),
            cfl=r.getfloat("cfl", 0.4),
            record_every=r.getint("record_every", 10),
            rho=r.getfloat("rho", 1.0),
            mu=r.getfloat("mu", 1.0),
            smoothing=None if smoothing is None else float(smoothing),
        )
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    base = path.parent
    snap = r.get("snapshot")
    tubes = [s for s in cp.sections() if s.startswith("tube ")]
    if snap is not None:
        if tubes or "link" in cp:
            raise ConfigurationError(f"{path}: give either a snapshot or a link, not both")
        sp = Path(snap)
        return RunConfig(snapshot=sp if sp.is_absolute() else base / sp, **kw)
    cfg = RunConfig(**kw)
    if "link" in cp and "preset" in cp["link"]:
        if tubes:
            raise ConfigurationError(f"{path}: give either a preset or [tube] sections, not both")
        link = _preset(cp["link"], kw["L"])
    elif tubes:
        specs = [_tube_from_section(s[5:].strip(), cp[s], base) for s in tubes]
        link = LinkConfig(tuple(specs), tuple(s[5:].strip() for s in tubes))
    else:
        raise ConfigurationError(f"{path}: no link given ([link] preset or [tube NAME] sections)")
    for t in link.tubes:
        _check_tube_resolution(t.radius, kw["n"], kw["L"])
    cfg.link = link
    return cfg


# commands --------------------------------------------------------------------

def _report(violations, line) -> int:
    print(line)
    if violations:
        for v in violations:
            print(f"invariant violated: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_hopf_pair(args) -> int:
    _, violations, line = hopf_pair_experiment(
        n=args.n, scheme=args.scheme, t_end=args.t_end, out=args.out, L=args.L, radius=args.radius,
        cfl=args.cfl, record_every=args.record_every, rho=args.rho, mu=args.mu,
        smoothing=args.smoothing, plot=args.plot,
    )
    return _report(violations, line)


def cmd_relax(args) -> int:
    cfg = load_run_config(args.config)
    _, violations, line = relax_experiment(cfg, args.out, args.plot, Path(args.config).stem)
    return _report(violations, line)


def cmd_woltjer(args) -> int:
    g = Grid3(args.n, args.L)
    sol = woltjer_minimizer(args.helicity, g)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(out / "woltjer.snap",
                   Snapshot(g.n, g.L, ("B",), 0.0, {"B": sol.field.data}, extra={"lambda": sol.lam}))
    print(f"lambda={sol.lam:.12g}, E={sol.E:.12g}, H={sol.H:.12g}")
    if args.descent:
        res = constrained_descent(mixed_start(args.helicity, g), args.helicity,
                                  DescentOptions(max_steps=args.max_steps))
        dE = energy(res.field) - sol.E
        print(f"descent_E={energy(res.field):.12g}, steps={res.steps}, "
              f"beltrami_residual={res.beltrami_residual:.3e}, dE={dE:.3e}")
        if not res.converged:
            print(f"invariant violated: {InvariantViolation('descent convergence', 'max_steps reached')}",
                  file=sys.stderr)
            return EXIT_INVARIANT
        if abs(dE) > 1e-6:
            print(f"invariant violated: {InvariantViolation('woltjer minimum', f'dE={dE:.3e}')}",
                  file=sys.stderr)
            return EXIT_INVARIANT
    return EXIT_OK


def _run_flags(p, t_end_default=5.0):
    p.add_argument("--n", type=int, default=64, help="grid points per axis")
    p.add_argument("--L", type=float, default=2 * math.pi, help="box period")
    p.add_argument("--scheme", choices=SCHEMES, default="vallis")
    p.add_argument("--t-end", type=float, default=t_end_default)
    p.add_argument("--cfl", type=float, default=0.4)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--smoothing", type=float, default=None,
                   help="vallis velocity smoothing length (default L/2pi)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="toporelax", description="Topological magnetic relaxation experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    hp = sub.add_parser("hopf-pair", help="relax the field on two oppositely linked Hopf pairs")
    _run_flags(hp)
    hp.add_argument("--radius", type=float, default=DEFAULT_TUBE_RADIUS, help="tube radius")
    hp.add_argument("--out", default="toporelax-out")
    hp.add_argument("--plot", action="store_true", help="also write series.svg")
    hp.set_defaults(func=cmd_hopf_pair)

    wp = sub.add_parser("woltjer", help="closed-form Woltjer minimizer")
    wp.add_argument("--helicity", type=float, required=True)
    wp.add_argument("--n", type=int, default=32)
    wp.add_argument("--L", type=float, default=2 * math.pi)
    wp.add_argument("--out", default="toporelax-out")
    wp.add_argument("--descent", action="store_true", help="cross-check with constrained descent")
    wp.add_argument("--max-steps", type=int, default=20000)
    wp.set_defaults(func=cmd_woltjer)

    rp = sub.add_parser("relax", help="relax a link described by an INI config")
    rp.add_argument("--config", required=True)
    rp.add_argument("--out", default="toporelax-out")
    rp.add_argument("--plot", action="store_true")
    rp.set_defaults(func=cmd_relax)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigurationError, CorruptSnapshotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
