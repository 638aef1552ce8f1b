"""
toporelax: a numerical laboratory for topological magnetic relaxation.

Build divergence-free fields on linked flux tubes, measure their helicities
and linking numbers, solve Woltjer's problem on the periodic box and relax
fields with dynamics that decrease energy while freezing in field-line
topology.

Conventions used throughout: ``E(B) = int |B|^2`` (no factor 1/2) and the
bilinear helicity ``H(B1, B2) = int B1 . A2`` with the Coulomb-gauge
potential, so that two linked unit-flux tubes carry ``H = 2 lk``.
"""

from .diagnostics import (
    DiagnosticsRecord,
    arnold_gap,
    cross_helicity,
    energy,
    helicity,
    read_series_csv,
    record,
    write_series_csv,
)
from .errors import (
    ConfigurationError,
    CorruptSnapshotError,
    GridMismatchError,
    GridTooCoarseError,
    InvariantViolation,
    NonFiniteFieldError,
    TimeStepTooLarge,
)
from .links import (
    ClosedCurve,
    CurveFormatError,
    LinkConfig,
    TubeSpec,
    gauss_linking,
    hopf_pair_config,
    linked_groups,
    load_curve_csv,
    make_circle,
    single_ring_config,
    validate_config,
    writhe,
)
from .modeled import ComponentFields, build_link_field, build_tube_field, flux_through_disk
from .relaxation import (
    RelaxationState,
    RunConfig,
    RunResult,
    lorentz_force,
    measure_dissipation,
    run,
    run_invariants,
    stable_dt,
    step_moffatt,
    step_vallis,
)
from .snapshot import Snapshot, read_snapshot, snapshot_roundtrip, write_snapshot
from .spectral import (
    Grid3,
    VectorField,
    curl,
    divergence,
    l2_inner,
    leray_project,
    vector_potential,
)
from .woltjer import (
    DescentOptions,
    WoltjerSolution,
    beltrami_residual,
    constrained_descent,
    helical_decompose,
    woltjer_minimizer,
)

__version__ = "0.1.0"
