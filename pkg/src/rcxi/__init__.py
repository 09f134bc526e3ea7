"""rcxi: stochastic recursive state updates and their convergence certificates.

Simulate seeded recursions over parametric map families, measure the
step-to-step tension series, certify eventual contraction and
window-to-window distributional stationarity, cluster tail states into
modular attractors, score annular (torus-like) projected geometry, and
encode/check glyph anchoring against a symbol vocabulary.
"""

from .attractors import (
    AttractorSet,
    DistConvergenceReport,
    LipschitzEstimate,
    Projection,
    ReducibilityReport,
    convergence_test,
    dist_to_attractor,
    estimate_lipschitz,
    find_attractors,
    pca_project,
    symbolic_reducibility,
    torus_score,
)
from .dynamics import (
    MapSpec,
    NoiseSpec,
    RecursiveMap,
    SymbolicInput,
    Trajectory,
    as_state,
    make_generator,
    make_map,
    simulate,
    step,
)
from .glyph import (
    AnchorReport,
    Glyph,
    NearestSymbol,
    Vocab,
    collapse_check,
    default_delta,
    encode_glyph,
    make_gaussian_vocab,
    project_symbolic,
)
from .pipeline import AnalysisConfig, analyze_trajectory
from .tension import (
    MomentBoundReport,
    PersistenceReport,
    TensionTrace,
    moment_bound_check,
    persistence_check,
    stationary_mean_sq,
    suggested_bound,
    tension_series,
)
from .traceio import (
    AnalysisReport,
    Violation,
    emit_report,
    read_report,
    read_trace,
    read_vocab,
    validate_trace,
    write_report,
    write_trace,
    write_vocab,
)

__version__ = "0.1.0"
