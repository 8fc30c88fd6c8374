"""MUSIC-style localization of sparse objects with a compressed-sensing
stability layer, complex BPDN/OMP baselines, and a Monte Carlo harness."""

from . import analysis, forward, harness, music, scene, solvers, spectral
from .analysis import (
    CoherenceReport,
    MarginReport,
    RicEstimate,
    StabilityBudget,
    SubspacePerturbationReport,
    admissible_noise_bound,
    critical_perturbation_ratio,
    gram_floor_bound,
    gram_perturbation_bound,
    margin_lower_bound,
    mutual_coherence,
    nsr_admissible,
    off_support_margin,
    perturbation_budget,
    ric_bruteforce,
    ric_coherence_bound,
    ric_restricted,
    stability_budget,
    subspace_perturbation_report,
)
from .forward import (
    DataMatrix,
    FoldyLaxSystem,
    SensingPair,
    assemble_data,
    exact_green_pair,
    extended_object_data,
    farfield_pair,
    foldy_lax_solve,
    green_function,
    load_matrix,
    save_matrix,
)
from .harness import (
    ExperimentConfig,
    SuccessCurve,
    TrialOutcome,
    recoverable_sparsity,
    run_trial,
    success_curve,
)
from .music import (
    FIXED_THRESHOLD,
    ImagingResult,
    SpectralDecomposition,
    decompose,
    gridless_support,
    imaging_function,
    invert_amplitudes,
    margin_threshold,
    ric_threshold,
    threshold_support,
    top_peaks,
)
from .scene import (
    Grid,
    NoiseSpec,
    SamplingScheme,
    Scene,
    apply_noise,
    build_planar_grid,
    direction_from_square,
    draw_directions,
    draw_scene,
)
from .solvers import (
    BpdnConstants,
    SparseProblem,
    SparseSolution,
    bpdn_error_constants,
    bpdn_solve,
    omp_solve,
    verify_bpdn_bound,
)
from .spectral import (
    CovarianceTriple,
    SignalModel,
    covariance_music,
    exact_covariance,
    empirical_covariance,
    localize_sources,
    make_signal_model,
    synthesize,
)

__version__ = "0.1.0"
