"""Twin-image photon-pair simulation and EPR correlation analysis."""

__version__ = "0.1.0"

from .biphoton import (
    EPR_REGIME_FACTOR,
    HEISENBERG_BOUND,
    BiphotonParams,
    EprPrediction,
    EprRegimeError,
    EprVerdict,
    epr_verdict,
    predict,
    wavefunction_momentum,
    wavefunction_position,
)
from .sampling import (
    MomentReport,
    PairEvent,
    PairEvents,
    PlaneKind,
    SourceConfig,
    frame_rng,
    marginal_check,
    pair_widths,
    sample_frame_pairs,
)
from .camera import (
    BinaryFrameStack,
    CameraNoise,
    FrameStack,
    OpticalGeometry,
    expose,
    expose_frame,
    illuminated_roi,
    mean_fluence,
    project,
    threshold,
)
from .correlation import (
    AxisVariances,
    CorrelationMap,
    CountStack,
    EprProducts,
    NoSignificantPeakError,
    PeakFit,
    PeakNarrowerThanPixelError,
    SnrResult,
    SubShotNoise,
    background_correct,
    cross_correlate,
    epr_products,
    fit_peak,
    group_pixels,
    snr_curve,
    sub_shot_noise,
    variances_from_fit,
)
from .analysis import AnalyzeOptions, EprReport, analyze_plane, analyze_stacks
from .runconfig import (
    ConfigError,
    RunConfig,
    config_digest,
    default_config,
    default_params,
    echo_config,
    load_config,
    parse_config,
)
from .framefile import FrameFileError, read_framefile, write_framefile
from .pipeline import analyze_files, load_pair, simulate_stacks, write_run
from .outputs import (
    read_corr_csv,
    read_report,
    read_snr_csv,
    validate_report,
    write_corr_csv,
    write_report,
    write_snr_csv,
)
