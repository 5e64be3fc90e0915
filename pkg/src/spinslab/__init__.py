"""spinslab: dipolar spin-ensemble statistics, spectra, and sensing budgets.

Simulation and analysis toolkit for dense electron-spin layers in oriented
crystal slabs: dipolar coupling statistics and configurational averages,
Monte Carlo mean-field sampling, probe lineshape synthesis, pulsed
decoupling dynamics, sensitivity budgets, magnetic dipole imaging, and
depth-profile ingestion, tied together by seeded named pipelines.
"""

from ._version import __version__
from .dipolar import (
    MAGIC_001,
    NORMAL_111,
    DipolarCoupling,
    EnsembleGeometry,
    GeometryKind,
    SpinAxis,
    angular_factor,
    configurational_average,
    coupling,
    monte_carlo_average,
)
from .errors import (
    AnalysisError,
    ConfigurationError,
    ConversionError,
    DomainError,
    FitError,
    InputError,
    NormalizationError,
    NumericalError,
    ParseError,
    ResolutionError,
    SpinslabError,
)
from .imaging import (
    FieldMap,
    MagneticDipole,
    SensorPlane,
    extract_contours,
    field_map,
    particle_moment,
    quench_mask,
)
from .profiles import (
    DepthProfile,
    PeakMetrics,
    TrendDataset,
    convert_units,
    parse_profile,
    peak_metrics,
    weighted_linreg,
)
from .pulses import (
    FrequencyComb,
    PulseSchedule,
    average_hamiltonian,
    coherence_model,
    density_from_t2,
    exact_small_n_oracle,
    fit_stretch,
    frequency_comb,
    t2_from_density,
    toggling_coefficients,
)
from .sampler import (
    InitializationModel,
    MeanFieldHistogram,
    SlabEnsemble,
    SpinConfiguration,
    mean_field,
    mean_field_histogram,
    mean_field_samples,
    sample_configuration,
)
from .scenarios import SCENARIOS, emit_report, run_scenario
from .sensing import (
    SensitivityBudget,
    convention_report,
    droid_condition,
    eta_echo,
    optimal_tau,
    scaling_report,
    volume_normalized,
)
from .spectrum import (
    BroadeningModel,
    Spectrum,
    asymmetry_beta,
    convolve_lorentzian,
    fit_lorentzian,
    synthesize_spectrum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
