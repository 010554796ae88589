"""Multiple outlier identification for location-scale and shape-scale families.

The package implements a stepwise extreme z-score identification method
driven by robust estimation and extreme value asymptotics, four classical
comparison procedures, and a seeded Monte Carlo harness that measures
masking and swamping behaviour.  A FastAPI service exposes the
functionality; the command line client drives the same API in process.
"""

__version__ = "0.1.0"

from .baselines import (
    DgThresholds,
    RosnerConfig,
    bolshev_classify,
    dg_classify,
    dg_thresholds,
    hawkins_classify,
    rosner_classify,
    rosner_lambdas,
    simulate_baseline_critical,
    thompson_cdf,
)
from .bp import (
    BpConfig,
    bp_classify,
    bp_classify_shape_scale,
    simulate_critical_value_v,
    simulate_exact_critical_value_u,
    u_statistic_left,
    u_statistic_right,
    u_statistic_twosided_symmetric,
)
from .cache import CacheEntry, CacheKey, CriticalValueTable, cache_read, cache_write
from .errors import (
    ConfigError,
    DataError,
    DegenerateSampleError,
    DomainError,
    MissingCriticalValueError,
    OutlierKitError,
)
from .estimators import RobustFit, mean_sd_fit, median, qn_scale, robust_fit, z_scores
from .families import (
    FAMILIES,
    Family,
    NormalizingConstants,
    OutlierRegion,
    chi2_even_cdf,
    chi2_even_sf,
    family_names,
    get_family,
    normalizing_constants,
    outlier_region,
    per_observation_level,
    qn_pair_cdf_constant,
)
from .methods import METHODS, BuiltMethod, build_method
from .report import BpStepRecord, OutlierReport
from .simulation import (
    ContaminationSpec,
    McResult,
    generate_replicate,
    run_experiment,
    significance_curve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
