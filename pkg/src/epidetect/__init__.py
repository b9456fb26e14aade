"""epidetect: prospective outbreak detection for surveillance count data.

Univariate (EARS, Farrington), multivariate (Hotelling T2 + CUSUM),
spatio-temporal scan statistics (conditional Poisson, space-time
permutation, expectation-based Poisson, linear-time subset scanning,
Bayesian gamma-Poisson scan) and a Shiryaev-Roberts point-process change
detector, with Monte Carlo hypothesis testing throughout.
"""

__version__ = "0.1.0"

from .bayes import (GammaPrior, OutbreakPriors, PosteriorResult, bayes_scan,
                    elicit_window_prior, negbin_log_marginal)
from .data import (AlarmRecord, CountPanel, CountSeries, EventStream,
                   StudyGeometry, aggregate, ingest_count_panel,
                   ingest_events, ingest_geometry)
from .evaluation import (PlantedOutbreak, SimScenario, evaluate, simulate,
                         simulate_events)
from .glm import (GlmFit, PredictiveInterval, fit_quasipoisson, predict_upper)
from .multivariate import (CusumState, MvBaseline, crosier_cusum,
                           hotelling_run, hotelling_t2)
from .pointproc import SrCluster, SrConfig, SrState, sr_run, sr_update
from .scan import (LtssResult, MonteCarloConfig, ReplicatePool, ScanResult,
                   WindowAggregate, eb_poisson_log_lr,
                   estimate_baselines_history, estimate_baselines_permutation,
                   estimate_baselines_population, gumbel_pvalue,
                   kulldorff_log_lr, ltss_scan, pooled_pvalue,
                   scan_eb_poisson, scan_permutation,
                   scan_poisson_conditional)
from .univariate import (EarsConfig, FarringtonConfig, HarmonicModelConfig,
                         ears, farrington, harmonic_mean_model,
                         stroup_history)
from .zones import (SpaceTimeWindow, Zone, flexible_zones, knn_zones,
                    population_capped_zones, windows)

__all__ = [name for name in dir() if not name.startswith("_")]
