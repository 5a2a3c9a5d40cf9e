"""Online forecasting of delayed outcomes through less-delayed proxies."""

from .base import Forecaster
from .core import (
    ConfigError,
    ProblemSpaces,
    RevelationSchedule,
    RoundEvent,
    UsageError,
    ValidationError,
    log_loss,
    validate_prob_vector,
)
from .environment import (
    EventStream,
    FactoredTask,
    ReplayLog,
    TaskParams,
    generate_task,
    load_replay_log,
)
from .estimators import SmoothedCategoricalEstimator, cumulative_drift, drift_bound_rhs
from .harness import (
    Comparator,
    ExperimentConfig,
    decomposition_check,
    delay_sweep,
    fraction_sweep,
    mu_sweep,
    run_experiment,
    run_trial,
)
from .specs import ForecasterSpec
from .tabular import DirectForecaster, FactoredForecaster, OracleForecaster

__version__ = "0.1.0"
