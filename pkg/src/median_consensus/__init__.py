"""Dynamic median consensus over a round-robin scheduled, switching topology."""

__version__ = "0.1.0"

from .analysis import (
    EnsembleStats,
    MedianResult,
    MetricsReport,
    compute_metrics,
    convergence_time,
    ensemble_stats,
    median,
    settling_time,
    steady_state_error,
)
from .engine import (
    EngineOptions,
    Simulation,
    SimulationConfig,
    Trace,
    ensemble_metrics,
    run,
    run_ensemble,
    run_metrics,
    stationarity_residual,
)
from .network import (
    LossModel,
    Schedule,
    Topology,
    build_chain,
    build_complete,
    deliveries,
    neighbor_counts,
)
from .protocol import (
    AgentState,
    ProtocolParams,
    ValidationReport,
    instability_band,
    local_update,
    lyapunov_value,
    validate_params,
)
from .signals import Constant, Sine, Step, Table, evaluate, evaluate_all
