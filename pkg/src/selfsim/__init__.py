"""Self-similar packet traces from aggregated Pareto ON/OFF sources."""

from .aggregator import GeneratorConfig, Trace, achieved_bit_rate, generate_trace
from .analysis import (
    BinnedSeries,
    BlockAggregator,
    HurstEstimate,
    VarianceTimeHurst,
    VarianceTimePoint,
    aggregate_series,
    autocorrelation,
    bin_trace,
    fit_slope,
    variance_time_points,
)
from .calibration import (
    CalibrationResult,
    LoadCalibrator,
    calibrate,
    compute_phi,
    feasible_alpha_on_range,
    mean_payload_bytes,
    solve_alpha_off,
)
from .sampling import (
    INFINITE_VARIANCE,
    ParetoParams,
    UniformSource,
    pareto_mean,
    pareto_pdf,
    pareto_variance,
    sample_pareto,
    truncated_mean,
)
from .source_model import FramingConstants, Packet, SourceConfig, emit_source
from .trace_io import TraceFileHeader, read_trace, write_plot_data, write_trace

__version__ = "0.1.0"
