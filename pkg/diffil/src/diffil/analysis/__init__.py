"""Post-training analysis: feature mapping, domain probe, curves, traces."""

from diffil.analysis.curves import (
  AGGREGATE_COLUMNS,
  CURVE_COLUMNS,
  aggregate_curves,
  export_curves,
  load_curve,
  plot_curve,
)
from diffil.analysis.features import encode_frames, export_features
from diffil.analysis.mapping import MappingReport, map_features, nearest_neighbors
from diffil.analysis.probe import ProbeResult, domain_probe, probe_frames
from diffil.analysis.traces import (
  TRACE_COLUMNS,
  learner_policy,
  mean_reward_by_step,
  reward_trace,
  reward_traces,
)

__all__ = [
  "AGGREGATE_COLUMNS",
  "CURVE_COLUMNS",
  "TRACE_COLUMNS",
  "MappingReport",
  "ProbeResult",
  "aggregate_curves",
  "domain_probe",
  "encode_frames",
  "export_curves",
  "export_features",
  "learner_policy",
  "load_curve",
  "map_features",
  "mean_reward_by_step",
  "nearest_neighbors",
  "plot_curve",
  "probe_frames",
  "reward_trace",
  "reward_traces",
]
