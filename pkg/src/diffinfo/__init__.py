"""Information decomposition for denoising models.

Exact negative log-likelihoods, pointwise and average (conditional) mutual
information, per-dimension information heatmaps, and probability-flow
encode/decode/intervention, all driven by a pluggable noise-prediction
interface and verified against closed-form Gaussian and mixture oracles.
"""

from .channel import LogSnr, LogSnrSampler, NoisySample, corrupt, noise_weight, signal_weight
from .checkpoint import load_checkpoint, save_checkpoint
from .denoise import (
    ConditionId,
    Denoiser,
    GmmDenoiser,
    GmmSpec,
    Sample,
    ZeroDenoiser,
    gaussian_mmse,
    gmm_mmse,
)
from .estimators import (
    InfoReport,
    aggregate_reports,
    cmi,
    mi,
    nll,
    pointwise_dataset,
    pointwise_o,
    pointwise_s,
)
from .flow import (
    InterventionResult,
    SolverConfig,
    SolverError,
    Trajectory,
    decode,
    encode,
    flow_velocity,
    intervene,
)
from .mlp import MlpDenoiser, MlpTrainConfig, TrainingDivergedError, train_mlp
from .oracle import (
    OracleResult,
    QuadratureError,
    component_responsibilities,
    gaussian_mi,
    gaussian_pointwise,
    gmm_mi_numeric,
    mmse_gaussian,
)
from .tasks import (
    HeatmapEval,
    RankingSample,
    RankingTask,
    RankResult,
    evaluate_ranking,
    intervention_correlation,
    iou,
    pixelwise_intervention_correlation,
    rank_conditions,
    segment_from_heatmap,
    sweep_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "ConditionId",
    "Denoiser",
    "GmmDenoiser",
    "GmmSpec",
    "HeatmapEval",
    "InfoReport",
    "InterventionResult",
    "LogSnr",
    "LogSnrSampler",
    "MlpDenoiser",
    "MlpTrainConfig",
    "NoisySample",
    "OracleResult",
    "QuadratureError",
    "RankResult",
    "RankingSample",
    "RankingTask",
    "Sample",
    "SolverConfig",
    "SolverError",
    "Trajectory",
    "TrainingDivergedError",
    "ZeroDenoiser",
    "aggregate_reports",
    "cmi",
    "component_responsibilities",
    "corrupt",
    "decode",
    "encode",
    "evaluate_ranking",
    "flow_velocity",
    "gaussian_mi",
    "gaussian_mmse",
    "gaussian_pointwise",
    "gmm_mi_numeric",
    "gmm_mmse",
    "intervene",
    "intervention_correlation",
    "iou",
    "load_checkpoint",
    "mi",
    "mmse_gaussian",
    "nll",
    "noise_weight",
    "pixelwise_intervention_correlation",
    "pointwise_dataset",
    "pointwise_o",
    "pointwise_s",
    "rank_conditions",
    "save_checkpoint",
    "segment_from_heatmap",
    "signal_weight",
    "sweep_threshold",
    "train_mlp",
]
