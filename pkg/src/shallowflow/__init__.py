"""Shallow flow matching: start flow-matching inference from a coarse prediction placed on the path."""

from .condot import DEFAULT_PATH, IsotropicGaussian, PathConfig, condot_flow, condot_vf, gaussian_w2, path_marginal_stats
from .data import Dataset, DatasetKind, DatasetSpec, generate_dataset
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateTargetError,
    DimensionError,
    DivergenceError,
    DomainError,
    ShallowFlowError,
    StiffnessError,
)
from .models import ModelConfig, SfmNets, analytic_gaussian_vf, build_nets, cfg_combine
from .ode import SolveResult, SolverKind, integrate_adaptive, integrate_fixed, solve
from .pipeline import SampleConfig, TrainConfig, baseline_sample, sfm_sample, train, train_step
from .transform import build_intermediate, delta_rescale, project_onto_path, theorem1_map

__version__ = "0.1.0"
