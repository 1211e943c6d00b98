"""Lightweight projective derivative (LWPD) gradient codes and straggler simulations."""

from .assignment import (BlockDesc, GradientBlockLayout, ScatterPlan, assign_data, partition_bounds,
                         partition_gradient, scatter_plan)
from .codebook import (Codebook, CodeParams, DistanceReport, UnsupportedParametersError, analyze_distance,
                       build_code, build_LR, build_X, char_value, check_coverage, find_displacement,
                       projective_distance, weight_distribution)
from .config import ConfigError, ExperimentConfig, load_config, save_config
from .learner import (CodedTaskResult, Dataset, Model, block_gradient, coded_task, eval_accuracy, eval_loss,
                      gen_mixture, init_model)
from .metrics import MetricsRecord
from .simulator import DelayModel, DelayTape, run, run_centralized, run_gc, run_kac, run_lwpd, sample_delay

__version__ = "0.1.0"
