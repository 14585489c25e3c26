"""Deterministic federated-learning simulation engine.

Core pieces: layered parameter arithmetic, seeded path-keyed randomness,
synthetic heterogeneous federations, budgeted local SGD with update clipping,
seven server optimizers with learning-rate scaling, cohort-size schedules,
training diagnostics, and a shifted-exponential straggler runtime overlay.
"""

from .backend import BACKEND_NAME
from .client import (ClientUpdate, LocalBudget, TrainingDivergedError, clip_update,
                     compute_update, examples_this_client, local_train)
from .config import (ConfigError, DataConfig, ExperimentConfig, SweepSpec, parse_config,
                     parse_sweep, serialize_config)
from .data import (ClientDataset, DatasetFormatError, FederatedDataset, SyntheticDataSpec,
                   generate_synthetic, load_dataset, save_dataset)
from .diagnostics import (RoundMetrics, accuracy_percentiles, avg_cosine_similarity,
                          detect_catastrophic, predicted_norm, rounds_to_threshold)
from .loop import (ClipConfig, CohortSchedule, RunResult, ServerState, cohort_size_at,
                   initial_state, run_experiment, run_round, sample_cohort, update_clip_level)
from .models import ModelSpec, evaluate, global_objective, init_params, loss_and_grad
from .params import (LayeredParams, NonFiniteError, ShapeMismatchError, axpy, check_finite,
                     dot, l2_norm, layer_norms, scale, subtract, zeros_like)
from .rng import client_tag, derive_stream
from .server import (LrScalingConfig, OptimizerSlots, ServerOptConfig, aggregate,
                     scaled_server_lr, server_step)
from .straggler import StragglerConfig, client_runtime, relative_time_to_accuracy, round_runtime

__version__ = "0.1.0"
