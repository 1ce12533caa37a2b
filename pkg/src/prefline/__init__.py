"""Preference-based Bayesian optimization over random line subspaces."""

from .actions import Action, ActionSpace, ActionStore, exoskeleton_space, unit_space
from .gp import (FeedbackSource, GpConfig, MissingAction, NoConvergence,
                 PreferenceDataset, PreferenceRecord, PriorFactor,
                 SingularCovariance, SingularPrior, UtilityPosterior,
                 build_prior, kernel_matrix, laplace_posterior,
                 log_likelihood, sample_utility, se_kernel, sigmoid_link)
from .lines import DegenerateLine, LineSubspace, discretize_line, random_direction
from .objectives import (DimensionMismatch, ObjectiveKind, ObjectiveSpec,
                         PreferenceSide, SimSubject, evaluate)
from .optimizer import (FeedbackBundle, GridTooLarge, LineOptimizer, Preference,
                        StaleFeedback, run_baseline_grid)
from .experiments import (ExperimentConfig, ExperimentResult, pearson_r_p,
                          run_experiment, run_noise_sweep, run_scaling,
                          visitation_correlation)
from .gait import (CostWeights, DegenerateFeatures, GaitTrajectory,
                   MalformedTrajectory, PreferencePair, dynamic_cost,
                   extract_features, fit_weights, predictive_power,
                   rank_accuracy, simulate_lipm, static_cost)
from .service import create_app, replay_session

__version__ = "0.1.0"
