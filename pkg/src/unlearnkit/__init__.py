"""Closed-form machine unlearning of features and labels.

Trained models are corrected in place by first-order (scaled gradient
difference) or second-order (inverse-curvature) updates, with certification
through gradient-residual budgets, retraining/fine-tuning/sharding/noise
baselines, sharding-coverage analysis, and a canary-exposure pipeline for
measured memorization removal.
"""

from .baselines import (SisaEnsemble, dp_only, fine_tune, retrain,
                        sisa_predict, sisa_train, sisa_unlearn)
from .certification import (CertificationBudget, LipschitzConstants,
                            ResidualReport, certify, effective_epsilon,
                            exp_noise_rate, gradient_residual,
                            logreg_lipschitz_constants, noise_scale_for_budget,
                            residual_bound_first, residual_bound_second)
from .data import (DataPoint, Dataset, PerturbationSet, ReplaceFeatures,
                   ReplaceLabels, RevokeFeatures, build_perturbations,
                   datasets_equal, load_csv, parse_perturbation_spec,
                   scale_to_unit_ball, spec_to_json, split, synth_blobs,
                   synth_classification)
from .errors import (CertificationError, ConvergenceError, DataError,
                     DivergenceError, NothingToUnlearnError,
                     PerturbationError, UnlearnkitError)
from .experiments import (DEFAULT_ALPHABET, ExperimentConfig, ExperimentReport,
                          default_corpus, derive_seed, emit_plotdata,
                          emit_report, label_flip_instance,
                          packaged_scenario_path, packaged_scenarios,
                          revocation_instance, run_canary_rep, run_experiment,
                          run_shard_sweep, run_tabular_rep, write_plot_csv)
from .memorization import (CanaryRemoval, CanarySpec, ExposureReport,
                           calibrate_tau_for_exposure, canary_perturbation,
                           exact_rank, exposure_report, insert_canary,
                           rank_of_string, unlearn_canary)
from .models import (CharContextModel, GradientCounter, LogisticModel,
                     LossConfig, MlpModel, Model, ModelParams, RidgeModel,
                     SoftmaxModel, normalize_text)
from .serialize import build_model, load_model, save_model
from .sharding import (min_points_for_threshold, monte_carlo_all_affected,
                       prob_all_affected)
from .training import NoiseSpec, TrainConfig, sample_noise, train_convex, train_sgd
from .unlearning import (LissaConfig, UpdateResult, default_unlearning_rate,
                         first_order_update, gradient_difference,
                         hessian_norm_estimate, lissa_inverse_hvp,
                         revoke_and_shrink, second_order_update_exact,
                         second_order_update_lissa, sequential_unlearn)

__version__ = "0.1.0"
