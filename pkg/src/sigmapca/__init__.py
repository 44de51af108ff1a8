"""Single-layer autoencoder toolkit: linear PCA rules, nonlinear PCA with
explicit standard deviations, and linear ICA pipelines."""

__version__ = "0.1.0"

from .constraints import (ConstraintSpec, DegenerateColumnError,
                          OrthogonalizeResult, iteration_eigenvalue_map,
                          orth_reg_grad, orthogonalize, project_unit_columns,
                          weight_norm_map)
from .datasets import (GroundTruthMixing, SignalSpec, extract_patches,
                       gen_bar_images, gen_mixing, gen_points_2d, gen_signals,
                       load_image_folder, mix_sources)
from .estimators import PCA, GradientPCA, LinearICA, SigmaPCA
from .ica import (FastIcaResult, IcaResult, easi_step, fastica,
                  order_by_unmixing_norm, two_layer_nlpca_grad, two_stage_ica,
                  whiten_pca)
from .linalg import (EPS_STD, MomentState, PcaBasis, SvdResult, moment_stats,
                     pca_fit_svd, random_semi_orthogonal, safe_std, svd_thin)
from .linear_rules import (GradResult, WeightingSpec, asymmetric_pca_loss_grad,
                           gha_grad, linear_pca_grad, nested_dropout_grad,
                           nested_mask, sample_nested_index,
                           weighted_subspace_grad, weighted_variance_grad)
from .metrics import (MatchReport, amari_index, match_components, metrics,
                      orth_residual, rotation_angle_error, variance_error)
from .optim import (AdamState, GradCheckReport, SgdState, TrainConfig,
                    TrainingDiverged, grad_check, make_optimizer,
                    optimizer_step, train)
from .sigma_pca import (ForwardCache, NonlinearitySpec, SigmaPcaModel,
                        latent_recon_grad, noncentred_grad, nonlinearity_eval,
                        ordering_term_grad, rica_grad, sigma_pca_forward,
                        sigma_pca_grad, skew_symmetric_grad, sort_components,
                        trainable_sigma_grad, update_statistics)
