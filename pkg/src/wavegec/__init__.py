"""Wavelet-domain expectation-consistent recovery for undersampled
Fourier measurements, with AMP/EC baselines, statistical diagnostics, and a
dense verification harness for the underlying error analysis."""

from ._kernels import USING_NUMBA
from .baselines import (AmpState, BernoulliGaussianDenoiser, PgdState,
                        PrAdmmState, SeTrace, amp_init, amp_iterate,
                        amp_state_evolution, pnp_pgd_iterate, pr_admm_iterate)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .denoisers import (DenoiserResult, ExternalDenoiser, IdentityDenoiser,
                        LinearShrinkageDenoiser, PrecisionVector,
                        SoftThresholdDenoiser, external_denoise,
                        lambda_from_global, sample_correlated_noise,
                        subband_soft_threshold, sure_lambda)
from .diagnostics import (SubbandErrorReport, psnr, qq_data, ssim,
                          subband_error_report, subband_support_masks,
                          whiteness_score)
from .forward_model import (CoilMaps, ForwardModel, MeasurementSet,
                            SamplingMask, apply_A, apply_AH, apply_B,
                            apply_BH, full_mask, generate_coil_maps,
                            generate_phantom, ground_truth_from_full,
                            make_line_mask, make_point_mask,
                            simulate_measurements)
from .gec import (CgFidelity, DenseFidelity, DgecProblem, EcState, GecState,
                  IterationDiagnostics, SolverConfig, damp, dgec_iterate,
                  ec_iterate, f1_cg, gdiag_from_traces, init_state,
                  mc_subband_trace, run_dgec, subseed)
from .oracle import (build_ec_error_model, ec_recursion_equivalence,
                     epsilon2_covariance_check, epsilon2_from_spectrum,
                     random_orthogonal, weingarten_moment_check)
from .transforms import (SubbandLayout, WaveletPyramid, dft2, dwt2_haar,
                         idft2, idwt2_haar, kspace_center, kspace_uncenter,
                         make_layout)

__version__ = "0.1.0"
