"""Compressed-sensing ECG recovery with an RBM prior over sparse supports."""

from .dictlearn import (estimate_coeff_variances, estimate_repr_error_variances,
                        extract_support_patterns, ksvd_train, omp_code, omp_codes)
from .evaluation import concatenate, detect_qrs, match_peaks, psim, r_snr, segment
from .rbm import (CDHyperparameters, RbmModel, cd_train, exact_log_partition, free_energy,
                  hidden_probs, prior_log_score, visible_probs)
from .recovery import (build_recovery_model, map_coefficients, omp_recover, rbm_omp_like,
                       reconstruct_signal, support_log_posterior)
from .sensing import (build_noise_model, gen_bernoulli_matrix, measure,
                      quantization_noise_variance)
from .transforms import (SparseCode, SparsifyingModel, dictionary_model, dwt_forward,
                         dwt_inverse, top_k_sparsify, wavelet_model)

__version__ = "0.1.0"
