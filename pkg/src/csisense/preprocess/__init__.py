"""Denoising, outlier removal, phase compensation and dimension reduction."""
from .filters import Series, dwt_denoise, ewma, hampel, lof_scores, lowpass, median_filter, moving_average, weighted_ma
from .phase import cpe_compensate, csi_ratio, phase_diff
from .pipeline import PipelineSpec, Stage, run_pipeline
from .reduce import PcaModel, lrf, pca_fit
