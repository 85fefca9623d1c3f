"""Partial functional prediction for functional time series.

Predict the unobserved remainder of a partially observed curve by combining
a full-curve functional autoregression with an intraday regression trained
on sliding-window prediction residuals, with data-driven order and dimension
selection, an AR correction for rough measurement error, and bootstrap
prediction bands.
"""

from .arma import ArModel, fit_ar, forecast_ar
from .bootstrap import (BootstrapBands, averaged_score, bootstrap_bands,
                        interval_score, mean_width)
from .far import (FarModel, ResidualSet, ffpe_ts, fit_far, predict_curve,
                  predict_scores, select_order, sliding_residuals)
from .ffr import (FfrModel, ffpe_joint, ffpe_r, fit_ffr, kernel_surface,
                  predict_ffr, select_dims)
from .fpca import EigenSystem, fpca, fve_dimension, reconstruct
from .funkdata import (BasisSystem, DiscreteSample, FunctionalSeries, Grid,
                       NumericalError, bspline_basis, center, fourier_basis,
                       inner_product, make_grid, nodal_basis, read_csv,
                       restrict, smooth, split_at, sqrt_transform, write_csv)
from .model import (PfpModel, PfpPrediction, moving_block_predict, pfp_fit,
                    pfp_predict, pfp_predict_noisy)
from .simlab import (BandConfig, EvaluationReport, NoiseConfig, SimConfig,
                     add_ar1_error, gen_operator, mipe, pmse, run_band_protocol,
                     run_joint_protocol, run_noisy_protocol, run_protocol,
                     run_table, simulate_far)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
