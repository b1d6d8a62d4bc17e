"""Space-time projection (STP) forecasting of high-dimensional trajectories."""
from .types import (Ensemble, Episode, HorizonSpec, MeanField, STPError, WeightVector,
                    validate_ensemble)
from .preprocess import (SegmentationSpec, center_stationary, center_transient,
                         ensemble_mean, segment_stationary)
from .stp import Prediction, STPModel, fit, predict, predict_ensemble, project
from .metrics import ErrorReport, SpectrumReport, error_report, rmse_step, spectrum_report

__version__ = "0.1.0"
