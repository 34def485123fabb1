from .analytical import AnalyticalEstimator, analytical_estimate
from .readouts import LinearReadout, LSTMReadout, MLPReadout
from .ridge import ridge_fit

__all__ = ["AnalyticalEstimator", "LSTMReadout", "LinearReadout", "MLPReadout", "analytical_estimate", "ridge_fit"]
