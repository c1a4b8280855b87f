from .constellation import Constellation, ConstellationError, excess_kurtosis, square_qam
from .formats import ChannelFormats
from .gmi import GaussHermite, GmiCurve, MonteCarlo, PrecisionError, gmi, gmi_with_error, ngmi
from .rates import RateAssignment, gmi_bound, select_code_rates, throughput
from .shaping import shape_constellation

__all__ = [
    "ChannelFormats",
    "Constellation",
    "ConstellationError",
    "GaussHermite",
    "GmiCurve",
    "MonteCarlo",
    "PrecisionError",
    "RateAssignment",
    "excess_kurtosis",
    "gmi",
    "gmi_bound",
    "gmi_with_error",
    "ngmi",
    "select_code_rates",
    "shape_constellation",
    "square_qam",
    "throughput",
]
