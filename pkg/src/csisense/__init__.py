"""Wi-Fi CSI sensing toolkit: data model, simulation, preprocessing, features and SSL."""
from .core import CsiTensor, load, read_csit, save, write_csit
from .errors import CsiSenseError, FormatError, NumericalError, ValidationError

__version__ = "0.1.0"
