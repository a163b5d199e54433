"""Hybrid CNN-SNN auditory attention decoding.

Subpackages: ``signal`` (DSP), ``dataset`` (synthetic data and windowing),
``neuralcore`` (layers/optimizer), ``adm`` (delta-modulator encoding),
``snn`` (spiking layers and surrogate training), ``pipeline`` (two-phase
training, quantization, footprints), ``cli`` (command line), ``kernels``
(numba/numpy hot kernels).
"""

from . import adm, dataset, kernels, neuralcore, pipeline, signal, snn, tensorio
from .backend import BACKEND, NUMBA_ENABLED
from .errors import (
    ChannelNotFoundError,
    DataError,
    DegenerateInputError,
    ParameterError,
    ShapeError,
    TensorFormatError,
    TrainingError,
)

__version__ = "0.1.0"

__all__ = [
    "adm",
    "dataset",
    "kernels",
    "neuralcore",
    "pipeline",
    "signal",
    "snn",
    "tensorio",
    "BACKEND",
    "NUMBA_ENABLED",
    "ChannelNotFoundError",
    "DataError",
    "DegenerateInputError",
    "ParameterError",
    "ShapeError",
    "TensorFormatError",
    "TrainingError",
    "__version__",
]
