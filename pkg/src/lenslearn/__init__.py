"""Gradient-based learning assembled from lenses and parametric maps."""
from .errors import (CatalogueError, CompositionError, ConfigError, ContractError, ExprTypeError,
                     LensLearnError, RigSupportError, ShapeError)
from .rig import REAL, Z2, Rig, RigValue, rig_by_name
from .tensor import Tensor, tensor
from .lens import Lens, Mode, Port, chain, compose_lens, instrument, par_lens, port
from .autodiff import MorphExpr, differentiate, evaluate, parse
from .para import ParaLens, ParaMorph, para_differentiate, para_par, para_seq, parse_para
from .optim import Optimiser
from .loss import LearningRate, LossFn
from .learner import Learner, Phase, TrainState, dream_step, train, update_step

__version__ = "0.1.0"

__all__ = [
    "CatalogueError", "CompositionError", "ConfigError", "ContractError", "ExprTypeError",
    "LensLearnError", "RigSupportError", "ShapeError", "REAL", "Z2", "Rig", "RigValue",
    "rig_by_name", "Tensor", "tensor", "Lens", "Mode", "Port", "chain", "compose_lens",
    "instrument", "par_lens", "port", "MorphExpr", "differentiate", "evaluate", "parse",
    "ParaLens", "ParaMorph", "para_differentiate", "para_par", "para_seq", "parse_para",
    "Optimiser", "LearningRate", "LossFn", "Learner", "Phase", "TrainState", "dream_step",
    "train", "update_step",
]
