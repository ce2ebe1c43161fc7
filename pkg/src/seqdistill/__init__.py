"""Adaptive RNN-RBM stacks for binary sequences, and C4.5 rules distilled from them."""
from .adaptive_structure import StructureConfig
from .c45 import RuleSet, classify, induce
from .errors import (CapacityError, DimensionError, FormatError, SeqDistillError,
                     TrainingDiverged, ValidationError)
from .inference_bench import NetworkPredictor, RulePredictor, compare, evaluate
from .path_extraction import PathDataset, build_path_dataset
from .rnn_dbn import RnnDbnModel, forward, load_model, save_model, stack_train
from .rnn_rbm import RnnRbmParams, TrainHyper, init_params
from .sequence_data import Dataset, load_pianoroll, save_pianoroll, synth_markov

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "Dataset", "DimensionError", "FormatError", "NetworkPredictor",
    "PathDataset", "RnnDbnModel", "RnnRbmParams", "RulePredictor", "RuleSet",
    "SeqDistillError", "StructureConfig", "TrainHyper", "TrainingDiverged", "ValidationError",
    "build_path_dataset", "classify", "compare", "evaluate", "forward", "induce", "init_params",
    "load_model", "load_pianoroll", "save_model", "save_pianoroll", "stack_train", "synth_markov",
]
