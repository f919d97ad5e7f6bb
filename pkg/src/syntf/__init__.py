"""Transformer encoder for joint intent detection and slot filling with
dependency-ancestor attention supervision and auxiliary POS tagging."""

from .config import RunConfig, load_config
from .corpus import Utterance, build_label_spaces, build_vocab, encode_batch, load_split
from .decode import build_transitions, viterbi
from .metrics import EvalReport, extract_chunks, intent_accuracy, slot_f1
from .model import JointModel, ModelConfig
from .syntax_prior import ancestors, prior_matrix
from .trainer import Checkpoint, lr_at, train

__all__ = [
    "Checkpoint", "EvalReport", "JointModel", "ModelConfig", "RunConfig", "Utterance", "ancestors",
    "build_label_spaces", "build_transitions", "build_vocab", "encode_batch", "extract_chunks",
    "intent_accuracy", "load_config", "load_split", "lr_at", "prior_matrix", "slot_f1", "train", "viterbi",
]
__version__ = "0.1.0"
