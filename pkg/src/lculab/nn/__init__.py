"""CNN encoder + Transformer decoder, constrained decoding and training."""
from .config import ModelConfig
from .decoder import DecoderStepper, decoder_step
from .decoding import constrained_decode, constrained_decode_batch
from .encoder import cnn_encode
from .training import TrainConfig, gradient_check, teacher_forced_loss, train
from .weights import ModelWeights, init_weights, load_weights, save_weights

__all__ = [
    "ModelConfig",
    "ModelWeights",
    "DecoderStepper",
    "TrainConfig",
    "cnn_encode",
    "constrained_decode",
    "constrained_decode_batch",
    "decoder_step",
    "gradient_check",
    "init_weights",
    "load_weights",
    "save_weights",
    "teacher_forced_loss",
    "train",
]
