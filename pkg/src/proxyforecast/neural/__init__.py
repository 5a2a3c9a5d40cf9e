from .forecasters import (
    NEURAL_KINDS,
    NEURAL_PRESETS,
    NeuralConfig,
    NeuralDF,
    NeuralFF,
    NeuralForecaster,
    NeuralRFF,
    TrainCadence,
)
from .mlp import Mlp, softmax
from .replay import ReplayBuffer

__all__ = [
    "Mlp", "NEURAL_KINDS", "NEURAL_PRESETS", "NeuralConfig", "NeuralDF", "NeuralFF",
    "NeuralForecaster", "NeuralRFF", "ReplayBuffer", "TrainCadence", "softmax",
]
