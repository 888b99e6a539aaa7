from .models import MODELS, KGEModel, MuRE, RotatE, TransE, create_model, dense_gradient
from .sampling import (NegativeSampler, RemovalIndex, SamplerConfig, SamplerError, SamplerKind,
                       Side, basic_negative_sampling, edit_history_negative_sampling,
                       fetch_corruptions, inverse_negative_sampling)
from .training import PRESETS, TrainConfig, TrainingError, TrainResult, train

__all__ = [
    "MODELS", "KGEModel", "MuRE", "RotatE", "TransE", "create_model", "dense_gradient",
    "NegativeSampler", "RemovalIndex", "SamplerConfig", "SamplerError", "SamplerKind", "Side",
    "basic_negative_sampling", "edit_history_negative_sampling", "fetch_corruptions",
    "inverse_negative_sampling", "PRESETS", "TrainConfig", "TrainingError", "TrainResult", "train",
]
