from .adam import AdamState, adam_step
from .models import ARCHITECTURES, CNNModel, LSTMModel, ModelSpec, SeqModel, TCNModel, build_model
from .rollout import RolloutResult, rollout, rollout_backward, rollout_loss
from .serialize import WeightFileError, dumps, load_model, loads, save_model

__all__ = [
    "ARCHITECTURES", "AdamState", "CNNModel", "LSTMModel", "ModelSpec", "RolloutResult", "SeqModel",
    "TCNModel", "WeightFileError", "adam_step", "build_model", "dumps", "load_model", "loads",
    "rollout", "rollout_backward", "rollout_loss", "save_model",
]
