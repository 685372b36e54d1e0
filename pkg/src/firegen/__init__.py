"""firegen: cellular-automata wildfire simulation, VQ-VAE fire-sequence
generation, and a POD+LSTM surrogate for fast burned-area nowcasting."""

from .ca import CAParams, FireState, burn_probability, sample_ignition, simulate
from .errors import (DegenerateFieldError, FormatError, MissingInputError,
                     NumericalError)
from .geofields import Ecoregion, RasterGrid, load_ecoregion, save_ecoregion
from .metrics import relative_mismatch, ssim, threshold_burned
from .pipeline import (ExperimentConfig, cmd_ablate, cmd_bench, cmd_evaluate,
                       cmd_generate, cmd_simulate, cmd_train_surrogate,
                       cmd_train_vqvae, load_config, verify_manifest)
from .pod import PODBasis
from .seeding import child_seed
from .sequences import (BurnedSequence, load_dataset, load_sequence,
                        save_dataset, save_sequence)
from .surrogate import LSTMSurrogate, predict_burned
from .vqvae import VQVAE, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "BurnedSequence", "CAParams", "DegenerateFieldError", "Ecoregion",
    "ExperimentConfig", "FireState", "FormatError", "LSTMSurrogate",
    "MissingInputError", "NumericalError", "PODBasis", "RasterGrid", "VQVAE",
    "burn_probability", "child_seed", "cmd_ablate", "cmd_bench",
    "cmd_evaluate", "cmd_generate", "cmd_simulate", "cmd_train_surrogate",
    "cmd_train_vqvae", "generate_dataset", "load_config", "load_dataset",
    "load_ecoregion", "load_sequence", "predict_burned", "relative_mismatch",
    "sample_ignition", "save_dataset", "save_ecoregion", "save_sequence",
    "simulate", "ssim", "threshold_burned", "verify_manifest",
]
