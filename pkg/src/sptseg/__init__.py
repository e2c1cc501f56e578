"""Spectral prompt tuning for zero-shot segmentation, from scratch on numpy.

A frozen toy vision transformer is adapted with per-layer visual prompts
plus learnable frequency-domain filters, and decoded by a frequency-split
attention decoder scoring class embeddings against patch tokens.
"""

from .autodiff import Tensor, backward, check_gradients, no_grad, softmax
from .checkpoint import load_checkpoint, save_checkpoint
from .config import FullConfig, parse_config, parse_config_file, serialize_config
from .data import GzlssSplit, Sample, SceneSpec, generate_dataset, load_dataset, save_dataset
from .decoder import DecoderConfig, SpectralGuidedDecoder
from .encoder import EncoderConfig, PromptedEncoder
from .errors import (CheckpointError, ConfigError, ContractError,
                     DimensionError, NonFiniteError, SptSegError,
                     TrainingDiverged)
from .losses import LossConfig, focal_loss, ssim_loss, total_loss
from .metrics import (MetricAccumulator, SegMetrics, compute_metrics,
                      format_report, hiou, parse_report)
from .model import SptSegModel
from .spectral import ComplexTensor, SpectralFilter, fft2, ifft2, spectral_prompt
from .train import AdamW, evaluate_model, train_model

__version__ = "0.1.0"
