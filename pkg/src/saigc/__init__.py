"""Prompt-based semantic communication with an actor-critic prompt editor.

Scenes are rendered to small rasters, captioned into prompts, edited by a
learned policy, sent under a byte budget with optional image hints, decoded
back to rasters and scored.
"""

from .channel import BudgetConfig, assemble_payload, deserialize, serialize
from .codec import NoiseConfig, Prompt, PromptDecoder, PromptEncoder, decode, encode_clean
from .metrics import TemplateClassifier, compression_ratio, quality, recall_at_k
from .rl import PromptOptimizer, TrainingConfig, optimize, train
from .scene import SceneSpec, generate_dataset, render

__version__ = "0.1.0"

__all__ = [
    "BudgetConfig",
    "NoiseConfig",
    "Prompt",
    "PromptDecoder",
    "PromptEncoder",
    "PromptOptimizer",
    "SceneSpec",
    "TemplateClassifier",
    "TrainingConfig",
    "assemble_payload",
    "compression_ratio",
    "decode",
    "deserialize",
    "encode_clean",
    "generate_dataset",
    "optimize",
    "quality",
    "recall_at_k",
    "render",
    "serialize",
    "train",
]
