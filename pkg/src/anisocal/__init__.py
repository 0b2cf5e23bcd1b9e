"""Anisotropy-detecting neural hyperelastic models with trainable structure tensors."""

import jax

jax.config.update("jax_enable_x64", True)

from .errors import AnisocalError  # noqa: E402
from .structure import SetKind, StructureSpec, Symmetry, classify  # noqa: E402
from .network import ModelArtifact, load_model, save_model  # noqa: E402
from .energy import evaluate  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "AnisocalError",
    "ModelArtifact",
    "SetKind",
    "StructureSpec",
    "Symmetry",
    "classify",
    "evaluate",
    "load_model",
    "save_model",
]
