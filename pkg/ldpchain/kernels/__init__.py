from __future__ import annotations

from ldpchain.kernels.base import (
    X_INIT,
    KernelModel,
    XInit,
    iterated_density,
    iterated_profile,
    sample_path,
    sample_paths,
    tilde_density,
    word_density,
)

__all__ = [
    "X_INIT",
    "KernelModel",
    "XInit",
    "iterated_density",
    "iterated_profile",
    "sample_path",
    "sample_paths",
    "tilde_density",
    "word_density",
]
