"""Embedding-space augmentations used to build positive pairs.

Two primitives operate elementwise on arrays of any shape:

* random masking: each coordinate is independently zeroed with probability
  `mask_prob` (the experiments mask 20% of coordinates);
* Gaussian noise: adds `noise_scale` times a standard normal draw per
  coordinate (the experiments use noise variance 0.13, i.e. scale
  sqrt(0.13)).

A positive pair is two independently augmented views of the same input.
When masking and noise are combined, masking is applied first so the noise
statistics are uniform across coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MASK = "mask"
GAUSSIAN = "gaussian"
MASK_PLUS_GAUSSIAN = "mask+gaussian"
KINDS = (MASK, GAUSSIAN, MASK_PLUS_GAUSSIAN)

DEFAULT_MASK_PROB = 0.2
DEFAULT_NOISE_SCALE = math.sqrt(0.13)


@dataclass(frozen=True)
class AugmentConfig:
    kind: str = GAUSSIAN
    mask_prob: float = DEFAULT_MASK_PROB
    noise_scale: float = DEFAULT_NOISE_SCALE
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (0.0 <= self.mask_prob <= 1.0):
            raise ValidationError(f"mask_prob must lie in [0,1], got {self.mask_prob}")
        if self.noise_scale < 0:
            raise ValidationError(f"noise_scale must be >= 0, got {self.noise_scale}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def random_mask(x: np.ndarray, mask_prob: float, rng: np.random.Generator) -> np.ndarray:
    """Zero each coordinate independently with probability mask_prob."""
    if not (0.0 <= mask_prob <= 1.0):
        raise ValidationError(f"mask_prob must lie in [0,1], got {mask_prob}")
    x = np.asarray(x, dtype=np.float64)
    keep = rng.random(x.shape) >= mask_prob
    return x * keep


def gaussian_noise(x: np.ndarray, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
    """Add iid zero-mean Gaussian noise with stddev noise_scale per coordinate."""
    if noise_scale < 0:
        raise ValidationError(f"noise_scale must be >= 0, got {noise_scale}")
    x = np.asarray(x, dtype=np.float64)
    return x + noise_scale * rng.standard_normal(x.shape)


def augment_view(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """One augmented view of x under the configured augmentation(s)."""
    if cfg.kind == MASK:
        return random_mask(x, cfg.mask_prob, rng)
    if cfg.kind == GAUSSIAN:
        return gaussian_noise(x, cfg.noise_scale, rng)
    return gaussian_noise(random_mask(x, cfg.mask_prob, rng), cfg.noise_scale, rng)


def make_positive_pair(
    x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Two independently augmented views of the same input."""
    return augment_view(x, cfg, rng), augment_view(x, cfg, rng)


def make_positive_pairs(
    x_batch: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator
) -> np.ndarray:
    """Batch form: (N, d) in, (2N, d) out with rows 2i, 2i+1 forming pair i."""
    x_batch = np.asarray(x_batch, dtype=np.float64)
    view_a, view_b = make_positive_pair(x_batch, cfg, rng)
    out = np.empty((2 * x_batch.shape[0], x_batch.shape[1]))
    out[0::2] = view_a
    out[1::2] = view_b
    return out
