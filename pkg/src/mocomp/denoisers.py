"""Pluggable reverse-step samplers, plus small analytic ones for testing.

A denoiser advances a whole latent video one reverse step: it exposes
``sample_step(video, t, conditioning, rng) -> video`` (same shape) and a
``descriptor`` string. The ``rng`` argument is the only source of
randomness, so a fixed seed fixes the output. Conditioning is an opaque
payload a real model would consume; the toys ignore it.

The three shipped denoisers have closed-form behavior, which is what makes
the sampling loop testable: ``identity`` returns its input (zero-variance
posterior), ``linear-gaussian`` applies an affine map plus Gaussian noise
with known moments, and ``drift`` translates frame content proportionally
to the frame index to create coherent inter-frame motion.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .errors import InpaintError

__all__ = [
    "Denoiser",
    "IdentityDenoiser",
    "LinearGaussianDenoiser",
    "SmoothingDriftDenoiser",
    "DENOISER_NAMES",
    "make_denoiser",
]


class Denoiser(Protocol):
    descriptor: str

    def sample_step(
        self, video: np.ndarray, t: int, conditioning, rng: np.random.Generator
    ) -> np.ndarray:
        """Map the video at step t to a sample at step t−1."""
        ...


class IdentityDenoiser:
    """μ = x_t, Σ = 0: the video passes through unchanged."""

    descriptor = "identity"

    def sample_step(self, video, t, conditioning, rng):
        return np.asarray(video, dtype=np.float64).copy()


class LinearGaussianDenoiser:
    """Affine map with additive noise: x_{t−1} = gain·x_t + bias + noise·ε.

    Per step the output is N(gain·x + bias, noise²·I) elementwise; after k
    steps from x_T the moments follow the affine recursion in closed form,
    giving the sampling loop an exact statistical oracle.
    """

    def __init__(self, gain: float = 0.9, bias: float = 0.02, noise: float = 0.1):
        if noise < 0:
            raise InpaintError(f"noise must be >= 0, got {noise}")
        self.gain = float(gain)
        self.bias = float(bias)
        self.noise = float(noise)
        self.descriptor = f"linear-gaussian(gain={self.gain}, bias={self.bias}, noise={self.noise})"

    def sample_step(self, video, t, conditioning, rng):
        video = np.asarray(video, dtype=np.float64)
        out = self.gain * video + self.bias
        if self.noise > 0:
            out = out + self.noise * rng.standard_normal(video.shape)
        return out

    def moments_after(self, k: int, mean0: float = 0.0, var0: float = 1.0):
        """Elementwise (mean, var) after k steps from N(mean0, var0)."""
        a, b, s = self.gain, self.bias, self.noise
        mean = (a**k) * mean0 + b * (1 - a**k) / (1 - a) if a != 1.0 else mean0 + b * k
        geo = (1 - a ** (2 * k)) / (1 - a * a) if a != 1.0 else float(k)
        var = (a ** (2 * k)) * var0 + s * s * geo
        return mean, var


class SmoothingDriftDenoiser:
    """Shifts each frame sideways in proportion to its index.

    Frame i is blended toward a one-pixel circular shift with weight
    min(1, rate·i) every step, so motion accumulates over the loop and
    grows with the frame index — frame 0 never moves. Deterministic (the
    rng is unused), which makes frame-selection outcomes exactly
    predictable.
    """

    def __init__(self, rate: float = 0.25):
        if not 0 <= rate <= 1:
            raise InpaintError(f"rate must be in [0, 1], got {rate}")
        self.rate = float(rate)
        self.descriptor = f"drift(rate={self.rate})"

    def sample_step(self, video, t, conditioning, rng):
        video = np.asarray(video, dtype=np.float64)
        out = np.empty_like(video)
        for i in range(video.shape[0]):
            weight = min(1.0, self.rate * i)
            shifted = np.roll(video[i], 1, axis=-1)
            out[i] = (1.0 - weight) * video[i] + weight * shifted
        return out


DENOISER_NAMES = ("identity", "linear-gaussian", "drift")


def make_denoiser(name: str, **kwargs) -> Denoiser:
    """Build a denoiser by CLI/config name."""
    if name == "identity":
        return IdentityDenoiser()
    if name == "linear-gaussian":
        return LinearGaussianDenoiser(**kwargs)
    if name == "drift":
        return SmoothingDriftDenoiser(**kwargs)
    raise InpaintError(f"unknown denoiser {name!r}; choose one of {DENOISER_NAMES}")
