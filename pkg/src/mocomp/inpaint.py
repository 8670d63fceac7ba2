"""Masked video generation: keep the background, synthesize the rest.

A latent video is a float64 array of shape ``(n, C, H, W)`` — n frames of
C×H×W latents (rasters are used directly as latents with C = 3). The loop
runs T reverse-diffusion steps. At each step the known (mask = 1) region is
re-derived from the clean composite by forward noising at the step's noise
level, the unknown (mask = 0) region is advanced by the denoiser, and the
two are blended per pixel. Because the noise schedule pins ᾱ₀ = 1, the
final blend at t = 1 writes the clean composite into the known region, so
background pixels of every output frame equal the input bit-exactly.

All randomness derives from one integer master seed through named
``SeedSequence`` spawn keys: per-frame streams for the initial noise and
the forward noising, one whole-video stream per step for the denoiser.
Results are bit-reproducible and independent of any frame-level
parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import InpaintError

__all__ = [
    "NoiseSchedule",
    "extend_mask",
    "q_sample_known",
    "p_sample_unknown",
    "blend_step",
    "inpaint",
    "score_frames",
    "select_frame",
    "KNOWN_DEVIATION_PENALTY",
]

# Weight of known-region deviation in the default frame score: any drift in
# pixels that were supposed to stay static outweighs motion gains tenfold.
KNOWN_DEVIATION_PENALTY = 10.0


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal-retention sequence ᾱ indexed 0..T.

    ``alpha_bar[0] == 1`` by convention (a step-0 "sample" is the clean
    latent itself); values then decrease strictly and stay in (0, 1].
    """

    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        object.__setattr__(self, "alpha_bar", ab)
        if ab.ndim != 1 or len(ab) < 2:
            raise InpaintError(
                f"schedule needs alpha_bar values for steps 0..T (>= 2 entries), "
                f"got shape {ab.shape}"
            )
        if ab[0] != 1.0:
            raise InpaintError(f"alpha_bar[0] must be 1.0, got {ab[0]!r}")
        if np.any(ab <= 0.0) or np.any(ab > 1.0):
            raise InpaintError("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(ab) >= 0.0):
            raise InpaintError("alpha_bar must be strictly decreasing")

    @property
    def steps(self) -> int:
        return len(self.alpha_bar) - 1

    @classmethod
    def linear(cls, steps: int, floor: float = 1e-4) -> "NoiseSchedule":
        """Default schedule: ᾱ falls linearly from 1 to ``floor`` over T steps."""
        if steps < 1:
            raise InpaintError(f"steps must be >= 1, got {steps}")
        return cls(np.linspace(1.0, floor, steps + 1))


def _frame_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _subseed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


def _as_video(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise InpaintError(f"{name} must have shape (frames, C, H, W), got {x.shape}")
    return x


def extend_mask(mask: np.ndarray, n_frames: int) -> np.ndarray:
    """Replicate one H×W binary mask across n frames -> (n, 1, H, W).

    The output broadcasts against any channel count. 1 = known background,
    0 = region to synthesize.
    """
    if n_frames < 1:
        raise InpaintError(f"frame count must be >= 1, got {n_frames}")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise InpaintError(f"mask must be 2-D (H, W), got shape {mask.shape}")
    bad = sorted(set(np.unique(mask)) - {0.0, 1.0})
    if bad:
        raise InpaintError(f"mask must be binary, found values {bad}")
    return np.repeat(mask[None, None, :, :], n_frames, axis=0)


def _check_extended_mask(masks: np.ndarray, video_shape: Tuple[int, ...]) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.float64)
    n, _, height, width = video_shape
    if masks.shape != (n, 1, height, width):
        raise InpaintError(
            f"extended mask shape {masks.shape} does not match video "
            f"({n}, 1, {height}, {width})"
        )
    # Temporal constancy is part of the contract; spot-assert it wherever
    # the mask is consumed.
    if n > 1 and np.any(masks != masks[0]):
        raise InpaintError("extended mask frames differ; masks must be constant in time")
    return masks


def q_sample_known(
    x0: np.ndarray, t: int, sched: NoiseSchedule, seed: int
) -> np.ndarray:
    """Forward-noise the clean video to the latent the step will output.

    Step t produces the latent at t−1, so each frame is drawn from
    N(√ᾱ_{t−1} · x0, (1 − ᾱ_{t−1})·I) using an independent per-frame
    stream. At t = 1 (ᾱ₀ = 1) the clean frames are returned bit-exactly.
    """
    x0 = _as_video(x0, "x0")
    if not 1 <= t <= sched.steps:
        raise InpaintError(f"step t={t} out of range [1, {sched.steps}]")
    alpha_bar = float(sched.alpha_bar[t - 1])
    out = np.empty_like(x0)
    if alpha_bar == 1.0:
        for i in range(x0.shape[0]):
            out[i] = x0[i].copy()
        return out
    scale = np.sqrt(alpha_bar)
    sigma = np.sqrt(1.0 - alpha_bar)
    for i in range(x0.shape[0]):
        eps = _frame_rng(seed, i).standard_normal(x0.shape[1:])
        out[i] = scale * x0[i] + sigma * eps
    return out


def p_sample_unknown(x_t: np.ndarray, t: int, denoiser, cond, seed: int) -> np.ndarray:
    """One reverse step of the denoiser on the whole video jointly."""
    x_t = _as_video(x_t, "x_t")
    if t < 1:
        raise InpaintError(f"step t={t} out of range (must be >= 1)")
    out = denoiser.sample_step(x_t, t, cond, _frame_rng(seed))
    out = np.asarray(out, dtype=np.float64)
    if out.shape != x_t.shape:
        raise InpaintError(
            f"denoiser '{getattr(denoiser, 'descriptor', denoiser)}' returned "
            f"shape {out.shape} for input shape {x_t.shape}"
        )
    return out


def blend_step(known: np.ndarray, unknown: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Per-pixel combine: known where mask = 1, unknown where mask = 0.

    The masks are binary, so selection computes m ⊙ known + (1 − m) ⊙ unknown
    without floating-point round trips — the extremes are bit-exact and the
    blend is idempotent.
    """
    known = _as_video(known, "known")
    unknown = _as_video(unknown, "unknown")
    if known.shape != unknown.shape:
        raise InpaintError(
            f"known {known.shape} and unknown {unknown.shape} shapes differ"
        )
    masks = _check_extended_mask(masks, known.shape)
    return np.where(masks > 0.5, known, unknown)


def inpaint(
    x0,
    mask: np.ndarray,
    denoiser,
    sched: NoiseSchedule,
    n_frames: int,
    seed: int,
    conditioning=None,
) -> np.ndarray:
    """Run the full T-step masked generation loop.

    ``x0`` is the clean composite — either one latent (C, H, W), replicated
    across frames (the background is static), or a ready (n, C, H, W)
    video. ``mask`` is one (H, W) binary mask or an extended (n, 1, H, W)
    stack. Returns the generated video at t = 0.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim == 3:
        x0 = np.repeat(x0[None], n_frames, axis=0)
    x0 = _as_video(x0, "composite")
    if x0.shape[0] != n_frames:
        raise InpaintError(
            f"composite video has {x0.shape[0]} frames, expected {n_frames}"
        )
    mask = np.asarray(mask)
    if mask.ndim == 2:
        masks = extend_mask(mask, n_frames)
    else:
        masks = np.asarray(mask, dtype=np.float64)
    masks = _check_extended_mask(masks, x0.shape)

    frame_shape = x0.shape[1:]
    x = np.empty_like(x0)
    for i in range(n_frames):
        x[i] = _frame_rng(seed, 0, i).standard_normal(frame_shape)

    for t in range(sched.steps, 0, -1):
        masks = _check_extended_mask(masks, x0.shape)
        known = q_sample_known(x0, t, sched, _subseed(seed, 1, t))
        unknown = p_sample_unknown(x, t, denoiser, conditioning, _subseed(seed, 2, t))
        x = blend_step(known, unknown, masks)
    return x


def score_frames(
    video: np.ndarray,
    masks: np.ndarray,
    scorer: Optional[Callable[[int, np.ndarray], float]] = None,
) -> np.ndarray:
    """Score every frame; the default rewards motion where it belongs.

    Default score for frame i: mean |frame_i − frame_0| over the unknown
    (mask = 0) region, minus ``KNOWN_DEVIATION_PENALTY`` times the same
    statistic over the known region. A custom ``scorer(index, frame)``
    replaces the default entirely.
    """
    video = _as_video(video, "video")
    if scorer is not None:
        return np.array([float(scorer(i, video[i])) for i in range(video.shape[0])])
    masks = _check_extended_mask(masks, video.shape)
    known = masks[0, 0] > 0.5
    unknown = ~known
    scores = np.empty(video.shape[0])
    for i in range(video.shape[0]):
        delta = np.abs(video[i] - video[0])
        motion = delta[:, unknown].mean() if unknown.any() else 0.0
        drift = delta[:, known].mean() if known.any() else 0.0
        scores[i] = motion - KNOWN_DEVIATION_PENALTY * drift
    return scores


def select_frame(
    video: np.ndarray,
    masks: np.ndarray,
    scorer: Optional[Callable[[int, np.ndarray], float]] = None,
) -> Tuple[int, np.ndarray]:
    """Pick the best frame: highest score, ties to the lowest index."""
    scores = score_frames(video, masks, scorer)
    index = int(np.argmax(scores))
    return index, video[index]
