"""Delay-Doppler multipath target channel and additive receiver noise.

Each target contributes a delayed copy of the serialized frame, rotated by a
per-symbol constant phase that advances with the symbol index (one block of
samples per symbol, so the advance is ``2 pi (k_h / n) * block_len`` per
symbol).  Working on the serialized frame makes inter-block interference fall
out naturally: the head of a delayed symbol picks up the tail of its
predecessor, exactly as the banded two-term per-symbol convolution would
produce it, at O(targets * samples) cost.  The explicit per-symbol matrix
form survives only as a slow oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .signaling import Frame


@dataclass(frozen=True)
class Target:
    """One propagation path: complex gain, integer delay bin, normalized
    Doppler in cycles per ``n`` samples."""

    b: complex
    delay: int
    doppler: float = 0.0

    def __post_init__(self):
        if abs(self.b) <= 0:
            raise ConfigError("target gain must be non-zero")
        if self.delay < 0:
            raise ConfigError(f"target delay must be non-negative, got {self.delay}")


@dataclass(frozen=True)
class ChannelConfig:
    """Target list plus noise level.

    ``distortion_limited`` forces the noise variance to zero (the clipping
    distortion is then the only disturbance in the chain).
    """

    targets: tuple[Target, ...]
    noise_var: float = 0.0
    distortion_limited: bool = False

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.noise_var < 0:
            raise ConfigError(f"noise variance must be non-negative, got {self.noise_var}")
        if self.distortion_limited:
            object.__setattr__(self, "noise_var", 0.0)


def add_noise(signal: np.ndarray, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. circular complex Gaussian noise of the given variance."""
    if noise_var < 0:
        raise ConfigError(f"noise variance must be non-negative, got {noise_var}")
    if noise_var == 0:
        return np.array(signal, copy=True)
    scale = np.sqrt(noise_var / 2.0)
    noise = scale * (
        rng.standard_normal(signal.shape) + 1j * rng.standard_normal(signal.shape)
    )
    return signal + noise


def _apply_targets(serial: np.ndarray, cfg: ChannelConfig, n: int, m: int, block: int) -> np.ndarray:
    """Delay-and-rotate each target on serialized frames (batched rows)."""
    out = np.zeros_like(serial)
    symbol_phase_step = 2.0 * np.pi * block / n
    for t in cfg.targets:
        shifted = np.zeros_like(serial)
        if t.delay == 0:
            shifted[...] = serial
        else:
            shifted[..., t.delay:] = serial[..., : serial.shape[-1] - t.delay]
        phases = np.exp(1j * symbol_phase_step * t.doppler * np.arange(m))
        rot = np.repeat(phases, block)
        out += t.b * rot * shifted
    return out


def apply_channel(frame: Frame, cfg: ChannelConfig, rng: np.random.Generator) -> Frame:
    """Propagate a frame through the target channel and add noise.

    In CP mode every delay must fit inside the prefix so that, after CP
    removal, each symbol sees a purely circular channel.
    """
    fc = frame.config
    block = fc.block_len if frame.has_cp else fc.n
    for t in cfg.targets:
        if frame.has_cp and t.delay >= fc.cp_len:
            raise ConfigError(
                f"target delay {t.delay} reaches past the cyclic prefix "
                f"({fc.cp_len} samples); lengthen the CP or drop the target"
            )
        if t.delay >= block:
            raise ConfigError(
                f"target delay {t.delay} exceeds the per-symbol block of {block} samples"
            )
    serial = frame.serialized()
    received = _apply_targets(serial, cfg, fc.n, fc.m, block)
    received = add_noise(received, cfg.noise_var, rng)
    return Frame(received.reshape(fc.m, block), fc, has_cp=frame.has_cp)


def apply_channel_batch(
    frames: np.ndarray,
    cfg: ChannelConfig,
    n: int,
    m: int,
    block: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Batched variant for Monte-Carlo pipelines.

    ``frames`` has shape (batch, m * block) (already serialized); returns the
    same shape.  Validation matches :func:`apply_channel` with CP mode
    inferred from ``block > n``.
    """
    cp_len = block - n
    for t in cfg.targets:
        if cp_len > 0 and t.delay >= cp_len:
            raise ConfigError(
                f"target delay {t.delay} reaches past the cyclic prefix ({cp_len} samples)"
            )
        if t.delay >= block:
            raise ConfigError(
                f"target delay {t.delay} exceeds the per-symbol block of {block} samples"
            )
    received = _apply_targets(frames, cfg, n, m, block)
    return add_noise(received, cfg.noise_var, rng)
