"""Periodic and aperiodic ambiguity functions, cuts, and sidelobe metrics.

The ambiguity value at delay ``l`` and Doppler bin ``k`` is

    A(l, k) = (1/sqrt(N)) * sum_p s(p) s*(p - l) exp(-j 2 pi k p / K)

with the delayed index taken modulo N in periodic mode and zero-extended in
aperiodic mode.  ``K`` is the Doppler grid size; with the default ``K = N``
the phase denominator is the signal length itself.  Surfaces store squared
magnitudes.

Doppler evaluation folds the lag-product sequence modulo ``K`` (or zero-pads
when ``K > N``) before a length-``K`` FFT, which reproduces the direct sum
exactly for any grid size; ``K = 1`` therefore gives a cheap zero-Doppler-only
surface, which the Monte-Carlo averaging paths exploit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericError
from .seeding import DEFAULT_CHUNK, chunk_counts, spawn_rngs


class AfMode(Enum):
    PERIODIC = "periodic"
    APERIODIC = "aperiodic"


@dataclass
class AmbiguitySurface:
    """Squared-magnitude ambiguity grid.

    ``values`` has one row per delay and one column per Doppler bin.  The
    delay axis is ``0..N-1`` (periodic) or ``1-N..N-1`` (aperiodic); the
    Doppler axis is the unshifted FFT ordering ``0..K-1`` with bin 0 at
    column 0.
    """

    values: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    mode: AfMode
    normalized: bool = False

    @property
    def zero_delay_index(self) -> int:
        return int(np.flatnonzero(self.delays == 0)[0])


@dataclass(frozen=True)
class SidelobeMetrics:
    """Zero-Doppler-cut summary of a surface.

    On a Monte-Carlo-averaged surface the sums estimate expectations, so
    ``eisl``/``eislr`` carry the averaged interpretation of ``isl``; on a
    single realization they are the plain integrated level.  Periodic
    surfaces store each circular lag once, but the sidelobe sum counts the
    ``+l``/``-l`` pair separately (2N-2 terms), matching the aperiodic
    convention so the two modes are comparable.
    """

    isl: float
    eisl: float
    eislr: float
    pslr: float
    mainlobe: float


@lru_cache(maxsize=None)
def _lag_geometry(n: int, mode: AfMode):
    p = np.arange(n)
    if mode is AfMode.PERIODIC:
        lags = np.arange(n)
        idx = (p[None, :] - lags[:, None]) % n
        mask = None
    else:
        lags = np.arange(1 - n, n)
        raw = p[None, :] - lags[:, None]
        mask = (raw >= 0) & (raw < n)
        idx = np.clip(raw, 0, n - 1)
    return lags, idx, mask


def _lag_products(u: np.ndarray, v: np.ndarray, mode: AfMode) -> np.ndarray:
    """All delayed products ``u(p) v*(p - l)``; shape (..., n_lags, n)."""
    n = u.shape[-1]
    _, idx, mask = _lag_geometry(n, mode)
    prod = u[..., None, :] * np.conj(v[..., idx])
    if mask is not None:
        prod = prod * mask
    return prod


def _doppler_transform(prod: np.ndarray, k: int) -> np.ndarray:
    """Exact evaluation of ``sum_p prod(p) exp(-j 2 pi k p / K)`` for all bins."""
    n = prod.shape[-1]
    if k == n:
        return np.fft.fft(prod, axis=-1)
    if k > n:
        return np.fft.fft(prod, n=k, axis=-1)
    pad = (-n) % k
    if pad:
        shape = prod.shape[:-1] + (pad,)
        prod = np.concatenate([prod, np.zeros(shape, dtype=prod.dtype)], axis=-1)
    folded = prod.reshape(prod.shape[:-1] + (-1, k)).sum(axis=-2)
    return np.fft.fft(folded, axis=-1)


def cross_af(
    u: np.ndarray,
    v: np.ndarray | None = None,
    k_grid: int | None = None,
    mode: AfMode = AfMode.PERIODIC,
) -> np.ndarray:
    """Complex (cross-)ambiguity values on the (lag, Doppler) grid.

    ``u`` and ``v`` may carry leading batch axes.  Self-AF when ``v`` is
    omitted.  Shape of the result: (..., n_lags, K).
    """
    if v is None:
        v = u
    if u.shape != v.shape:
        raise ConfigError(f"shape mismatch {u.shape} vs {v.shape}")
    n = u.shape[-1]
    if n < 2:
        raise ConfigError("signal length must be at least 2")
    k = n if k_grid is None else int(k_grid)
    if k < 1:
        raise ConfigError(f"Doppler grid must have at least one bin, got {k}")
    prod = _lag_products(u, v, mode)
    return _doppler_transform(prod, k) / np.sqrt(n)


def _surface_from_values(values, n, k, mode, normalized=False):
    lags, _, _ = _lag_geometry(n, mode)
    return AmbiguitySurface(
        values=values,
        delays=lags.copy(),
        dopplers=np.arange(k),
        mode=mode,
        normalized=normalized,
    )


def paf(signal: np.ndarray, k_grid: int | None = None) -> AmbiguitySurface:
    """Periodic ambiguity surface (squared magnitudes) of one signal."""
    a = cross_af(signal, None, k_grid, AfMode.PERIODIC)
    k = a.shape[-1]
    return _surface_from_values(np.abs(a) ** 2, signal.shape[-1], k, AfMode.PERIODIC)


def aaf(signal: np.ndarray, k_grid: int | None = None) -> AmbiguitySurface:
    """Aperiodic ambiguity surface; delay axis spans ``1-N .. N-1``."""
    a = cross_af(signal, None, k_grid, AfMode.APERIODIC)
    k = a.shape[-1]
    return _surface_from_values(np.abs(a) ** 2, signal.shape[-1], k, AfMode.APERIODIC)


def zero_doppler_cut(surface: AmbiguitySurface) -> np.ndarray:
    """Slice at Doppler bin 0, indexed by the surface's delay axis."""
    return surface.values[:, 0].copy()


def zero_delay_cut(surface: AmbiguitySurface) -> np.ndarray:
    """Slice at delay 0, indexed by the surface's Doppler axis."""
    return surface.values[surface.zero_delay_index, :].copy()


def _mc_chunk_size(n: int, mode: AfMode, k: int) -> int:
    """Trials per averaging chunk, capped so the lag-product tensor stays
    modest.  Depends only on the problem geometry (not worker count), which
    keeps chunk layout and hence RNG streams reproducible."""
    n_lags = n if mode is AfMode.PERIODIC else 2 * n - 1
    per_trial = n_lags * max(n, k)
    return max(1, min(DEFAULT_CHUNK, 4_000_000 // per_trial))


def average_af(
    generator: Callable[[np.random.Generator, int], np.ndarray],
    trials: int,
    k_grid: int | None = None,
    mode: AfMode = AfMode.PERIODIC,
    rng: np.random.Generator | None = None,
    normalize: bool = True,
) -> AmbiguitySurface:
    """Mean squared AF over independent realizations.

    ``generator(rng, count)`` must return a ``(count, N)`` batch of signals.
    The averaged surface is peak-normalized by default (pass
    ``normalize=False`` to keep raw units, e.g. for integrated-sidelobe
    comparisons against closed-form levels).
    """
    if trials < 1:
        raise ConfigError("at least one trial required")
    if rng is None:
        rng = np.random.default_rng()
    # throwaway draw on a fixed stream, used only to learn the signal length
    probe = generator(np.random.default_rng(0), 1)
    n = probe.shape[-1]
    k = n if k_grid is None else int(k_grid)
    if k < 1:
        raise ConfigError(f"Doppler grid must have at least one bin, got {k}")

    chunk = _mc_chunk_size(n, mode, k)
    sizes = chunk_counts(trials, chunk)
    streams = spawn_rngs(rng, len(sizes))
    accum = None
    for sz, r in zip(sizes, streams):
        batch = generator(r, sz)
        a = cross_af(batch, None, k, mode)
        part = np.sum(np.abs(a) ** 2, axis=0)
        accum = part if accum is None else accum + part
    values = accum / trials

    surface = _surface_from_values(values, n, k, mode, normalized=False)
    if normalize:
        peak = values[surface.zero_delay_index, 0]
        if peak <= 0:
            raise NumericError("cannot normalize: zero value at the origin")
        surface.values = values / peak
        surface.normalized = True
    return surface


def sidelobe_metrics(surface: AmbiguitySurface) -> SidelobeMetrics:
    """Integrated and peak sidelobe levels of the zero-Doppler cut."""
    cut = zero_doppler_cut(surface)
    if not np.any(cut > 0):
        raise NumericError("degenerate surface: zero-Doppler cut is identically zero")
    i0 = surface.zero_delay_index
    main = float(cut[i0])
    if main <= 0:
        raise NumericError("degenerate surface: no mainlobe at the origin")
    side = np.delete(cut, i0)
    isl = float(side.sum())
    if surface.mode is AfMode.PERIODIC:
        isl *= 2.0
    peak_side = float(side.max()) if side.size else 0.0
    return SidelobeMetrics(
        isl=isl,
        eisl=isl,
        eislr=isl / main,
        pslr=peak_side / main,
        mainlobe=main,
    )


def to_db(values, floor: float = -100.0) -> np.ndarray:
    """10*log10 with a clamp at ``floor`` dB (CSV/plot convention)."""
    lin_floor = 10.0 ** (floor / 10.0)
    return 10.0 * np.log10(np.maximum(np.asarray(values, dtype=float), lin_floor))
