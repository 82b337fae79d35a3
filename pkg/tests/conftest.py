"""Shared helpers: reference oracles and signal generators used across tests."""

import numpy as np

from isacsim import (
    PaConfig,
    add_cp,
    draw_symbols,
    limiter_compression_power,
    parse_basis,
    parse_constellation,
    sel_amplify,
    synthesize,
)
from isacsim.ambiguity import AfMode


def brute_force_af(x, k_grid=None, mode=AfMode.PERIODIC):
    """O(N^2 K) direct evaluation of (1/sqrt(N)) sum_p s(p) s*((p-l)) e^{-j2pi kp/K}.

    Deliberately written as plain loops so it shares nothing with the FFT
    implementation under test.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    k_grid = n if k_grid is None else int(k_grid)
    lags = np.arange(n) if mode is AfMode.PERIODIC else np.arange(1 - n, n)
    out = np.zeros((lags.size, k_grid), dtype=complex)
    for i, lag in enumerate(lags):
        for k in range(k_grid):
            acc = 0.0 + 0.0j
            for p in range(n):
                if mode is AfMode.PERIODIC:
                    v = x[(p - lag) % n]
                else:
                    q = p - lag
                    v = x[q] if 0 <= q < n else 0.0
                acc += x[p] * np.conj(v) * np.exp(-2j * np.pi * k * p / k_grid)
            out[i, k] = acc
    return out / np.sqrt(n)


def zadoff_chu(n, root=1):
    """Odd-length Zadoff-Chu sequence (ideal periodic autocorrelation)."""
    assert n % 2 == 1
    p = np.arange(n)
    return np.exp(-1j * np.pi * root * p * (p + 1) / n)


def pa_compression(ibo_db, v_sat=1.0):
    """Back-off referenced to the limiter's 1 dB compression point."""
    return PaConfig(
        v_sat=v_sat,
        ibo=10.0 ** (ibo_db / 10.0),
        p1db=limiter_compression_power(v_sat),
    )


def pa_limiter(ibo_db, v_sat=1.0):
    """Back-off referenced to the saturation power itself."""
    return PaConfig(v_sat=v_sat, ibo=10.0 ** (ibo_db / 10.0))


def tx_generator(constellation, basis_name, n, pa=None, cp_len=0):
    """Batch generator of (amplified) frames for average_af-style consumers."""
    const = parse_constellation(constellation)
    basis = parse_basis(basis_name, n)

    def gen(rng, count):
        sym = draw_symbols(const, (count, n), rng)
        x = synthesize(basis, sym)
        if cp_len:
            x = add_cp(x, cp_len)
        if pa is None:
            return x
        return sel_amplify(x, pa)

    return gen


def scaled_linear_generator(constellation, basis_name, n, pa):
    """Same transmit scaling as the amplifier path but with the clipper off."""
    const = parse_constellation(constellation)
    basis = parse_basis(basis_name, n)

    def gen(rng, count):
        sym = draw_symbols(const, (count, n), rng)
        return pa.g * pa.alpha * synthesize(basis, sym)

    return gen
