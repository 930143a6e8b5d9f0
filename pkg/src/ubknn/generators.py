"""Synthetic data: noisy two moons and uniform-cube data with a known posterior."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .oracle import SyntheticTruth
from .sampler import make_rng

# Minority arc: lower half of the unit circle centred at MOON_OFFSET.
MOON_OFFSET = (1.0, 0.5)


@dataclass(frozen=True)
class TwoMoonsSpec:
    n_major: int = 20000
    n_minor: int = 200
    noise_sd: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_major < 1 or self.n_minor < 1:
            raise ValueError("class counts must be at least 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


def gen_two_moons(spec: TwoMoonsSpec) -> Dataset:
    """Class 1 (majority) on the upper unit arc, class 2 (minority) on the shifted lower arc."""
    rng = make_rng(spec.seed)
    t_major = rng.uniform(0.0, math.pi, spec.n_major)
    t_minor = rng.uniform(0.0, math.pi, spec.n_minor)
    major = np.column_stack([np.cos(t_major), np.sin(t_major)])
    minor = np.column_stack([MOON_OFFSET[0] - np.cos(t_minor), MOON_OFFSET[1] - np.sin(t_minor)])
    X = np.vstack([major, minor])
    if spec.noise_sd > 0:
        X = X + rng.normal(0.0, spec.noise_sd, X.shape)
    y = np.concatenate([np.ones(spec.n_major, dtype=np.int64),
                        np.full(spec.n_minor, 2, dtype=np.int64)])
    return Dataset(X, y, 2, ("majority", "minority"))


@dataclass(frozen=True)
class CubeSpec:
    """Uniform features on ``[0, 1]^d`` with a smooth posterior whose class means equal ``pi``.

    The ``"sine"`` preset sets ``eta_m(x) = pi_m (1 + c h_m(x))`` with
    ``g_m(x) = sin(2 pi (x_1 - (m - 1) / M))`` and ``h_m = g_m - sum_j pi_j g_j``,
    which integrates to ``pi_m`` and sums to one across classes.  It is
    Lipschitz (Hoelder exponent 1).
    """

    d: int = 2
    n: int = 1000
    pi: tuple[float, ...] = (0.95, 0.05)
    amplitude: float = 0.45
    preset: str = "sine"
    seed: int = 0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.ndim != 1 or pi.size < 2 or np.any(pi <= 0) or abs(pi.sum() - 1) > 1e-12:
            raise ValueError(f"pi must be a probability vector with positive entries, got {self.pi}")
        if self.preset != "sine":
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be at least 1")
        peak = sine_peaks(pi)
        if self.amplitude < 0 or np.any(self.amplitude * peak > 1) or np.any(pi * (1 + self.amplitude * peak) > 1):
            raise ValueError(f"amplitude {self.amplitude} makes eta leave [0, 1]")


def sine_peaks(pi) -> np.ndarray:
    """``max_x |h_m(x)|``: each ``h_m`` is one sinusoid in ``x_1``, so its peak is a phasor modulus."""
    pi = np.asarray(pi, dtype=np.float64)
    phasors = np.exp(-2j * math.pi * np.arange(pi.size) / pi.size)
    return np.abs(phasors - pi @ phasors)


def sine_eta(pi, amplitude: float):
    pi = np.asarray(pi, dtype=np.float64)
    M = pi.size
    shifts = np.arange(M) / M

    def eta(X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        g = np.sin(2 * math.pi * (X[:, :1] - shifts))
        h = g - (g @ pi)[:, None]
        return pi * (1 + amplitude * h)

    return eta


def gen_cube(spec: CubeSpec) -> tuple[Dataset, SyntheticTruth]:
    rng = make_rng(spec.seed)
    truth = SyntheticTruth(sine_eta(spec.pi, spec.amplitude), np.asarray(spec.pi, dtype=np.float64))
    X = rng.random((spec.n, spec.d))
    cum = np.cumsum(truth.eta(X), axis=1)
    u = rng.random(spec.n)[:, None]
    y = np.minimum((u >= cum).sum(axis=1), truth.n_classes - 1) + 1
    return Dataset(X, y, truth.n_classes), truth
