"""Observation noise models and noisy datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..revealed import Dataset, DatasetError


@dataclass(frozen=True)
class NoiseModel:
    """``gaussian`` draws N(0, scale^2); ``uniform`` draws U(0, scale)."""

    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not np.isfinite(self.scale) or self.scale < 0.0:
            raise ValueError("noise scale must be finite and nonnegative")

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        """Parse ``gaussian:SIGMA`` or ``uniform:KAPPA``."""
        kind, sep, value = text.partition(":")
        if not sep:
            raise ValueError(f"noise spec {text!r} must look like kind:value")
        try:
            scale = float(value)
        except ValueError as exc:
            raise ValueError(f"noise scale {value!r} is not a number") from exc
        return cls(kind.strip().lower(), scale)

    def __str__(self) -> str:
        return f"{self.kind}:{self.scale!r}"

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return self.scale**2
        return self.scale**2 / 12.0

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.scale == 0.0:
            return np.zeros(shape)
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, size=shape)
        return rng.uniform(0.0, self.scale, size=shape)


@dataclass(frozen=True)
class NoisyDataset:
    """Probes with noisy action observations ``y = x + w``.

    Observations may leave the nonnegative orthant under Gaussian noise, so
    only probe positivity and shapes are enforced.
    """

    probes: np.ndarray  # (T, m)
    observations: np.ndarray  # (T, n, m)
    noise: NoiseModel

    def __post_init__(self):
        p = np.asarray(self.probes, dtype=float)
        y = np.asarray(self.observations, dtype=float)
        if y.ndim == 2:
            y = y[:, None, :]
        if p.ndim != 2 or y.ndim != 3 or y.shape[0] != p.shape[0] or y.shape[2] != p.shape[1]:
            raise DatasetError(f"observation shape {y.shape} does not match probes {p.shape}")
        if p.shape[0] < 1:
            raise DatasetError("T >= 1 required")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(y))):
            raise DatasetError("probes and observations must be finite")
        if np.any(p <= 0.0):
            raise DatasetError("probe entries must be strictly positive")
        object.__setattr__(self, "probes", p)
        object.__setattr__(self, "observations", y)

    @classmethod
    def observe(cls, data: Dataset, noise: NoiseModel, rng: np.random.Generator) -> "NoisyDataset":
        w = noise.sample(rng, data.actions.shape)
        return cls(data.probes, data.actions + w, noise)

    @property
    def T(self) -> int:
        return self.probes.shape[0]

    @property
    def n(self) -> int:
        return self.observations.shape[1]

    @property
    def m(self) -> int:
        return self.probes.shape[1]
