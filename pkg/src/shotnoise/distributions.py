"""Positive jump laws for claim sizes and intensity shocks.

A law exposes its moment-generating function, the derivative of the MGF,
its mean, a sampler and closure under exponential tilting.  Divergence of
the MGF is reported as ``math.inf`` rather than raised, so that callers
probing the edge of the MGF domain (root finders in particular) can do so
without exception handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, Type

import numpy as np


class MGFDomainError(ValueError):
    """Raised when an operation needs a finite MGF but the argument is outside its domain."""


class DistributionSpec:
    """Base class for positive jump laws.

    Subclasses must define ``kind``, ``mgf``, ``mgf_prime``, ``mean``,
    ``mgf_sup``, ``tilt``, ``cdf``, ``sample`` and ``params``.
    """

    kind: ClassVar[str]
    _registry: ClassVar[Dict[str, Type["DistributionSpec"]]] = {}

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls._registry[cls.kind] = cls

    @property
    def mgf_sup(self) -> float:
        """Supremum of the MGF domain (``inf`` if the MGF is entire)."""
        raise NotImplementedError

    def mgf(self, s: float) -> float:
        raise NotImplementedError

    def mgf_prime(self, s: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def tilt(self, xi: float) -> "DistributionSpec":
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def params(self) -> Dict[str, float]:
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, **self.params()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DistributionSpec":
        data = dict(data)
        kind = data.pop("kind", None)
        try:
            law = cls._registry[kind]
        except KeyError:
            raise ValueError(f"unknown distribution kind {kind!r}") from None
        return law(**data)


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    """Exponential law with the given rate (mean ``1 / rate``)."""

    rate: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential rate must be positive and finite, got {self.rate}")

    @property
    def mgf_sup(self) -> float:
        return float(self.rate)

    def mgf(self, s: float) -> float:
        if s >= self.rate:
            return math.inf
        return self.rate / (self.rate - s)

    def mgf_prime(self, s: float) -> float:
        if s >= self.rate:
            raise MGFDomainError(f"MGF derivative undefined at s={s} >= rate={self.rate}")
        return self.rate / (self.rate - s) ** 2

    def mean(self) -> float:
        return 1.0 / self.rate

    def tilt(self, xi: float) -> "Exponential":
        if xi >= self.rate:
            raise MGFDomainError(f"cannot tilt Exponential({self.rate}) by {xi}: MGF diverges")
        return Exponential(self.rate - xi)

    def cdf(self, x):
        x = np.maximum(x, 0.0)
        return -np.expm1(-self.rate * x)

    def sf(self, x):
        return np.exp(-self.rate * np.maximum(x, 0.0))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.rate, size=size)

    def params(self) -> Dict[str, float]:
        return {"rate": float(self.rate)}


def mgf(spec: DistributionSpec, s: float) -> float:
    """E[exp(s Z)]; ``inf`` outside the MGF domain."""
    return spec.mgf(s)


def mgf_prime(spec: DistributionSpec, s: float) -> float:
    return spec.mgf_prime(s)


def exp_tilt(spec: DistributionSpec, xi: float) -> DistributionSpec:
    """The law with MGF ``s -> mgf(spec, s + xi) / mgf(spec, xi)``."""
    return spec.tilt(xi)


def sample(spec: DistributionSpec, rng: np.random.Generator, size=None):
    return spec.sample(rng, size)


def from_dict(data: Dict[str, Any]) -> DistributionSpec:
    return DistributionSpec.from_dict(data)
