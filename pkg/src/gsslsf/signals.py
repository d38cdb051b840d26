"""Ground-truth graph signals, noisy mixtures and SNR metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .errors import DegenerateSignal, DimensionMismatch, EmptyList, ZeroReference
from .spectral import EigenPairs

__all__ = [
    "SNR_CAP_DB",
    "Bandlimited",
    "HeatKernel",
    "NoiseSpec",
    "MixtureInstance",
    "normalize",
    "gen_bandlimited",
    "gen_heat",
    "gen_source",
    "mix",
    "snr_db",
    "average_snr",
    "write_instance",
]

SNR_CAP_DB = 300.0
_MIN_STD = 1e-10


@dataclass(frozen=True)
class Bandlimited:
    """Random combination of the first ``num_eigs`` non-constant eigenvectors."""

    num_eigs: int

    def __post_init__(self):
        if self.num_eigs < 1:
            raise ValueError(f"num_eigs must be >= 1, got {self.num_eigs}")


@dataclass(frozen=True)
class HeatKernel:
    """Random spectral coefficients shaped by ``exp(-tau * lambda)``."""

    tau: float

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")


@dataclass(frozen=True)
class NoiseSpec:
    """Either a fixed noise level ``sigma`` or a target input SNR in dB."""

    sigma: float | None = None
    snr_db: float | None = None

    def __post_init__(self):
        if (self.sigma is None) == (self.snr_db is None):
            raise ValueError("give exactly one of sigma or snr_db")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    @classmethod
    def fixed(cls, sigma: float) -> "NoiseSpec":
        return cls(sigma=sigma)

    @classmethod
    def target(cls, snr_db: float) -> "NoiseSpec":
        return cls(snr_db=snr_db)


@dataclass(frozen=True)
class MixtureInstance:
    """One observed mixture together with the signals that produced it.

    ``noise`` is stored as ``mixture - sources.sum(axis=0)`` so the
    additive identity holds exactly in floating point.
    """

    sources: np.ndarray  # (P, N)
    noise: np.ndarray
    mixture: np.ndarray
    noise_spec: NoiseSpec
    seed: int | None = None

    @property
    def num_sources(self) -> int:
        return self.sources.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.sources.shape[1]

    def input_snr_db(self) -> float:
        clean = self.sources.sum(axis=0)
        return 10.0 * math.log10(float(clean @ clean) / float(self.noise @ self.noise))


def normalize(x) -> np.ndarray:
    """Center and scale to unit population variance."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    std = math.sqrt(float(x @ x) / x.size)
    if std < _MIN_STD:
        raise DegenerateSignal(f"signal has near-zero variance ({std:.3g})")
    return x / std


def _with_retry(draw):
    try:
        return normalize(draw())
    except DegenerateSignal:
        return normalize(draw())


def gen_bandlimited(eig: EigenPairs, num_eigs: int, rng) -> np.ndarray:
    """Unit-variance signal in the span of the first ``num_eigs`` non-constant eigenvectors."""
    n = eig.vectors.shape[0]
    if not (1 <= num_eigs <= n - 1):
        raise ValueError(f"num_eigs must be in [1, {n - 1}], got {num_eigs}")
    rng = np.random.default_rng(rng)
    band = eig.vectors[:, 1 : num_eigs + 1]
    return _with_retry(lambda: band @ rng.standard_normal(num_eigs))


def gen_heat(eig: EigenPairs, tau: float, rng) -> np.ndarray:
    """Unit-variance heat-kernel signal ``U exp(-tau Lambda) c``."""
    rng = np.random.default_rng(rng)
    response = np.exp(-tau * eig.values)
    n = eig.vectors.shape[0]
    return _with_retry(lambda: eig.vectors @ (response * rng.standard_normal(n)))


def gen_source(eig: EigenPairs, kind, rng) -> np.ndarray:
    if isinstance(kind, Bandlimited):
        return gen_bandlimited(eig, kind.num_eigs, rng)
    if isinstance(kind, HeatKernel):
        return gen_heat(eig, kind.tau, rng)
    raise TypeError(f"unknown source kind {kind!r}")


def mix(sources, noise_spec: NoiseSpec, rng, seed: int | None = None) -> MixtureInstance:
    """Sum the sources and add Gaussian noise.

    In target-SNR mode a standard normal draw is rescaled so the realised
    ratio ``||sum of sources||^2 / ||noise||^2`` matches the target.
    """
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    clean = sources.sum(axis=0)
    rng = np.random.default_rng(rng)
    draw = rng.standard_normal(clean.shape[0])
    if noise_spec.sigma is not None:
        eps = noise_spec.sigma * draw
    else:
        scale = np.linalg.norm(clean) / np.linalg.norm(draw)
        eps = draw * (scale * 10.0 ** (-noise_spec.snr_db / 20.0))
    mixture = clean + eps
    noise = mixture - clean
    for a in (sources, noise, mixture):
        a.setflags(write=False)
    return MixtureInstance(sources, noise, mixture, noise_spec, seed)


def snr_db(x_true, x_est) -> float:
    """``10 log10(||x||^2 / ||x - x_est||^2)``, capped at +300 dB."""
    x_true = np.asarray(x_true, dtype=float)
    x_est = np.asarray(x_est, dtype=float)
    if x_true.shape != x_est.shape:
        raise DimensionMismatch(f"shapes differ: {x_true.shape} vs {x_est.shape}")
    ref = float(x_true @ x_true)
    if ref == 0.0:
        raise ZeroReference("reference signal is identically zero")
    err = x_true - x_est
    err = float(err @ err)
    if err == 0.0 or ref / err >= 10.0 ** (SNR_CAP_DB / 10.0):
        return SNR_CAP_DB
    return 10.0 * math.log10(ref / err)


def average_snr(values) -> float:
    values = list(values)
    if not values:
        raise EmptyList("cannot average an empty list of SNRs")
    return float(np.mean(values))


def write_instance(inst: MixtureInstance, path: str | PathLike) -> None:
    """CSV with columns ``node, source_1..source_P, noise, mixture``."""
    P = inst.num_sources
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", *(f"source_{p + 1}" for p in range(P)), "noise", "mixture"])
        for i in range(inst.num_nodes):
            w.writerow(
                [i, *(repr(float(v)) for v in inst.sources[:, i]),
                 repr(float(inst.noise[i])), repr(float(inst.mixture[i]))]
            )
