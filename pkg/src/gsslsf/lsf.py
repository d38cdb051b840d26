"""Learnable spectral filter separation.

Each source is modelled as ``U_p diag(alpha_p) U_p^T z``: a fixed random
excitation ``z`` projected onto the low-frequency band of graph ``p``,
reweighted by trainable gains ``alpha_p`` and mapped back to the vertices.
The gains are fitted to the observed mixture either with Adam or, since
the model is linear in the stacked gains, by least squares.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonFiniteLoss
from .spectral import TruncatedBasis, project

__all__ = [
    "LatentInput",
    "SpectralBranch",
    "LsfModel",
    "AdamConfig",
    "FitReport",
    "DesignMatrix",
    "Adam",
    "init_model",
    "branch_forward",
    "model_forward",
    "loss",
    "gradient",
    "adam_fit",
    "assemble_design_matrix",
    "solve_closed_form",
    "fit_closed_form",
    "extract_components",
    "write_loss_trace",
]

logger = logging.getLogger(__name__)

# |z_hat| below this makes a spectral mode unreachable
DEGENERATE_EXCITATION = 1e-12


@dataclass(frozen=True)
class LatentInput:
    """Fixed excitation shared by all branches."""

    z: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        if z.ndim != 1:
            raise DimensionMismatch(f"latent input must be 1-D, got shape {z.shape}")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @classmethod
    def draw(cls, n: int, seed) -> "LatentInput":
        """I.i.d. standard normal excitation of length ``n``.

        ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
        """
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal(n), seed if isinstance(seed, int) else None)

    @property
    def num_nodes(self) -> int:
        return self.z.shape[0]


@dataclass
class SpectralBranch:
    basis: TruncatedBasis
    z_hat: np.ndarray
    alpha: np.ndarray

    @property
    def k(self) -> int:
        return self.basis.k


@dataclass
class LsfModel:
    latent: LatentInput
    branches: list[SpectralBranch]

    @property
    def num_nodes(self) -> int:
        return self.latent.num_nodes

    @property
    def num_params(self) -> int:
        return sum(b.k for b in self.branches)

    @property
    def alphas(self) -> list[np.ndarray]:
        return [b.alpha.copy() for b in self.branches]

    def stacked_alpha(self) -> np.ndarray:
        return np.concatenate([b.alpha for b in self.branches])

    def set_stacked_alpha(self, alpha) -> None:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.num_params,):
            raise DimensionMismatch(
                f"expected {self.num_params} stacked gains, got shape {alpha.shape}"
            )
        offset = 0
        for b in self.branches:
            b.alpha = alpha[offset : offset + b.k].copy()
            offset += b.k


@dataclass
class AdamConfig:
    """Optimizer settings for :func:`adam_fit`.

    The step size follows a cosine decay from ``lr`` to ``lr_min`` over
    ``max_iter`` iterations (``schedule="constant"`` keeps it at ``lr``).
    Early stopping triggers once the relative loss change stays below
    ``tol`` for ``patience`` consecutive iterations.
    """

    lr: float = 5.0
    lr_min: float = 1e-4
    schedule: str = "cosine"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iter: int = 5000
    tol: float = 1e-10
    patience: int = 50

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.max_iter < 1:
            raise ValueError(f"iteration budget must be >= 1, got {self.max_iter}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass
class FitReport:
    loss_trace: list[float]
    iterations_run: int
    final_alphas: list[np.ndarray]
    solver: str
    status: str = "converged"
    extra: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]


@dataclass(frozen=True)
class DesignMatrix:
    """``A = [B_1 ... B_P]`` with ``B_p = U_p diag(z_hat_p)``; ``sizes`` holds each ``k_p``."""

    A: np.ndarray
    sizes: tuple[int, ...]

    def block(self, p: int) -> np.ndarray:
        start = sum(self.sizes[:p])
        return self.A[:, start : start + self.sizes[p]]

    def split(self, alpha) -> list[np.ndarray]:
        bounds = np.cumsum(self.sizes)[:-1]
        return np.split(np.asarray(alpha, dtype=float), bounds)


def init_model(bases: list[TruncatedBasis], latent: LatentInput) -> LsfModel:
    """Build a model with zero gains and precomputed projected excitations."""
    if not bases:
        raise ValueError("need at least one basis")
    branches = []
    for p, basis in enumerate(bases):
        if basis.num_nodes != latent.num_nodes:
            raise DimensionMismatch(
                f"basis {p} has N={basis.num_nodes}, latent input has N={latent.num_nodes}"
            )
        z_hat = project(basis, latent.z)
        z_hat.setflags(write=False)
        weak = np.flatnonzero(np.abs(z_hat) < DEGENERATE_EXCITATION)
        if weak.size:
            logger.warning(
                "branch %d: modes %s receive no excitation and cannot be fitted",
                p, weak.tolist(),
            )
        branches.append(SpectralBranch(basis, z_hat, np.zeros(basis.k)))
    return LsfModel(latent, branches)


def _check_mixture(model: LsfModel, m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (model.num_nodes,):
        raise DimensionMismatch(f"mixture of shape {m.shape} for N={model.num_nodes}")
    return m


def branch_forward(branch: SpectralBranch) -> np.ndarray:
    """Mean-subtracted branch output ``U diag(alpha) z_hat``."""
    x = branch.basis.vectors @ (branch.alpha * branch.z_hat)
    return x - x.mean()


def model_forward(model: LsfModel) -> np.ndarray:
    """Reconstructed mixture, the sum of all branch outputs."""
    out = np.zeros(model.num_nodes)
    for b in model.branches:
        out += branch_forward(b)
    return out


def loss(model: LsfModel, m) -> float:
    """Squared reconstruction error ``||m - m_hat||^2``."""
    m = _check_mixture(model, m)
    r = m - model_forward(model)
    return float(r @ r)


def gradient(model: LsfModel, m) -> list[np.ndarray]:
    """Gradient of :func:`loss` with respect to each branch's gains."""
    m = _check_mixture(model, m)
    r = model_forward(model) - m
    # forward includes the centering projector, which is symmetric
    r = r - r.mean()
    return [2.0 * b.z_hat * (b.basis.vectors.T @ r) for b in model.branches]


class Adam:
    """Plain Adam on a single flat parameter vector."""

    def __init__(self, lr=0.02, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_fit(model: LsfModel, m, cfg: AdamConfig | None = None, callback=None) -> FitReport:
    """Fit the gains in place with Adam.

    ``loss_trace[0]`` is the loss at the starting gains and entry ``i`` the
    loss after ``i`` updates. ``callback(it, model)``, if given, runs after
    every update.

    Raises
    ------
    NonFiniteLoss
        If the objective overflows, usually a sign of a too-large step.
    """
    cfg = cfg or AdamConfig()
    m = _check_mixture(model, m)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    trace = [loss(model, m)]
    calm = 0
    status = "max_iter"
    for it in range(1, cfg.max_iter + 1):
        if cfg.schedule == "cosine":
            frac = (it - 1) / cfg.max_iter
            opt.lr = cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + math.cos(math.pi * frac))
        grad = np.concatenate(gradient(model, m))
        model.set_stacked_alpha(opt.step(model.stacked_alpha(), grad))
        if callback is not None:
            callback(it, model)
        cur = loss(model, m)
        if not math.isfinite(cur):
            raise NonFiniteLoss(f"loss became {cur} at iteration {it} (lr={cfg.lr})")
        prev = trace[-1]
        trace.append(cur)
        rel = abs(cur - prev) / max(abs(prev), np.finfo(float).tiny)
        calm = calm + 1 if rel < cfg.tol else 0
        if calm >= cfg.patience:
            status = "converged"
            break

    if trace[-1] > trace[0]:
        status = "diverged"
        logger.warning(
            "Adam ended above its starting loss (%.6g > %.6g); lower the learning rate",
            trace[-1], trace[0],
        )
    return FitReport(trace, len(trace) - 1, model.alphas, "gradient", status)


def assemble_design_matrix(model: LsfModel) -> DesignMatrix:
    blocks = [b.basis.vectors * b.z_hat for b in model.branches]
    return DesignMatrix(np.hstack(blocks), tuple(b.k for b in model.branches))


def solve_closed_form(A: DesignMatrix, m) -> tuple[np.ndarray, FitReport]:
    """Minimum-norm least-squares gains for ``min ||m - A alpha||^2``.

    Uses an SVD-based LAPACK driver, so rank-deficient designs (e.g. two
    branches sharing a band) get the minimum-norm solution.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (A.A.shape[0],):
        raise DimensionMismatch(f"mixture of shape {m.shape} for A of shape {A.A.shape}")
    alpha, _, rank, sv = scipy.linalg.lstsq(A.A, m, lapack_driver="gelsd")
    r = m - A.A @ alpha
    report = FitReport(
        [float(r @ r)], 1, A.split(alpha), "closed_form",
        extra={"rank": int(rank), "singular_values": sv},
    )
    return alpha, report


def fit_closed_form(model: LsfModel, m) -> FitReport:
    """Solve for the optimal gains and write them into ``model``."""
    m = _check_mixture(model, m)
    alpha, report = solve_closed_form(assemble_design_matrix(model), m)
    model.set_stacked_alpha(alpha)
    return report


def extract_components(model: LsfModel) -> list[np.ndarray]:
    """Per-branch zero-mean component estimates."""
    return [branch_forward(b) for b in model.branches]


def write_loss_trace(report: FitReport, path: str | PathLike) -> None:
    """Write the loss trace as ``iteration,loss`` CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss"])
        for i, v in enumerate(report.loss_trace):
            w.writerow([i, repr(float(v))])
