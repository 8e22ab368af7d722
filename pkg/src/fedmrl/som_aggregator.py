"""SOM-driven similarity weighting for server-side model aggregation.

Client parameter deltas are projected to a small fixed-dimension feature
space with a frozen random matrix, then fed to a 5x5 self-organizing map
that keeps training across rounds.  Each client's aggregation weight
combines its distance to the best matching unit with the cosine similarity
between its full parameter vector and the global model: closer-to-the-map
and more-aligned clients weigh more.  Weights are normalized to sum to the
client count, so the final average is a convex combination.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

DEFAULT_SOM_SIGMA0 = 2.5
DEFAULT_SOM_LR0 = 0.5


@dataclass
class SomGrid:
    """Rectangular lattice of prototype vectors with decaying lr/sigma."""

    weights: np.ndarray
    rows: int = 5
    cols: int = 5
    sigma0: float = DEFAULT_SOM_SIGMA0
    lr0: float = DEFAULT_SOM_LR0
    decay_horizon: float = 30.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape[0] != self.rows * self.cols:
            raise ConfigurationError("weights must hold rows*cols prototype vectors")
        if self.sigma0 <= 0 or self.lr0 < 0 or self.decay_horizon <= 0:
            raise ConfigurationError("sigma0 > 0, lr0 >= 0, decay_horizon > 0 required")

    @classmethod
    def initialized(
        cls,
        dim: int,
        rng,
        rows: int = 5,
        cols: int = 5,
        sigma0: float = DEFAULT_SOM_SIGMA0,
        lr0: float = DEFAULT_SOM_LR0,
        decay_horizon: float = 30.0,
    ) -> "SomGrid":
        weights = rng.normal(0.0, 0.1, size=(rows * cols, dim))
        return cls(weights, rows, cols, sigma0, lr0, decay_horizon)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def coordinates(self) -> np.ndarray:
        """(rows*cols, 2) grid coordinates in row-major order."""
        r, c = np.divmod(np.arange(self.rows * self.cols), self.cols)
        return np.column_stack([r, c]).astype(np.float64)

    def learning_rate(self, t: float) -> float:
        return self.lr0 * math.exp(-t / self.decay_horizon)

    def sigma(self, t: float) -> float:
        return self.sigma0 * math.exp(-t / self.decay_horizon)


@dataclass
class Projector:
    """Frozen random projection from parameter space to SOM feature space."""

    matrix: np.ndarray

    @classmethod
    def initialized(cls, dim: int, n_params: int, rng) -> "Projector":
        return cls(rng.normal(0.0, 1.0, size=(dim, n_params)) / math.sqrt(dim))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def project(projector: Projector, delta: np.ndarray) -> np.ndarray:
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (projector.matrix.shape[1],):
        raise ConfigurationError(
            f"delta length {delta.shape} != projector width {projector.matrix.shape[1]}"
        )
    return projector.matrix @ delta


def bmu(som: SomGrid, x: np.ndarray) -> tuple[int, int]:
    """Grid coordinate of the nearest prototype; ties break row-major."""
    diff = som.weights - np.asarray(x, dtype=np.float64)
    flat = int(np.argmin((diff * diff).sum(axis=1)))
    return divmod(flat, som.cols)


def som_update(som: SomGrid, x: np.ndarray, t: float) -> SomGrid:
    """Pull every prototype toward x, weighted by grid distance to the BMU.

    Mutates and returns the grid; lr(t) and sigma(t) both decay as
    exp(-t / decay_horizon).
    """
    x = np.asarray(x, dtype=np.float64)
    row, col = bmu(som, x)
    coords = som.coordinates()
    grid_d2 = (coords[:, 0] - row) ** 2 + (coords[:, 1] - col) ** 2
    sigma = som.sigma(t)
    influence = som.learning_rate(t) * np.exp(-grid_d2 / (2.0 * sigma * sigma))
    som.weights += influence[:, None] * (x - som.weights)
    return som


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; zero-norm inputs map to 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        warnings.warn("zero-norm vector in cosine similarity; treating as orthogonal")
        return 0.0
    return float(np.clip(float(a @ b) / (norm_a * norm_b), -1.0, 1.0))


def compute_alphas(
    som: SomGrid,
    local_params: list[np.ndarray],
    global_params: np.ndarray,
    projector: Projector,
    round_index: int,
) -> np.ndarray:
    """Per-client aggregation weights for this round.

    Projects each client's delta from the global model, trains the SOM on
    all of them (ascending client order), then scores each client by
    sim / (1 + bmu_distance) where sim = (1 + cosine(local, global)) / 2.
    Scores are normalized so the weights sum to the client count.
    """
    n = len(local_params)
    if n < 2:
        raise ConfigurationError("need at least two clients")
    global_params = np.asarray(global_params, dtype=np.float64)
    projected = [project(projector, np.asarray(p) - global_params) for p in local_params]
    for x in projected:
        som_update(som, x, round_index)
    scores = np.empty(n)
    for h, x in enumerate(projected):
        row, col = bmu(som, x)
        dist = float(np.linalg.norm(x - som.weights[row * som.cols + col]))
        sim = 0.5 * (1.0 + cosine_similarity(local_params[h], global_params))
        scores[h] = sim / (1.0 + dist)
    total = scores.sum()
    if total <= 0.0:
        warnings.warn("all similarity scores are zero; falling back to uniform weights")
        return np.ones(n)
    return n * scores / total


def weighted_average(params_list, weights) -> np.ndarray:
    """Sum of weight_h * params_h, accumulated in ascending client order."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(params_list) != weights.shape[0]:
        raise ConfigurationError("one weight per parameter vector required")
    first = np.asarray(params_list[0], dtype=np.float64)
    acc = np.zeros_like(first)
    for w, p in zip(weights, params_list):
        p = np.asarray(p, dtype=np.float64)
        if p.shape != first.shape:
            raise ConfigurationError("parameter vectors disagree on length")
        acc += w * p
    return acc


def aggregate(local_params, alphas) -> np.ndarray:
    """Weighted mean (1/H) * sum(alpha_h * w_h); alpha must be a valid weighting."""
    alphas = np.asarray(alphas, dtype=np.float64)
    n = len(local_params)
    if alphas.shape != (n,):
        raise ConfigurationError("one alpha per client required")
    if np.any(alphas < 0.0):
        raise ConfigurationError("alphas must be nonnegative")
    if abs(float(alphas.sum()) - n) > 1e-9:
        raise ConfigurationError(f"alphas must sum to {n}, got {alphas.sum()}")
    return weighted_average(local_params, alphas / n)
