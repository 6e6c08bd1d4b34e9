"""Kernel scoring of goal densities, target grids and grid divergences.

A goal ``g`` is scored by how much goal mass lies near it under an
isotropic Gaussian RBF kernel::

    k(g, x) = exp(-|g - x|^2 / (2 sigma^2))
    mu(g)   = integral of k(g, x) * density(x) dx

Uniform rectangles and Gaussian mixtures have closed forms; any density can
be estimated by Monte Carlo. Scores at grid-cell centers, normalized and
floored, form the target distribution that virtual goals are steered toward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import erf
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigurationError, ShapeError

KL_FLOOR = 1e-12


# -- goal distribution specs --------------------------------------------------

@dataclass(frozen=True)
class UniformRect:
    low: tuple
    high: tuple

    def __post_init__(self):
        low = tuple(float(v) for v in self.low)
        high = tuple(float(v) for v in self.high)
        if len(low) != len(high) or not low:
            raise ConfigurationError("rectangle bounds must have the same positive length")
        if any(h <= lo for lo, h in zip(low, high)):
            raise ConfigurationError(f"degenerate rectangle {low} -> {high}")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def dim(self) -> int:
        return len(self.low)

    @property
    def area(self) -> float:
        return float(np.prod(np.subtract(self.high, self.low)))

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.low) & (p <= self.high), axis=1)

    def translated(self, offset) -> "UniformRect":
        return UniformRect(np.add(self.low, offset), np.add(self.high, offset))


@dataclass(frozen=True)
class GaussianMixture:
    weights: tuple
    means: tuple
    covariances: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.covariances, dtype=np.float64)
        if cov.ndim == 2:
            cov = cov[None]
        if not (len(w) == mu.shape[0] == cov.shape[0]) or cov.shape[1:] != (mu.shape[1],) * 2:
            raise ConfigurationError("mixture weights, means and covariances disagree in shape")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-9:
            raise ConfigurationError("mixture weights must lie in [0, 1] and sum to 1")
        for c in cov:
            if not np.allclose(c, c.T, atol=1e-12):
                raise ConfigurationError("mixture covariance is not symmetric")
            try:
                np.linalg.cholesky(c)
            except np.linalg.LinAlgError as exc:
                raise ConfigurationError("mixture covariance is not positive definite") from exc
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def translated(self, offset) -> "GaussianMixture":
        return GaussianMixture(self.weights, self.means + np.asarray(offset), self.covariances)


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray

    def __post_init__(self):
        pts = check_array(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def translated(self, offset) -> "SampleSet":
        return SampleSet(self.points + np.asarray(offset))


GoalDistributionSpec = Union[UniformRect, GaussianMixture, SampleSet]


@dataclass(frozen=True)
class GridSpec:
    """``m`` cells along goal axis 0 and ``n`` along goal axis 1 over ``bounds``."""

    m: int
    n: int
    bounds: UniformRect

    def __post_init__(self):
        if int(self.m) < 1 or int(self.n) < 1:
            raise ConfigurationError("grid needs at least one cell per axis")
        if self.bounds.dim != 2:
            raise ConfigurationError("grids are defined over 2-D goal spaces")

    @property
    def shape(self) -> tuple:
        return (self.m, self.n)

    @property
    def cell_size(self) -> np.ndarray:
        return (np.asarray(self.bounds.high) - np.asarray(self.bounds.low)) / (self.m, self.n)

    def centers(self) -> np.ndarray:
        """Cell centers as an ``(m * n, 2)`` array in row-major cell order."""
        lo = np.asarray(self.bounds.low)
        h = self.cell_size
        xs = lo[0] + (np.arange(self.m) + 0.5) * h[0]
        ys = lo[1] + (np.arange(self.n) + 0.5) * h[1]
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def bin(self, goals) -> tuple:
        """Cell indices ``(i, j)`` of each goal; goals outside the bounds go to the nearest edge cell."""
        g = np.atleast_2d(np.asarray(goals, dtype=np.float64))
        rel = (g[:, :2] - np.asarray(self.bounds.low)) / self.cell_size
        i = np.clip(np.floor(rel[:, 0]).astype(np.int64), 0, self.m - 1)
        j = np.clip(np.floor(rel[:, 1]).astype(np.int64), 0, self.n - 1)
        return i, j

    def flat_bin(self, goals) -> np.ndarray:
        i, j = self.bin(goals)
        return i * self.n + j

    def translated(self, offset) -> "GridSpec":
        return GridSpec(self.m, self.n, self.bounds.translated(offset))


def unit_grid(m: int = 20, n: int = 20) -> GridSpec:
    return GridSpec(m, n, UniformRect((0.0, 0.0), (1.0, 1.0)))


@dataclass
class GridDistribution:
    values: np.ndarray
    grid: GridSpec | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError("grid distribution values must be a 2-D array")
        if self.grid is not None and self.values.shape != self.grid.shape:
            raise ShapeError(f"values {self.values.shape} do not match grid {self.grid.shape}")

    @property
    def shape(self):
        return self.values.shape

    def is_valid(self, atol=1e-9) -> bool:
        return bool(np.all(self.values >= 0) and abs(self.values.sum() - 1.0) <= atol)

    def at(self, goals) -> np.ndarray:
        """Cell value for each goal."""
        if self.grid is None:
            raise ConfigurationError("distribution has no grid attached")
        i, j = self.grid.bin(goals)
        return self.values[i, j]


# -- scoring ------------------------------------------------------------------

def _check_sigma(sigma):
    if not sigma > 0:
        raise ConfigurationError(f"kernel width must be positive, got {sigma}")


def kernel(g1, g2, sigma: float):
    """Gaussian RBF kernel; broadcasts over leading dimensions."""
    _check_sigma(sigma)
    d = np.asarray(g1, dtype=np.float64) - np.asarray(g2, dtype=np.float64)
    out = np.exp(-np.sum(d * d, axis=-1) / (2.0 * sigma * sigma))
    return float(out) if np.ndim(out) == 0 else out


def score_uniform(g, rect: UniformRect, sigma: float):
    """Kernel score of a uniform density on ``rect`` (normalized to 1/area).

    The kernel factorizes over axes, so the rectangle integral is a product
    of one-dimensional Gaussian integrals expressed with ``erf``.
    """
    _check_sigma(sigma)
    pts = np.asarray(g, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != rect.dim:
        raise ShapeError(f"goal dimension {pts.shape[1]} != rectangle dimension {rect.dim}")
    s = sigma * math.sqrt(2.0)
    lo = np.asarray(rect.low)
    hi = np.asarray(rect.high)
    per_axis = sigma * math.sqrt(math.pi / 2.0) * (erf((hi - pts) / s) - erf((lo - pts) / s))
    out = np.prod(per_axis, axis=1) / rect.area
    return float(out[0]) if single else out


def score_gmm(g, gmm: GaussianMixture, sigma: float):
    """Kernel score of a Gaussian mixture in closed form.

    Convolving a Gaussian with the (unnormalized) kernel gives
    ``(2 pi)^(n/2) sigma^n * N(g | mean_i, cov_i + sigma^2 I)`` per component.
    """
    _check_sigma(sigma)
    pts = np.asarray(g, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    n = gmm.dim
    if pts.shape[1] != n:
        raise ShapeError(f"goal dimension {pts.shape[1]} != mixture dimension {n}")
    out = np.zeros(pts.shape[0])
    for p, mu, cov in zip(gmm.weights, gmm.means, gmm.covariances):
        out += p * _gaussian_pdf(pts, mu, cov + sigma * sigma * np.eye(n))
    out *= (2.0 * math.pi) ** (n / 2.0) * sigma ** n
    return float(out[0]) if single else out


def _gaussian_pdf(x, mean, cov):
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("covariance is not positive definite") from exc
    z = np.linalg.solve(chol, (x - mean).T)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return np.exp(-0.5 * np.sum(z * z, axis=0) - 0.5 * (len(mean) * math.log(2 * math.pi) + log_det))


def score_samples(g, samples: SampleSet, sigma: float):
    """Kernel score of an empirical density: the mean kernel value over the samples."""
    pts = np.atleast_2d(np.asarray(g, dtype=np.float64))
    out = np.array([kernel(p, samples.points, sigma).mean() for p in pts])
    return float(out[0]) if np.ndim(g) == 1 else out


def score(g, spec: GoalDistributionSpec, sigma: float):
    """Dispatch to the closed form (or sample average) matching ``spec``."""
    if isinstance(spec, UniformRect):
        return score_uniform(g, spec, sigma)
    if isinstance(spec, GaussianMixture):
        return score_gmm(g, spec, sigma)
    if isinstance(spec, SampleSet):
        return score_samples(g, spec, sigma)
    raise ConfigurationError(f"unsupported goal distribution {type(spec).__name__}")


def density_function(spec: GoalDistributionSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise density of a uniform or mixture spec, for Monte-Carlo integration."""
    if isinstance(spec, UniformRect):
        return lambda x: spec.contains(x) / spec.area
    if isinstance(spec, GaussianMixture):
        def pdf(x):
            x = np.atleast_2d(x)
            return sum(p * _gaussian_pdf(x, m, c)
                       for p, m, c in zip(spec.weights, spec.means, spec.covariances))
        return pdf
    raise ConfigurationError("sample sets have no pointwise density")


def score_monte_carlo(g, density, sigma: float, n_samples: int, proposal, rng) -> float:
    """Monte-Carlo estimate of the kernel score of a single goal.

    ``proposal`` is either a :class:`UniformRect` (plain estimator: volume
    times the mean of ``k * density`` over uniform draws) or the string
    ``"gaussian"`` (importance sampling from ``N(g, sigma^2 I)``, weighting
    each draw by ``k * density / h``).
    """
    _check_sigma(sigma)
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    g = np.asarray(g, dtype=np.float64).ravel()
    n = g.shape[0]
    if isinstance(proposal, UniformRect):
        x = rng.uniform(proposal.low, proposal.high, size=(n_samples, n))
        return float(proposal.area * np.mean(kernel(g, x, sigma) * density(x)))
    if proposal == "gaussian":
        x = g + sigma * rng.standard_normal((n_samples, n))
        d2 = np.sum((x - g) ** 2, axis=1)
        h = np.exp(-d2 / (2 * sigma * sigma)) / (2 * math.pi * sigma * sigma) ** (n / 2)
        # k / h is the constant (2 pi sigma^2)^(n/2) for this proposal
        return float(np.mean(np.exp(-d2 / (2 * sigma * sigma)) * density(x) / h))
    raise ConfigurationError(f"unknown proposal {proposal!r}")


# -- grids --------------------------------------------------------------------

def build_target_grid(spec: GoalDistributionSpec, sigma: float, grid: GridSpec,
                      floor: float = 0.002) -> GridDistribution:
    """Score cell centers, normalize, lift cells below ``floor`` to it, renormalize."""
    if floor < 0 or floor * grid.m * grid.n >= 1:
        raise ConfigurationError(f"floor {floor} is too large for a {grid.m}x{grid.n} grid")
    mu = np.asarray(score(grid.centers(), spec, sigma), dtype=np.float64)
    total = mu.sum()
    if not total > 0:
        raise ConfigurationError("all cell scores are zero; widen sigma or move the grid")
    q = np.maximum(mu / total, floor)
    return GridDistribution((q / q.sum()).reshape(grid.shape), grid)


def histogram(goals, grid: GridSpec) -> np.ndarray:
    """Cell counts of ``goals`` (edge-clamped)."""
    goals = np.asarray(goals, dtype=np.float64)
    if goals.size == 0:
        return np.zeros(grid.shape)
    flat = np.bincount(grid.flat_bin(goals), minlength=grid.m * grid.n)
    return flat.reshape(grid.shape).astype(np.float64)


def kl_divergence(p, q) -> float:
    """``sum p * log(p / max(q, 1e-12))`` over cells with ``p > 0`` (natural log)."""
    pv = p.values if isinstance(p, GridDistribution) else np.asarray(p, dtype=np.float64)
    qv = q.values if isinstance(q, GridDistribution) else np.asarray(q, dtype=np.float64)
    if pv.shape != qv.shape:
        raise ShapeError(f"cannot compare distributions of shapes {pv.shape} and {qv.shape}")
    mask = pv > 0
    return float(np.sum(pv[mask] * np.log(pv[mask] / np.maximum(qv[mask], KL_FLOOR))))


# -- grid CSV -----------------------------------------------------------------
#
# One comment header line, then m rows of n comma-separated values:
#   # grid m=20 n=20 low=0,0 high=1,1 sigma=0.2 floor=0.002
# Row i is goal-axis-0 bin i; column j is goal-axis-1 bin j.

def write_grid_csv(path, dist: GridDistribution, **header):
    grid = dist.grid
    fields = [f"m={dist.shape[0]}", f"n={dist.shape[1]}"]
    if grid is not None:
        fields.append("low=" + ",".join(repr(v) for v in grid.bounds.low))
        fields.append("high=" + ",".join(repr(v) for v in grid.bounds.high))
    fields.extend(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in header.items())
    with open(path, "w") as fh:
        fh.write("# grid " + " ".join(fields) + "\n")
        for row in dist.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def read_grid_csv(path) -> tuple[GridDistribution, dict]:
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# grid"):
            raise ConfigurationError(f"{path} is not a grid CSV")
        meta = dict(item.split("=", 1) for item in first[len("# grid"):].split())
        values = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    grid = None
    if "low" in meta and "high" in meta:
        low = tuple(float(v) for v in meta["low"].split(","))
        high = tuple(float(v) for v in meta["high"].split(","))
        grid = GridSpec(int(meta["m"]), int(meta["n"]), UniformRect(low, high))
    return GridDistribution(values, grid), meta


class TargetGridEstimator(BaseEstimator):
    """Fit a goal distribution into a floored target grid.

    ``fit(spec)`` computes ``target_`` (a :class:`GridDistribution`);
    ``predict_proba(goals)`` returns the target mass of each goal's cell and
    ``score_samples(goals)`` the raw kernel score of each goal.
    """

    def __init__(self, sigma=0.2, m=20, n=20, low=(0.0, 0.0), high=(1.0, 1.0), floor=0.002):
        self.sigma = sigma
        self.m = m
        self.n = n
        self.low = low
        self.high = high
        self.floor = floor

    def fit(self, spec, y=None):
        self.grid_ = GridSpec(self.m, self.n, UniformRect(self.low, self.high))
        self.spec_ = spec
        self.target_ = build_target_grid(spec, self.sigma, self.grid_, self.floor)
        return self

    def predict_proba(self, goals):
        check_is_fitted(self, "target_")
        return self.target_.at(check_array(goals, dtype=np.float64))

    def score_samples(self, goals):
        check_is_fitted(self, "spec_")
        return np.atleast_1d(score(check_array(goals, dtype=np.float64), self.spec_, self.sigma))
