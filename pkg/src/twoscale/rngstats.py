"""Seedable randomness and the matrix-variate primitives everything else consumes.

All sampling goes through explicit ``numpy.random.Generator`` handles. Child
streams are derived from a root seed plus an integer key tuple, so results do
not depend on loop scheduling and any sub-computation can be replayed in
isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import AllWeightsZero, DimensionMismatch, NotPositiveDefinite

LOG_2PI = float(np.log(2.0 * np.pi))

RESAMPLING_SCHEMES = ("multinomial", "systematic")


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (seed, key); independent of call order."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def ensure_spd(matrix, name: str = "matrix", rtol: float = 1e-10) -> np.ndarray:
    """Validate symmetry, return the symmetrized float copy.

    Positive definiteness itself is checked wherever a Cholesky factor is
    taken; this only guards the cheap structural invariants.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    scale = max(float(np.abs(m).max(initial=0.0)), np.finfo(float).tiny)
    if float(np.abs(m - m.T).max(initial=0.0)) > rtol * scale:
        raise NotPositiveDefinite(f"{name} is not symmetric within {rtol:g} relative")
    return 0.5 * (m + m.T)


def cholesky(matrix, name: str = "matrix") -> np.ndarray:
    """Lower-triangular factor L with L @ L.T equal to the input."""
    m = ensure_spd(matrix, name=name)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} has a non-positive pivot: {exc}") from exc


def validate_spd(matrix, name: str = "matrix") -> np.ndarray:
    """Symmetrize and require a successful Cholesky factorization."""
    m = ensure_spd(matrix, name=name)
    cholesky(m, name=name)
    return m


class CholCov:
    """An SPD covariance held in Cholesky form, with vectorized density and sampling."""

    def __init__(self, cov, name: str = "covariance"):
        self.cov = ensure_spd(cov, name=name)
        self.chol = cholesky(self.cov, name=name)
        self.dim = self.cov.shape[0]
        self._half_logdet = float(np.sum(np.log(np.diag(self.chol))))

    def logpdf_many(self, x, mean) -> np.ndarray:
        """Gaussian log-density of rows of ``x`` under row-wise means.

        Either argument may be a single vector; shapes broadcast to (n, dim).
        """
        resid = np.atleast_2d(np.asarray(x, dtype=float) - np.asarray(mean, dtype=float))
        if resid.shape[0] == 0:
            return np.empty(0)
        if not np.all(np.isfinite(resid)):
            # Non-finite residuals get -inf density instead of tripping the
            # triangular solve; fully degenerate ensembles surface later as
            # AllWeightsZero.
            out = np.full(resid.shape[0], -np.inf)
            ok = np.all(np.isfinite(resid), axis=1)
            if np.any(ok):
                out[ok] = self.logpdf_many(resid[ok], 0.0)
            return out
        z = solve_triangular(self.chol, resid.T, lower=True, check_finite=False)
        return -0.5 * np.sum(z * z, axis=0) - self._half_logdet - 0.5 * self.dim * LOG_2PI

    def logpdf(self, x, mean) -> float:
        return float(self.logpdf_many(x, mean)[0])

    def sample_many(self, means, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n vectors around ``means`` ((n, dim) or a single (dim,) vector)."""
        if n == 0:
            return np.empty((0, self.dim))
        z = rng.standard_normal((n, self.dim))
        return np.asarray(means, dtype=float) + z @ self.chol.T

    def sample(self, mean, rng: np.random.Generator) -> np.ndarray:
        return self.sample_many(mean, 1, rng)[0]


def mvn_sample(mean, cov, rng: np.random.Generator) -> np.ndarray:
    """One multivariate normal draw via the Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=float)
    factor = CholCov(cov)
    if mean.shape != (factor.dim,):
        raise DimensionMismatch(
            f"mean has shape {mean.shape}, covariance is {factor.dim}x{factor.dim}"
        )
    return factor.sample(mean, rng)


def mvn_logpdf(x, mean, cov) -> float:
    """Exact multivariate normal log-density via Cholesky solve."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    factor = CholCov(cov)
    if x.shape != (factor.dim,) or mean.shape != (factor.dim,):
        raise DimensionMismatch(
            f"x {x.shape} / mean {mean.shape} do not match covariance dim {factor.dim}"
        )
    return factor.logpdf(x, mean)


@dataclass(frozen=True)
class IwParams:
    """Inverse-Wishart parameters: scale matrix and degrees of freedom."""

    scale: np.ndarray
    dof: float

    def __post_init__(self):
        object.__setattr__(self, "scale", validate_spd(self.scale, name="IW scale"))
        object.__setattr__(self, "dof", float(self.dof))
        if not self.dof > self.dim - 1:
            raise ValueError(
                f"IW dof must exceed dim-1 ({self.dim - 1}) for a proper distribution, got {self.dof}"
            )

    @property
    def dim(self) -> int:
        return self.scale.shape[0]

    def mean(self) -> np.ndarray:
        """Closed-form mean, defined for dof > dim + 1."""
        denom = self.dof - self.dim - 1
        if denom <= 0:
            raise ValueError(f"IW mean undefined for dof {self.dof} <= dim+1 ({self.dim + 1})")
        return self.scale / denom


def inv_wishart_sample(params: IwParams, rng: np.random.Generator) -> np.ndarray:
    """Draw an SPD matrix from the inverse-Wishart distribution.

    Construction: Bartlett factor of a Wishart draw on the inverted scale,
    then inversion through Cholesky. No rejection, always SPD.
    """
    p = params.dim
    scale_chol = cholesky(params.scale, name="IW scale")
    # Bartlett lower-triangular factor: chi distributed diagonal, N(0,1) below.
    bart = np.zeros((p, p))
    for i in range(p):
        bart[i, i] = np.sqrt(rng.chisquare(params.dof - i))
    idx = np.tril_indices(p, k=-1)
    bart[idx] = rng.standard_normal(len(idx[0]))
    # W = C A A' C' with C C' = scale^{-1}; take C = L^{-T} from scale = L L'.
    m = solve_triangular(scale_chol.T, bart, lower=False, check_finite=False)
    w = m @ m.T
    w_chol = cholesky(w, name="Wishart draw")
    inv_chol = solve_triangular(w_chol, np.eye(p), lower=True, check_finite=False)
    draw = inv_chol.T @ inv_chol
    return 0.5 * (draw + draw.T)


def normalize_log_weights(log_weights) -> np.ndarray:
    """Max-shifted exponentiation onto the probability simplex.

    Raises AllWeightsZero if every entry is -inf (or any is non-finite in a
    way that forces the shifted maximum below representability).
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0:
        raise AllWeightsZero("no weights to normalize")
    top = float(np.max(lw))
    if not np.isfinite(top):
        raise AllWeightsZero("all log-weights are -inf or non-finite")
    w = np.exp(lw - top)
    return w / w.sum()


def categorical_sample(weights, rng: np.random.Generator) -> int:
    """Draw index i with probability weights[i]/sum(weights)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DimensionMismatch(f"weights must be a nonempty vector, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise AllWeightsZero("all categorical weights are zero")
    cdf = np.cumsum(w / total)
    i = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(i, w.size - 1)


def categorical_sample_log(log_weights, rng: np.random.Generator) -> int:
    """categorical_sample on weights given in log space."""
    w = normalize_log_weights(log_weights)
    cdf = np.cumsum(w)
    i = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(i, w.size - 1)


def resample_indices(
    weights, size: int, rng: np.random.Generator, scheme: str = "multinomial"
) -> np.ndarray:
    """Draw ancestor indices proportional to ``weights``.

    Multinomial is the default; systematic resampling is available behind the
    scheme flag.
    """
    if scheme not in RESAMPLING_SCHEMES:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0 or not np.isfinite(total):
        raise AllWeightsZero("all resampling weights are zero")
    if size == 0:
        return np.empty(0, dtype=np.intp)
    cdf = np.cumsum(w / total)
    if scheme == "multinomial":
        u = rng.random(size)
    else:
        u = (np.arange(size) + rng.random()) / size
    return np.minimum(np.searchsorted(cdf, u, side="right"), w.size - 1).astype(np.intp)
