"""Outer Gibbs loop: alternate trajectory draws (conditional particle sweeps)
with closed-form inverse-Wishart updates of the process noise covariances.

The inverse-Wishart prior is conjugate to the Gaussian transitions, so the
covariance conditionals are exact: add the residual outer products to the
scale matrix and the residual count to the degrees of freedom. A
"strict-paper" mode is available that increments the degrees of freedom by
the per-block step count instead of the true residual count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .csmc import ReferenceTrajectory, _run_kernel, bootstrap_reference, truth_reference
from .errors import DimensionMismatch, NotPositiveDefinite
from .model import fine_mean, transition_coarse
from .rngstats import IwParams, cholesky, inv_wishart_sample, substream
from .simulate import Dataset

log = logging.getLogger("twoscale")

DOF_MODES = ("full-count", "strict-paper")

# Substream phase tags for one chain.
_PH_SIGMA_INIT = 30
_PH_BOOTSTRAP = 31
_PH_KERNEL = 32
_PH_SIGMA_FINE = 33
_PH_SIGMA_COARSE = 34
_PH_SUBCHAIN = 35


@dataclass(frozen=True)
class SufficientStats:
    """Sum of residual outer products plus the residual count."""

    matrix: np.ndarray
    count: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"stats matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))
        if self.count < 0:
            raise ValueError("residual count must be nonnegative")

    @staticmethod
    def empty(dim: int) -> "SufficientStats":
        return SufficientStats(np.zeros((dim, dim)), 0)

    def merged(self, other: "SufficientStats") -> "SufficientStats":
        return SufficientStats(self.matrix + other.matrix, self.count + other.count)


@dataclass(frozen=True)
class Priors:
    fine: IwParams
    coarse: tuple


def fine_suffstats(fine_states, coarse_states, coupling, kind) -> SufficientStats:
    """Residual outer products over every fine transition, pooled across all
    individuals and coarse steps.

    Covers the in-block transitions (with a zero coarse influence for the
    first block) and the cross-boundary transitions from each block's last
    fine state into the next block's first.
    """
    x = np.asarray(fine_states, dtype=float)
    X = np.asarray(coarse_states, dtype=float)
    D, T, K, p = x.shape
    cond = np.concatenate([np.zeros((D, 1, X.shape[-1])), X[:, :-1]], axis=1)
    resid_in = x[:, :, 1:, :] - fine_mean(x[:, :, :-1, :], cond[:, :, None, :], coupling, kind)
    s = np.einsum("dtkp,dtkq->pq", resid_in, resid_in)
    count = D * T * (K - 1)
    if T > 1:
        resid_cross = x[:, 1:, 0, :] - fine_mean(x[:, :-1, K - 1, :], X[:, :-1], coupling, kind)
        s = s + np.einsum("dtp,dtq->pq", resid_cross, resid_cross)
        count += D * (T - 1)
    return SufficientStats(s, count)


def coarse_suffstats(coarse_states, fine_states, coupling, kind, d: int) -> SufficientStats:
    """Residual outer products over individual d's coarse transitions.

    The first coarse state is a stored initial, not a transition output, so
    residuals run over steps 2..T (count T-1).
    """
    X = np.asarray(coarse_states, dtype=float)
    x = np.asarray(fine_states, dtype=float)
    D, T, m = X.shape
    if not 0 <= d < D:
        raise DimensionMismatch(f"individual index {d} out of range for {D}")
    s = np.zeros((m, m))
    for t in range(1, T):
        resid = X[d, t] - transition_coarse(X[:, t - 1], x[d, t], coupling, d, kind)
        s += np.outer(resid, resid)
    return SufficientStats(s, T - 1)


def iw_posterior(prior: IwParams, stats: SufficientStats) -> IwParams:
    """Exact conjugate update: scale += residual outer products, dof += count."""
    return IwParams(prior.scale + stats.matrix, prior.dof + stats.count)


def _dof_stats(stats: SufficientStats, dof_mode: str, per_block_steps: int) -> SufficientStats:
    if dof_mode == "full-count":
        return stats
    return replace(stats, count=per_block_steps)


@dataclass(frozen=True)
class GibbsSettings:
    n_particles: int
    n_iterations: int
    seed: int
    burn_in_fraction: float = 0.1
    thin: int = 10
    resampling: str = "multinomial"
    dof_mode: str = "full-count"

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.dof_mode not in DOF_MODES:
            raise ValueError(f"dof_mode must be one of {DOF_MODES}")


@dataclass
class Chain:
    """Recorded draws from one run: covariance draws at every iteration,
    state references every ``thin`` iterations."""

    n_iterations: int
    burn_in_fraction: float
    thin: int
    seed: int
    sigma_fine_draws: np.ndarray  # (R, p, p)
    sigma_coarse_draws: np.ndarray  # (R, D, m, m)
    ref_iterations: list
    ref_fine: np.ndarray  # (S, D, T, K, p)
    ref_coarse: np.ndarray  # (S, D, T, m)
    config: object = None
    dataset_digest: str | None = None

    @property
    def burn_in_start(self) -> int:
        return int(self.n_iterations * self.burn_in_fraction)

    def retained_iterations(self) -> np.ndarray:
        return np.arange(self.burn_in_start, self.n_iterations)

    def retained_refs(self) -> tuple[np.ndarray, np.ndarray]:
        """Post-burn-in stored references as stacked arrays."""
        keep = [i for i, r in enumerate(self.ref_iterations) if r >= self.burn_in_start]
        return self.ref_fine[keep], self.ref_coarse[keep]


def run_chain(data: Dataset, priors: Priors, settings: GibbsSettings) -> Chain:
    """Run the full sampler: states by conditional sweep, covariances by
    conjugate draw, both scales every iteration.

    The covariances start from prior draws; the initial reference trajectory
    comes from one unconditional bootstrap filter pass.
    """
    dims = data.dims
    D = dims.n_individuals
    if len(priors.coarse) != D:
        raise DimensionMismatch(f"expected {D} coarse priors, got {len(priors.coarse)}")
    R = settings.n_iterations
    seed = int(settings.seed)

    rng0 = substream(seed, _PH_SIGMA_INIT)
    sigma_fine = inv_wishart_sample(priors.fine, rng0)
    sigma_coarse = [inv_wishart_sample(priors.coarse[d], rng0) for d in range(D)]
    ref = bootstrap_reference(
        data,
        sigma_fine,
        sigma_coarse,
        settings.n_particles,
        seed,
        key=(_PH_BOOTSTRAP,),
        resampling=settings.resampling,
    )

    p, m = dims.fine_dim, dims.coarse_dim
    sigma_fine_draws = np.zeros((R, p, p))
    sigma_coarse_draws = np.zeros((R, D, m, m))
    ref_iterations: list[int] = []
    kept_fine = []
    kept_coarse = []
    log_every = max(1, R // 20)
    degenerate = 0
    resample_steps = 0

    for r in range(R):
        try:
            ref, stats = _run_kernel(
                data,
                sigma_fine,
                sigma_coarse,
                ref,
                settings.n_particles,
                seed,
                key=(_PH_KERNEL, r),
                resampling=settings.resampling,
            )
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"iteration {r}: {exc}") from exc
        degenerate += stats.degenerate_steps
        resample_steps += stats.total_steps

        stats_f = fine_suffstats(ref.fine, ref.coarse, data.coupling, data.kind)
        post_f = iw_posterior(
            priors.fine, _dof_stats(stats_f, settings.dof_mode, dims.n_fine_steps)
        )
        sigma_fine = inv_wishart_sample(post_f, substream(seed, _PH_SIGMA_FINE, r))
        cholesky(sigma_fine, name=f"fine covariance draw (iteration {r})")
        for d in range(D):
            stats_c = coarse_suffstats(ref.coarse, ref.fine, data.coupling, data.kind, d)
            post_c = iw_posterior(
                priors.coarse[d], _dof_stats(stats_c, settings.dof_mode, dims.n_coarse_steps)
            )
            sigma_coarse[d] = inv_wishart_sample(post_c, substream(seed, _PH_SIGMA_COARSE, r, d))
            cholesky(sigma_coarse[d], name=f"coarse covariance draw d={d} (iteration {r})")

        sigma_fine_draws[r] = sigma_fine
        sigma_coarse_draws[r] = np.stack(sigma_coarse)
        if r % settings.thin == 0:
            ref_iterations.append(r)
            kept_fine.append(ref.fine.copy())
            kept_coarse.append(ref.coarse.copy())
        if (r + 1) % log_every == 0 or r + 1 == R:
            log.info("iteration %d/%d", r + 1, R)
            if degenerate:
                log.warning(
                    "weight degeneracy in %d/%d resampling steps over the last %d iterations",
                    degenerate,
                    resample_steps,
                    log_every,
                )
            degenerate = 0
            resample_steps = 0

    return Chain(
        n_iterations=R,
        burn_in_fraction=settings.burn_in_fraction,
        thin=settings.thin,
        seed=seed,
        sigma_fine_draws=sigma_fine_draws,
        sigma_coarse_draws=sigma_coarse_draws,
        ref_iterations=ref_iterations,
        ref_fine=np.stack(kept_fine),
        ref_coarse=np.stack(kept_coarse),
    )


def run_sigma_subchain(
    data: Dataset,
    priors: Priors,
    n_draws: int,
    seed: int,
    dof_mode: str = "full-count",
    states: ReferenceTrajectory | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Covariance-only sub-chain with the state trajectories held fixed
    (default: the dataset's true states). Returns stacked draws
    ((n, p, p), (n, D, m, m)); used to check conjugate recovery in isolation.
    """
    if dof_mode not in DOF_MODES:
        raise ValueError(f"dof_mode must be one of {DOF_MODES}")
    ref = truth_reference(data) if states is None else states
    dims = data.dims
    D = dims.n_individuals
    stats_f = fine_suffstats(ref.fine, ref.coarse, data.coupling, data.kind)
    post_f = iw_posterior(priors.fine, _dof_stats(stats_f, dof_mode, dims.n_fine_steps))
    posts_c = []
    for d in range(D):
        stats_c = coarse_suffstats(ref.coarse, ref.fine, data.coupling, data.kind, d)
        posts_c.append(
            iw_posterior(priors.coarse[d], _dof_stats(stats_c, dof_mode, dims.n_coarse_steps))
        )
    rng = substream(int(seed), _PH_SUBCHAIN)
    fine_draws = np.stack([inv_wishart_sample(post_f, rng) for _ in range(n_draws)])
    coarse_draws = np.stack(
        [[inv_wishart_sample(posts_c[d], rng) for d in range(D)] for _ in range(n_draws)]
    )
    return fine_draws, coarse_draws
