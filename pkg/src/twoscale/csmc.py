"""Conditional particle sweeps with ancestor sampling over both scales.

One kernel invocation runs, for each individual: a conditional bootstrap
particle filter over every fine block (resampling ancestries each fine step,
ancestor-resampling the pinned reference path, reweighting by the emission
likelihood), interleaved with the analogous recursion over the coarse chain.
The last particle slot always carries the reference trajectory; drawing final
indices by terminal weights yields the next reference, which is what makes
the kernel a valid MCMC update for the state trajectories.

Block boundaries: the first coarse step has no predecessor, so its fine
trajectories are generated at initialization (forward propagation with a zero
coarse influence, cumulative emission weights, reference slot pinned) and are
never re-swept; sweeps cover coarse steps 2..T as in the conditioning
structure of the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllWeightsZero, DimensionMismatch
from .model import (
    coarse_mean_from_parts,
    coarse_mean_parts,
    fine_mean,
    weighted_fine_average,
)
from .rngstats import (
    CholCov,
    categorical_sample_log,
    normalize_log_weights,
    resample_indices,
    substream,
)
from .simulate import Dataset

# Substream phase tags for one kernel invocation.
_PH_FINE_INIT = 10
_PH_FIRST_BLOCK = 11
_PH_COARSE_INIT = 12
_PH_SWEEP = 13
_PH_COARSE_STEP = 14
_PH_FINAL_FINE = 15
_PH_FINAL_COARSE = 16

# A normalized weight this close to 1 means the ensemble effectively collapsed
# to a single particle for that step.
DEGENERACY_THRESHOLD = 0.999


@dataclass(frozen=True)
class ReferenceTrajectory:
    """A full state trajectory at both scales, used to condition one sweep."""

    fine: np.ndarray  # (D, T, K, fine_dim)
    coarse: np.ndarray  # (D, T, coarse_dim)

    def __post_init__(self):
        object.__setattr__(self, "fine", np.asarray(self.fine, dtype=float))
        object.__setattr__(self, "coarse", np.asarray(self.coarse, dtype=float))
        if self.fine.ndim != 4 or self.coarse.ndim != 3:
            raise DimensionMismatch(
                f"reference arrays have shapes {self.fine.shape}/{self.coarse.shape}"
            )


def truth_reference(data: Dataset) -> ReferenceTrajectory:
    """Reference equal to the dataset's true states (testing hook)."""
    return ReferenceTrajectory(data.fine_states.copy(), data.coarse_states.copy())


def observation_reference(data: Dataset) -> ReferenceTrajectory:
    """Reference equal to the measurements (a cheap data-driven start)."""
    return ReferenceTrajectory(data.fine_obs.copy(), data.coarse_obs.copy())


class ParticleSystem:
    """Weighted ensemble of trajectories for one chain.

    Slot n-1 is reserved for the reference while conditioning. ``filled``
    counts how many time slices hold valid states.
    """

    def __init__(self, n: int, length: int, dim: int):
        self.states = np.zeros((n, length, dim))
        self.log_weights = np.zeros(n)
        self.filled = 0

    @property
    def n(self) -> int:
        return self.states.shape[0]

    def weights(self) -> np.ndarray:
        return normalize_log_weights(self.log_weights)


@dataclass
class KernelStats:
    """Weight-degeneracy bookkeeping for one kernel invocation."""

    degenerate_steps: int = 0
    total_steps: int = 0

    def record(self, weights: np.ndarray) -> None:
        self.total_steps += 1
        if weights.size > 1 and float(weights.max()) > DEGENERACY_THRESHOLD:
            self.degenerate_steps += 1


@dataclass
class KernelState:
    """All particle systems for one kernel invocation."""

    fine_blocks: list  # [d][t] -> ParticleSystem over fine steps
    coarse: list  # [d] -> ParticleSystem over coarse steps
    stats: KernelStats = field(default_factory=KernelStats)


def init_particles(
    data: Dataset,
    ref: ReferenceTrajectory | None,
    fine_cov,
    coarse_covs,
    n_particles: int,
    seed: int,
    key: tuple = (),
) -> KernelState:
    """Initialize every per-(t,d) fine block and per-d coarse system.

    Fine blocks get their first states from N(stored block-start state,
    fine process covariance) with the reference pinned in the last slot and
    weights from the first observation's likelihood. The first coarse step is
    initialized the same way at the coarse scale. The first fine block is
    propagated to full length here, with cumulative emission weights, since
    it has no preceding coarse state to sweep against.
    """
    fine_proc = fine_cov if isinstance(fine_cov, CholCov) else CholCov(fine_cov, "fine_process")
    coarse_proc = [
        c if isinstance(c, CholCov) else CholCov(c, f"coarse_process[{d}]")
        for d, c in enumerate(coarse_covs)
    ]
    return _init_state(data, ref, fine_proc, coarse_proc, n_particles, int(seed), tuple(key))


def _emission_factors(data: Dataset):
    fine_meas = CholCov(data.noise.fine_meas, "fine_meas")
    coarse_meas = [
        CholCov(c, f"coarse_meas[{d}]") for d, c in enumerate(data.noise.coarse_meas)
    ]
    return fine_meas, coarse_meas


def _init_state(data, ref, fine_proc, coarse_proc, n_particles, seed, key) -> KernelState:
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    dims = data.dims
    D, T, K = dims.n_individuals, dims.n_coarse_steps, dims.n_fine_steps
    p, m = dims.fine_dim, dims.coarse_dim
    conditional = ref is not None
    if conditional and (ref.fine.shape != (D, T, K, p) or ref.coarse.shape != (D, T, m)):
        raise DimensionMismatch(
            f"reference shapes {ref.fine.shape}/{ref.coarse.shape} do not match the dataset"
        )
    n_prop = n_particles - 1 if conditional else n_particles
    fine_meas, coarse_meas = _emission_factors(data)
    state = KernelState(fine_blocks=[[None] * T for _ in range(D)], coarse=[None] * D)

    for d in range(D):
        for t in range(T):
            system = ParticleSystem(n_particles, K, p)
            rng = substream(seed, *key, _PH_FINE_INIT, t, d)
            start = data.fine_states[d, t, 0]
            system.states[:n_prop, 0] = fine_proc.sample_many(start, n_prop, rng)
            if conditional:
                system.states[-1, 0] = ref.fine[d, t, 0]
            system.log_weights = fine_meas.logpdf_many(
                data.fine_obs[d, t, 0], system.states[:, 0]
            )
            system.filled = 1
            state.fine_blocks[d][t] = system

        rng = substream(seed, *key, _PH_COARSE_INIT, d)
        coarse_sys = ParticleSystem(n_particles, T, m)
        coarse_sys.states[:n_prop, 0] = coarse_proc[d].sample_many(
            data.coarse_states[d, 0], n_prop, rng
        )
        if conditional:
            coarse_sys.states[-1, 0] = ref.coarse[d, 0]
        coarse_sys.log_weights = coarse_meas[d].logpdf_many(
            data.coarse_obs[d, 0], coarse_sys.states[:, 0]
        )
        coarse_sys.filled = 1
        state.coarse[d] = coarse_sys

        # First block: no preceding coarse state, so propagate in place with a
        # zero coarse influence and accumulate the emission log-likelihoods.
        block = state.fine_blocks[d][0]
        rng = substream(seed, *key, _PH_FIRST_BLOCK, d)
        zero_infl = np.zeros(m)
        for k in range(1, K):
            means = fine_mean(block.states[:n_prop, k - 1], zero_infl, data.coupling, data.kind)
            block.states[:n_prop, k] = fine_proc.sample_many(means, n_prop, rng)
            if conditional:
                block.states[-1, k] = ref.fine[d, 0, k]
            block.log_weights = block.log_weights + fine_meas.logpdf_many(
                data.fine_obs[d, 0, k], block.states[:, k]
            )
            block.filled = k + 1
    return state


def fine_csmc_sweep(
    t: int,
    d: int,
    obs_block: np.ndarray,
    coarse_cond: np.ndarray,
    fine_proc: CholCov,
    fine_meas: CholCov,
    coupling,
    kind,
    ref_block: np.ndarray | None,
    system: ParticleSystem,
    rng: np.random.Generator,
    resampling: str = "multinomial",
    stats: KernelStats | None = None,
) -> ParticleSystem:
    """Run the conditional sweep over fine steps 2..K of one block.

    Per step: multinomially resample the free ancestries by the previous
    weights; resample the reference slot's ancestry proportional to weight
    times the transition density onto the pinned reference state; propagate
    the free particles through the fine transition; pin the reference state;
    reweight every slot by the emission likelihood.

    ``coarse_cond`` holds the per-slot previous coarse states ((n, coarse_dim),
    or a single vector shared by all slots). Slots keep their coarse
    conditioning value for the whole block; only ancestries are resampled.
    """
    n = system.n
    conditional = ref_block is not None
    n_prop = n - 1 if conditional else n
    cond = np.asarray(coarse_cond, dtype=float)
    cond_prop = cond[:n_prop] if cond.ndim == 2 else cond
    K = system.states.shape[1]

    for k in range(1, K):
        try:
            w_prev = system.weights()
        except AllWeightsZero as exc:
            raise AllWeightsZero(f"fine block t={t} d={d} step k={k}: {exc}") from exc
        anc = resample_indices(w_prev, n_prop, rng, resampling)
        if conditional:
            means_prev = fine_mean(system.states[:, k - 1], cond, coupling, kind)
            trans_lp = fine_proc.logpdf_many(ref_block[k], means_prev)
            with np.errstate(divide="ignore"):
                j = categorical_sample_log(np.log(w_prev) + trans_lp, rng)
            idx = np.concatenate([anc, [j]])
        else:
            idx = anc
        states = system.states[idx]
        means = fine_mean(states[:n_prop, k - 1], cond_prop, coupling, kind)
        states[:n_prop, k] = fine_proc.sample_many(means, n_prop, rng)
        if conditional:
            states[-1, k] = ref_block[k]
        system.states = states
        system.log_weights = fine_meas.logpdf_many(obs_block[k], states[:, k])
        system.filled = k + 1
        if stats is not None:
            stats.record(normalize_log_weights(system.log_weights))
    return system


def coarse_csmc_step(
    t: int,
    d: int,
    obs: np.ndarray,
    fine_block: ParticleSystem,
    coarse_proc: CholCov,
    coarse_meas_d: CholCov,
    coupling,
    kind,
    frozen_prev: np.ndarray,
    ref_coarse: np.ndarray | None,
    system: ParticleSystem,
    rng: np.random.Generator,
    resampling: str = "multinomial",
    stats: KernelStats | None = None,
) -> ParticleSystem:
    """Advance the coarse chain of individual d by one step.

    Mirrors the fine sweep: coarse ancestries are resampled by the previous
    coarse weights, the reference slot's ancestry is resampled against the
    pinned coarse reference state, free particles propagate through the
    coarse transition driven by their own slot's completed fine trajectory,
    and weights come from the coarse emission likelihood.

    ``frozen_prev`` stacks every individual's previous coarse state used for
    the cross-individual coupling; only row d varies per particle.
    """
    n = system.n
    conditional = ref_coarse is not None
    n_prop = n - 1 if conditional else n
    if fine_block.filled != fine_block.states.shape[1]:
        raise DimensionMismatch(
            f"fine block t={t} d={d} incomplete: filled={fine_block.filled}"
        )
    try:
        w_prev = system.weights()
    except AllWeightsZero as exc:
        raise AllWeightsZero(f"coarse step t={t} d={d}: {exc}") from exc
    fine_avgs = weighted_fine_average(fine_block.states, coupling)
    base, coeff = coarse_mean_parts(frozen_prev, d, coupling, kind)
    own_prev = system.states[:, t - 1]

    anc = resample_indices(w_prev, n_prop, rng, resampling)
    if conditional:
        means_all = coarse_mean_from_parts(base, coeff, own_prev, fine_avgs, kind)
        trans_lp = coarse_proc.logpdf_many(ref_coarse[t], means_all)
        with np.errstate(divide="ignore"):
            j = categorical_sample_log(np.log(w_prev) + trans_lp, rng)
        idx = np.concatenate([anc, [j]])
    else:
        idx = anc
    states = system.states[idx]
    means = coarse_mean_from_parts(
        base, coeff, states[:n_prop, t - 1], fine_avgs[:n_prop], kind
    )
    states[:n_prop, t] = coarse_proc.sample_many(means, n_prop, rng)
    if conditional:
        states[-1, t] = ref_coarse[t]
    system.states = states
    system.log_weights = coarse_meas_d.logpdf_many(obs, states[:, t])
    system.filled = t + 1
    if stats is not None:
        stats.record(normalize_log_weights(system.log_weights))
    return system


def _run_kernel(
    data: Dataset,
    fine_cov,
    coarse_covs,
    ref: ReferenceTrajectory | None,
    n_particles: int,
    seed: int,
    key: tuple = (),
    resampling: str = "multinomial",
) -> tuple[ReferenceTrajectory, KernelStats]:
    dims = data.dims
    D, T, K = dims.n_individuals, dims.n_coarse_steps, dims.n_fine_steps
    if len(coarse_covs) != D:
        raise DimensionMismatch(f"expected {D} coarse covariances, got {len(coarse_covs)}")
    fine_proc = CholCov(fine_cov, "fine_process")
    coarse_proc = [CholCov(c, f"coarse_process[{d}]") for d, c in enumerate(coarse_covs)]
    fine_meas, coarse_meas = _emission_factors(data)
    conditional = ref is not None
    seed = int(seed)
    key = tuple(key)

    state = _init_state(data, ref, fine_proc, coarse_proc, n_particles, seed, key)
    # Cross-individual coupling rows stay frozen for the whole invocation:
    # the conditioning reference when present, else the coarse measurements.
    frozen = ref.coarse if conditional else data.coarse_obs

    for t in range(1, T):
        for d in range(D):
            coarse_cond = state.coarse[d].states[:, t - 1]
            fine_csmc_sweep(
                t,
                d,
                data.fine_obs[d, t],
                coarse_cond,
                fine_proc,
                fine_meas,
                data.coupling,
                data.kind,
                ref.fine[d, t] if conditional else None,
                state.fine_blocks[d][t],
                substream(seed, *key, _PH_SWEEP, t, d),
                resampling,
                state.stats,
            )
            coarse_csmc_step(
                t,
                d,
                data.coarse_obs[d, t],
                state.fine_blocks[d][t],
                coarse_proc[d],
                coarse_meas[d],
                data.coupling,
                data.kind,
                frozen[:, t - 1],
                ref.coarse[d] if conditional else None,
                state.coarse[d],
                substream(seed, *key, _PH_COARSE_STEP, t, d),
                resampling,
                state.stats,
            )

    out_fine = np.zeros_like(data.fine_states)
    out_coarse = np.zeros_like(data.coarse_states)
    for d in range(D):
        for t in range(T):
            block = state.fine_blocks[d][t]
            rng = substream(seed, *key, _PH_FINAL_FINE, t, d)
            j = categorical_sample_log(block.log_weights, rng)
            out_fine[d, t] = block.states[j]
        rng = substream(seed, *key, _PH_FINAL_COARSE, d)
        j = categorical_sample_log(state.coarse[d].log_weights, rng)
        out_coarse[d] = state.coarse[d].states[j]
    return ReferenceTrajectory(out_fine, out_coarse), state.stats


def pgas_kernel(
    data: Dataset,
    fine_cov,
    coarse_covs,
    ref: ReferenceTrajectory,
    n_particles: int,
    seed: int,
    *,
    key: tuple = (),
    resampling: str = "multinomial",
) -> ReferenceTrajectory:
    """One conditional sweep over all blocks; returns the next reference."""
    out, _ = _run_kernel(data, fine_cov, coarse_covs, ref, n_particles, seed, key, resampling)
    return out


def bootstrap_reference(
    data: Dataset,
    fine_cov,
    coarse_covs,
    n_particles: int,
    seed: int,
    *,
    key: tuple = (),
    resampling: str = "multinomial",
) -> ReferenceTrajectory:
    """Unconditional bootstrap filter pass used to initialize a chain.

    No reference slot, no ancestor resampling; the returned trajectory is
    drawn by terminal weights.
    """
    out, _ = _run_kernel(data, fine_cov, coarse_covs, None, n_particles, seed, key, resampling)
    return out
