"""Two-scale latent dynamics: dimensions, coupling structure, transition means
and transition log-densities.

Fine-scale states evolve inside each coarse step with an additive influence
from the previous coarse state; the coarse state then advances using the
weighted average of the completed fine trajectory plus a linear mix of all
individuals' previous coarse states. The default transitions wrap those
affine arguments in cos (fine) and sin (coarse); a linear kind with the same
wiring is available for validation against exact Gaussian smoothers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch, ZeroWeightSum
from .rngstats import mvn_logpdf, validate_spd


@dataclass(frozen=True)
class ModelDims:
    n_individuals: int
    n_coarse_steps: int
    n_fine_steps: int
    fine_dim: int
    coarse_dim: int

    def __post_init__(self):
        for field in ("n_individuals", "n_coarse_steps", "n_fine_steps", "fine_dim", "coarse_dim"):
            if int(getattr(self, field)) < 1:
                raise ValueError(f"{field} must be >= 1")


@dataclass(frozen=True)
class CosSinTransition:
    """Bounded nonlinear transitions: cosine link at the fine scale, sine at the coarse scale."""


@dataclass(frozen=True)
class LinearTransition:
    """Identity-link variant keeping the same affine arguments; enables exact
    Kalman-smoother cross-checks."""

    fine_matrix: np.ndarray
    coarse_matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "fine_matrix", np.asarray(self.fine_matrix, dtype=float))
        object.__setattr__(self, "coarse_matrix", np.asarray(self.coarse_matrix, dtype=float))
        for name in ("fine_matrix", "coarse_matrix"):
            m = getattr(self, name)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionMismatch(f"{name} must be square, got {m.shape}")


TransitionKind = Union[CosSinTransition, LinearTransition]


@dataclass(frozen=True)
class CouplingSpec:
    """Interaction structure: a fine-dimension mixing matrix, an
    individual-to-individual coarse mixing matrix, and the per-fine-step
    contribution weights feeding the coarse update."""

    fine_coupling: np.ndarray
    individual_coupling: np.ndarray
    fine_weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "fine_coupling", np.asarray(self.fine_coupling, dtype=float))
        object.__setattr__(
            self, "individual_coupling", np.asarray(self.individual_coupling, dtype=float)
        )
        object.__setattr__(self, "fine_weights", np.asarray(self.fine_weights, dtype=float))
        if self.fine_coupling.ndim != 2 or self.fine_coupling.shape[0] != self.fine_coupling.shape[1]:
            raise DimensionMismatch(f"fine_coupling must be square, got {self.fine_coupling.shape}")
        ic = self.individual_coupling
        if ic.ndim != 2 or ic.shape[0] != ic.shape[1]:
            raise DimensionMismatch(f"individual_coupling must be square, got {ic.shape}")
        w = self.fine_weights
        if w.ndim != 1:
            raise DimensionMismatch(f"fine_weights must be a vector, got shape {w.shape}")
        if np.any(w < 0):
            raise ValueError("fine_weights must be nonnegative")
        if w.sum() <= 0:
            raise ZeroWeightSum("fine_weights must have positive sum")

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.fine_weights / self.fine_weights.sum()


@dataclass(frozen=True)
class NoiseSpec:
    """Process noise (learned by inference) and measurement noise (fixed, known)."""

    fine_process: np.ndarray
    coarse_process: tuple
    fine_meas: np.ndarray
    coarse_meas: tuple

    def __post_init__(self):
        object.__setattr__(self, "fine_process", validate_spd(self.fine_process, "fine_process"))
        object.__setattr__(self, "fine_meas", validate_spd(self.fine_meas, "fine_meas"))
        object.__setattr__(
            self,
            "coarse_process",
            tuple(validate_spd(m, f"coarse_process[{d}]") for d, m in enumerate(self.coarse_process)),
        )
        object.__setattr__(
            self,
            "coarse_meas",
            tuple(validate_spd(m, f"coarse_meas[{d}]") for d, m in enumerate(self.coarse_meas)),
        )

    @property
    def n_individuals(self) -> int:
        return len(self.coarse_process)


def validate_model(dims: ModelDims, coupling: CouplingSpec, kind: TransitionKind) -> None:
    """Cross-check dims against coupling/kind shapes; raises DimensionMismatch."""
    if dims.fine_dim != dims.coarse_dim:
        # Both kinds add the fine weighted average to the coupled coarse row,
        # and the fine update adds the coarse state to the mixed fine state.
        raise DimensionMismatch(
            f"fine_dim ({dims.fine_dim}) must equal coarse_dim ({dims.coarse_dim})"
        )
    if coupling.fine_coupling.shape[0] != dims.fine_dim:
        raise DimensionMismatch(
            f"fine_coupling is {coupling.fine_coupling.shape}, expected {dims.fine_dim} rows"
        )
    if coupling.individual_coupling.shape[0] != dims.n_individuals:
        raise DimensionMismatch(
            f"individual_coupling is {coupling.individual_coupling.shape}, "
            f"expected {dims.n_individuals} rows"
        )
    if coupling.fine_weights.shape[0] != dims.n_fine_steps:
        raise DimensionMismatch(
            f"fine_weights has length {coupling.fine_weights.shape[0]}, "
            f"expected {dims.n_fine_steps}"
        )
    if isinstance(kind, LinearTransition):
        if kind.fine_matrix.shape[0] != dims.fine_dim:
            raise DimensionMismatch(
                f"linear fine_matrix is {kind.fine_matrix.shape}, expected dim {dims.fine_dim}"
            )
        if kind.coarse_matrix.shape[0] != dims.n_individuals:
            raise DimensionMismatch(
                f"linear coarse_matrix is {kind.coarse_matrix.shape}, "
                f"expected dim {dims.n_individuals}"
            )


def _fine_matrix(coupling: CouplingSpec, kind: TransitionKind) -> np.ndarray:
    return kind.fine_matrix if isinstance(kind, LinearTransition) else coupling.fine_coupling


def _individual_matrix(coupling: CouplingSpec, kind: TransitionKind) -> np.ndarray:
    return kind.coarse_matrix if isinstance(kind, LinearTransition) else coupling.individual_coupling


def fine_mean(x_prev, coarse_prev, coupling: CouplingSpec, kind: TransitionKind) -> np.ndarray:
    """Transition mean for fine states; broadcasts over leading axes."""
    arg = np.asarray(x_prev, dtype=float) @ _fine_matrix(coupling, kind).T + np.asarray(
        coarse_prev, dtype=float
    )
    return np.cos(arg) if isinstance(kind, CosSinTransition) else arg


def transition_fine(x_prev, coarse_prev, coupling: CouplingSpec, kind: TransitionKind) -> np.ndarray:
    """Noise-free fine-state update for a single state vector."""
    x = np.asarray(x_prev, dtype=float)
    c = np.asarray(coarse_prev, dtype=float)
    m = _fine_matrix(coupling, kind)
    if x.ndim != 1 or x.shape[0] != m.shape[0]:
        raise DimensionMismatch(f"x_prev has shape {x.shape}, expected ({m.shape[0]},)")
    if c.shape != x.shape:
        raise DimensionMismatch(f"coarse_prev has shape {c.shape}, expected {x.shape}")
    return fine_mean(x, c, coupling, kind)


def weighted_fine_average(fine_traj, coupling: CouplingSpec) -> np.ndarray:
    """Contribution-weighted average over the fine-step axis (second to last)."""
    traj = np.asarray(fine_traj, dtype=float)
    w = coupling.normalized_weights
    if traj.shape[-2] != w.shape[0]:
        raise DimensionMismatch(
            f"fine trajectory has {traj.shape[-2]} steps, expected {w.shape[0]}"
        )
    return np.tensordot(traj, w, axes=([-2], [0]))


def coarse_mean_parts(
    coarse_all_prev, d: int, coupling: CouplingSpec, kind: TransitionKind
) -> tuple[np.ndarray, float]:
    """Split the coupled coarse row into (contribution of other individuals,
    coefficient on individual d's own previous state).

    Lets per-particle sweeps vary only individual d's own state while the
    others stay frozen.
    """
    mat = _individual_matrix(coupling, kind)
    stack = np.asarray(coarse_all_prev, dtype=float)
    if stack.shape[0] != mat.shape[0]:
        raise DimensionMismatch(
            f"coarse state stack has {stack.shape[0]} rows, expected {mat.shape[0]}"
        )
    row = mat[d] @ stack
    return row - mat[d, d] * stack[d], float(mat[d, d])


def coarse_mean_from_parts(
    base, self_coeff: float, own_prev, fine_avg, kind: TransitionKind
) -> np.ndarray:
    """Coarse transition mean given precomputed parts; broadcasts over particles."""
    arg = base + self_coeff * np.asarray(own_prev, dtype=float) + np.asarray(fine_avg, dtype=float)
    return np.sin(arg) if isinstance(kind, CosSinTransition) else arg


def transition_coarse(
    coarse_all_prev, fine_traj, coupling: CouplingSpec, d: int, kind: TransitionKind
) -> np.ndarray:
    """Noise-free coarse-state update for individual d.

    ``coarse_all_prev`` stacks every individual's previous coarse state
    (rows); ``fine_traj`` is individual d's completed fine trajectory for the
    current coarse step, shape (n_fine_steps, fine_dim).
    """
    stack = np.asarray(coarse_all_prev, dtype=float)
    traj = np.asarray(fine_traj, dtype=float)
    if stack.ndim != 2:
        raise DimensionMismatch(f"coarse state stack must be 2-D, got shape {stack.shape}")
    if not 0 <= d < stack.shape[0]:
        raise DimensionMismatch(f"individual index {d} out of range for {stack.shape[0]} rows")
    if traj.ndim != 2 or traj.shape[1] != stack.shape[1]:
        raise DimensionMismatch(
            f"fine trajectory has shape {traj.shape}, expected (*, {stack.shape[1]})"
        )
    base, coeff = coarse_mean_parts(stack, d, coupling, kind)
    avg = weighted_fine_average(traj, coupling)
    return coarse_mean_from_parts(base, coeff, stack[d], avg, kind)


def log_trans_fine(
    x_next, x_prev, coarse_prev, fine_cov, coupling: CouplingSpec, kind: TransitionKind
) -> float:
    """Gaussian transition log-density of a fine step."""
    mean = transition_fine(x_prev, coarse_prev, coupling, kind)
    return mvn_logpdf(x_next, mean, fine_cov)


def log_trans_coarse(
    coarse_next,
    coarse_all_prev,
    fine_traj,
    coarse_cov_d,
    coupling: CouplingSpec,
    d: int,
    kind: TransitionKind,
) -> float:
    """Gaussian transition log-density of a coarse step for individual d."""
    mean = transition_coarse(coarse_all_prev, fine_traj, coupling, d, kind)
    return mvn_logpdf(coarse_next, mean, coarse_cov_d)
