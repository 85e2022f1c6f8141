"""Coupled fine/coarse-scale state-space modeling with Bayesian learning of
the process noise covariances via particle Gibbs with ancestor sampling."""

from .csmc import (
    ParticleSystem,
    ReferenceTrajectory,
    bootstrap_reference,
    coarse_csmc_step,
    fine_csmc_sweep,
    init_particles,
    observation_reference,
    pgas_kernel,
    truth_reference,
)
from .diagnostics import ess, posterior_state_mean, rmse_coarse, rmse_fine, trace
from .gibbs import (
    Chain,
    GibbsSettings,
    Priors,
    SufficientStats,
    coarse_suffstats,
    fine_suffstats,
    iw_posterior,
    run_chain,
    run_sigma_subchain,
)
from .model import (
    CosSinTransition,
    CouplingSpec,
    LinearTransition,
    ModelDims,
    NoiseSpec,
    log_trans_coarse,
    log_trans_fine,
    transition_coarse,
    transition_fine,
)
from .persist import (
    RunConfig,
    dataset_digest,
    export_csv,
    load_chain,
    load_config,
    load_dataset,
    save_chain,
    save_config,
    save_dataset,
)
from .rngstats import (
    CholCov,
    IwParams,
    categorical_sample,
    cholesky,
    inv_wishart_sample,
    mvn_logpdf,
    mvn_sample,
    normalize_log_weights,
    resample_indices,
    substream,
)
from .simulate import (
    Dataset,
    default_config,
    default_priors,
    generate,
    reference_noise,
    random_coupling,
)

__version__ = "0.1.0"
