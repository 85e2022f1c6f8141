import logging

import pytest

import twoscale as ts

logging.getLogger("twoscale").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def small_dims():
    return ts.ModelDims(n_individuals=4, n_coarse_steps=6, n_fine_steps=6, fine_dim=3, coarse_dim=3)


@pytest.fixture(scope="session")
def small_dataset(small_dims):
    noise = ts.reference_noise(small_dims)
    coupling = ts.random_coupling(small_dims, 25)
    return ts.generate(small_dims, coupling, noise, 25)


@pytest.fixture(scope="session")
def small_chain(small_dataset):
    settings = ts.GibbsSettings(
        n_particles=100, n_iterations=120, seed=3, burn_in_fraction=0.1, thin=5
    )
    return ts.run_chain(small_dataset, ts.default_priors(small_dataset.dims), settings)
