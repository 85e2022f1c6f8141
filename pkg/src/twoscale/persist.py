"""File formats: run configuration, dataset and chain containers, CSV exports.

Dataset and chain files are two-line text artifacts: a header JSON line with
a schema tag and the SHA-256 of the payload line, then the payload JSON in
canonical form (sorted keys, no whitespace, full-precision decimal floats).
Round trips are bit-exact and any truncation or edit is caught by the
checksum.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import posterior_state_mean, rmse_coarse, rmse_fine
from .errors import ChecksumMismatch, ConfigError, SchemaVersionMismatch
from .gibbs import Chain, GibbsSettings, Priors
from .model import (
    CosSinTransition,
    CouplingSpec,
    LinearTransition,
    ModelDims,
    NoiseSpec,
    TransitionKind,
)
from .rngstats import RESAMPLING_SCHEMES, IwParams
from .simulate import Dataset, random_coupling

CONFIG_SCHEMA = "twoscale.config/1"
DATASET_SCHEMA = "twoscale.dataset/1"
CHAIN_SCHEMA = "twoscale.chain/1"

MAX_SEED = 2**64 - 1


# ---------------------------------------------------------------------------
# Strict-key helpers
# ---------------------------------------------------------------------------


def _require_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object, got {type(obj).__name__}")
    return obj


def _take_keys(obj: dict, path: str, required: tuple, optional: tuple = ()) -> dict:
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {missing}")
    return obj


def _as_cov(value, dim: int, path: str) -> np.ndarray:
    """Scalar s means s*I; otherwise a full dim x dim matrix."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value <= 0:
            raise ConfigError(f"{path}: scalar covariance must be positive, got {value}")
        return float(value) * np.eye(dim)
    arr = np.asarray(value, dtype=float)
    if arr.shape != (dim, dim):
        raise ConfigError(f"{path}: expected a scalar or {dim}x{dim} matrix, got shape {arr.shape}")
    return arr


def _as_seed(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= MAX_SEED:
        raise ConfigError(f"{path}: seed must be an integer in [0, 2^64), got {value!r}")
    return value


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs: model shape, transitions, coupling source,
    noise, priors, and the sampler settings."""

    dims: ModelDims
    transition: TransitionKind
    coupling: CouplingSpec | None  # None: derive from the seed
    noise: NoiseSpec
    priors: Priors
    n_particles: int
    n_iterations: int
    burn_in_fraction: float
    thin: int
    resampling: str
    dof_mode: str
    seed: int

    def settings(self) -> GibbsSettings:
        return GibbsSettings(
            n_particles=self.n_particles,
            n_iterations=self.n_iterations,
            seed=self.seed,
            burn_in_fraction=self.burn_in_fraction,
            thin=self.thin,
            resampling=self.resampling,
            dof_mode=self.dof_mode,
        )

    def resolved_coupling(self) -> CouplingSpec:
        return self.coupling if self.coupling is not None else random_coupling(self.dims, self.seed)


def config_to_dict(config: RunConfig) -> dict:
    if isinstance(config.transition, LinearTransition):
        transition = {
            "kind": "linear",
            "fine_matrix": config.transition.fine_matrix.tolist(),
            "coarse_matrix": config.transition.coarse_matrix.tolist(),
        }
    else:
        transition = {"kind": "cos-sin"}
    if config.coupling is None:
        coupling = {"source": "seed"}
    else:
        coupling = {
            "source": "explicit",
            "fine_coupling": config.coupling.fine_coupling.tolist(),
            "individual_coupling": config.coupling.individual_coupling.tolist(),
            "fine_weights": config.coupling.fine_weights.tolist(),
        }
    return {
        "schema": CONFIG_SCHEMA,
        "dims": {
            "n_individuals": config.dims.n_individuals,
            "n_coarse_steps": config.dims.n_coarse_steps,
            "n_fine_steps": config.dims.n_fine_steps,
            "fine_dim": config.dims.fine_dim,
            "coarse_dim": config.dims.coarse_dim,
        },
        "transition": transition,
        "coupling": coupling,
        "noise": {
            "fine_process": config.noise.fine_process.tolist(),
            "coarse_process": [m.tolist() for m in config.noise.coarse_process],
            "fine_meas": config.noise.fine_meas.tolist(),
            "coarse_meas": [m.tolist() for m in config.noise.coarse_meas],
        },
        "priors": {
            "fine_scale": config.priors.fine.scale.tolist(),
            "fine_dof": config.priors.fine.dof,
            "coarse_scale": [p.scale.tolist() for p in config.priors.coarse],
            "coarse_dof": [p.dof for p in config.priors.coarse],
        },
        "inference": {
            "n_particles": config.n_particles,
            "n_iterations": config.n_iterations,
            "burn_in_fraction": config.burn_in_fraction,
            "thin": config.thin,
            "resampling": config.resampling,
            "dof_mode": config.dof_mode,
        },
        "seed": config.seed,
    }


def config_from_dict(raw: dict, path: str = "config") -> RunConfig:
    raw = _require_mapping(raw, path)
    _take_keys(
        raw,
        path,
        required=("schema", "dims", "transition", "coupling", "noise", "priors", "inference", "seed"),
    )
    if raw["schema"] != CONFIG_SCHEMA:
        raise SchemaVersionMismatch(f"{path}: schema {raw['schema']!r}, expected {CONFIG_SCHEMA!r}")

    d = _take_keys(
        _require_mapping(raw["dims"], f"{path}.dims"),
        f"{path}.dims",
        required=("n_individuals", "n_coarse_steps", "n_fine_steps", "fine_dim", "coarse_dim"),
    )
    for k, v in d.items():
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{path}.dims.{k}: expected a positive integer, got {v!r}")
    try:
        dims = ModelDims(**d)
    except ValueError as exc:
        raise ConfigError(f"{path}.dims: {exc}") from exc

    tr = _require_mapping(raw["transition"], f"{path}.transition")
    kind_name = tr.get("kind")
    if kind_name == "cos-sin":
        _take_keys(tr, f"{path}.transition", required=("kind",))
        transition: TransitionKind = CosSinTransition()
    elif kind_name == "linear":
        _take_keys(tr, f"{path}.transition", required=("kind", "fine_matrix", "coarse_matrix"))
        transition = LinearTransition(
            np.asarray(tr["fine_matrix"], dtype=float),
            np.asarray(tr["coarse_matrix"], dtype=float),
        )
    else:
        raise ConfigError(f"{path}.transition.kind: expected 'cos-sin' or 'linear', got {kind_name!r}")

    cp = _require_mapping(raw["coupling"], f"{path}.coupling")
    source = cp.get("source")
    if source == "seed":
        _take_keys(cp, f"{path}.coupling", required=("source",))
        coupling = None
    elif source == "explicit":
        _take_keys(
            cp,
            f"{path}.coupling",
            required=("source", "fine_coupling", "individual_coupling", "fine_weights"),
        )
        coupling = CouplingSpec(
            np.asarray(cp["fine_coupling"], dtype=float),
            np.asarray(cp["individual_coupling"], dtype=float),
            np.asarray(cp["fine_weights"], dtype=float),
        )
    else:
        raise ConfigError(f"{path}.coupling.source: expected 'seed' or 'explicit', got {source!r}")

    nz = _take_keys(
        _require_mapping(raw["noise"], f"{path}.noise"),
        f"{path}.noise",
        required=("fine_process", "coarse_process", "fine_meas", "coarse_meas"),
    )
    D, p, m = dims.n_individuals, dims.fine_dim, dims.coarse_dim
    for key in ("coarse_process", "coarse_meas"):
        if not isinstance(nz[key], list) or len(nz[key]) != D:
            raise ConfigError(f"{path}.noise.{key}: expected a list of {D} entries")
    noise = NoiseSpec(
        fine_process=_as_cov(nz["fine_process"], p, f"{path}.noise.fine_process"),
        coarse_process=tuple(
            _as_cov(v, m, f"{path}.noise.coarse_process[{i}]") for i, v in enumerate(nz["coarse_process"])
        ),
        fine_meas=_as_cov(nz["fine_meas"], p, f"{path}.noise.fine_meas"),
        coarse_meas=tuple(
            _as_cov(v, m, f"{path}.noise.coarse_meas[{i}]") for i, v in enumerate(nz["coarse_meas"])
        ),
    )

    pr = _take_keys(
        _require_mapping(raw["priors"], f"{path}.priors"),
        f"{path}.priors",
        required=("fine_scale", "fine_dof", "coarse_scale", "coarse_dof"),
    )
    try:
        fine_prior = IwParams(_as_cov(pr["fine_scale"], p, f"{path}.priors.fine_scale"), pr["fine_dof"])
        scales = pr["coarse_scale"]
        dofs = pr["coarse_dof"]
        if not isinstance(scales, list) or len(scales) != D:
            raise ConfigError(f"{path}.priors.coarse_scale: expected a list of {D} entries")
        if not isinstance(dofs, list) or len(dofs) != D:
            raise ConfigError(f"{path}.priors.coarse_dof: expected a list of {D} entries")
        coarse_priors = tuple(
            IwParams(_as_cov(s, m, f"{path}.priors.coarse_scale[{i}]"), v)
            for i, (s, v) in enumerate(zip(scales, dofs))
        )
    except ValueError as exc:
        raise ConfigError(f"{path}.priors: {exc}") from exc

    inf = _take_keys(
        _require_mapping(raw["inference"], f"{path}.inference"),
        f"{path}.inference",
        required=("n_particles", "n_iterations", "burn_in_fraction", "thin", "resampling", "dof_mode"),
    )
    for k in ("n_particles", "n_iterations", "thin"):
        if not isinstance(inf[k], int) or isinstance(inf[k], bool) or inf[k] < 1:
            raise ConfigError(f"{path}.inference.{k}: expected a positive integer, got {inf[k]!r}")
    if not isinstance(inf["burn_in_fraction"], (int, float)) or not 0 <= inf["burn_in_fraction"] < 1:
        raise ConfigError(f"{path}.inference.burn_in_fraction: expected a fraction in [0, 1)")
    if inf["resampling"] not in RESAMPLING_SCHEMES:
        raise ConfigError(f"{path}.inference.resampling: expected one of {RESAMPLING_SCHEMES}")
    if inf["dof_mode"] not in ("full-count", "strict-paper"):
        raise ConfigError(f"{path}.inference.dof_mode: expected 'full-count' or 'strict-paper'")

    return RunConfig(
        dims=dims,
        transition=transition,
        coupling=coupling,
        noise=noise,
        priors=Priors(fine=fine_prior, coarse=coarse_priors),
        n_particles=inf["n_particles"],
        n_iterations=inf["n_iterations"],
        burn_in_fraction=float(inf["burn_in_fraction"]),
        thin=inf["thin"],
        resampling=inf["resampling"],
        dof_mode=inf["dof_mode"],
        seed=_as_seed(raw["seed"], f"{path}.seed"),
    )


def save_config(path, config: RunConfig) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n")


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return config_from_dict(raw, path=str(path))


# ---------------------------------------------------------------------------
# Canonical two-line container
# ---------------------------------------------------------------------------


def _canonical_payload(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _write_container(path, schema: str, payload: dict) -> str:
    body = _canonical_payload(payload)
    digest = hashlib.sha256(body).hexdigest()
    header = json.dumps({"schema": schema, "sha256": digest}, sort_keys=True, separators=(",", ":"))
    Path(path).write_bytes(header.encode() + b"\n" + body + b"\n")
    return digest


def _read_container(path, schema: str) -> tuple[dict, str]:
    text = Path(path).read_bytes()
    head, sep, rest = text.partition(b"\n")
    try:
        header = json.loads(head.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaVersionMismatch(f"{path}: unreadable header: {exc}") from exc
    if not isinstance(header, dict) or "schema" not in header or "sha256" not in header:
        raise SchemaVersionMismatch(f"{path}: header missing schema/checksum fields")
    if header["schema"] != schema:
        raise SchemaVersionMismatch(f"{path}: schema {header['schema']!r}, expected {schema!r}")
    if not sep:
        raise ChecksumMismatch(f"{path}: file truncated before payload")
    body = rest.rstrip(b"\n")
    digest = hashlib.sha256(body).hexdigest()
    if digest != header["sha256"]:
        raise ChecksumMismatch(f"{path}: payload checksum {digest} != recorded {header['sha256']}")
    try:
        payload = json.loads(body.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumMismatch(f"{path}: payload corrupt: {exc}") from exc
    return payload, digest


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------


def _kind_to_dict(kind: TransitionKind) -> dict:
    if isinstance(kind, LinearTransition):
        return {
            "kind": "linear",
            "fine_matrix": kind.fine_matrix.tolist(),
            "coarse_matrix": kind.coarse_matrix.tolist(),
        }
    return {"kind": "cos-sin"}


def _kind_from_dict(raw: dict) -> TransitionKind:
    if raw.get("kind") == "linear":
        return LinearTransition(
            np.asarray(raw["fine_matrix"], dtype=float),
            np.asarray(raw["coarse_matrix"], dtype=float),
        )
    return CosSinTransition()


def _dataset_payload(data: Dataset) -> dict:
    return {
        "dims": {
            "n_individuals": data.dims.n_individuals,
            "n_coarse_steps": data.dims.n_coarse_steps,
            "n_fine_steps": data.dims.n_fine_steps,
            "fine_dim": data.dims.fine_dim,
            "coarse_dim": data.dims.coarse_dim,
        },
        "coupling": {
            "fine_coupling": data.coupling.fine_coupling.tolist(),
            "individual_coupling": data.coupling.individual_coupling.tolist(),
            "fine_weights": data.coupling.fine_weights.tolist(),
        },
        "transition": _kind_to_dict(data.kind),
        "noise": {
            "fine_process": data.noise.fine_process.tolist(),
            "coarse_process": [m.tolist() for m in data.noise.coarse_process],
            "fine_meas": data.noise.fine_meas.tolist(),
            "coarse_meas": [m.tolist() for m in data.noise.coarse_meas],
        },
        "seed": data.seed,
        "fine_states": data.fine_states.tolist(),
        "coarse_states": data.coarse_states.tolist(),
        "fine_obs": data.fine_obs.tolist(),
        "coarse_obs": data.coarse_obs.tolist(),
    }


def dataset_digest(data: Dataset) -> str:
    """Checksum of the dataset's canonical payload (matches the file digest)."""
    return hashlib.sha256(_canonical_payload(_dataset_payload(data))).hexdigest()


def save_dataset(path, data: Dataset) -> str:
    """Write the dataset container; returns its payload digest."""
    return _write_container(path, DATASET_SCHEMA, _dataset_payload(data))


def load_dataset(path) -> Dataset:
    payload, _ = _read_container(path, DATASET_SCHEMA)
    dims = ModelDims(**payload["dims"])
    coupling = CouplingSpec(
        np.asarray(payload["coupling"]["fine_coupling"], dtype=float),
        np.asarray(payload["coupling"]["individual_coupling"], dtype=float),
        np.asarray(payload["coupling"]["fine_weights"], dtype=float),
    )
    noise = NoiseSpec(
        fine_process=np.asarray(payload["noise"]["fine_process"], dtype=float),
        coarse_process=tuple(np.asarray(m, dtype=float) for m in payload["noise"]["coarse_process"]),
        fine_meas=np.asarray(payload["noise"]["fine_meas"], dtype=float),
        coarse_meas=tuple(np.asarray(m, dtype=float) for m in payload["noise"]["coarse_meas"]),
    )
    return Dataset(
        dims=dims,
        coupling=coupling,
        kind=_kind_from_dict(payload["transition"]),
        noise=noise,
        seed=payload["seed"],
        fine_states=np.asarray(payload["fine_states"], dtype=float),
        coarse_states=np.asarray(payload["coarse_states"], dtype=float),
        fine_obs=np.asarray(payload["fine_obs"], dtype=float),
        coarse_obs=np.asarray(payload["coarse_obs"], dtype=float),
    )


# ---------------------------------------------------------------------------
# Chain files
# ---------------------------------------------------------------------------


def save_chain(path, chain: Chain) -> str:
    """Write the chain container (embedding its RunConfig and the digest of
    the dataset it was fitted to, when present); returns the payload digest."""
    payload = {
        "config": config_to_dict(chain.config) if chain.config is not None else None,
        "dataset_sha256": chain.dataset_digest,
        "n_iterations": chain.n_iterations,
        "burn_in_fraction": chain.burn_in_fraction,
        "thin": chain.thin,
        "seed": chain.seed,
        "sigma_fine_draws": chain.sigma_fine_draws.tolist(),
        "sigma_coarse_draws": chain.sigma_coarse_draws.tolist(),
        "ref_iterations": list(chain.ref_iterations),
        "ref_fine": chain.ref_fine.tolist(),
        "ref_coarse": chain.ref_coarse.tolist(),
    }
    return _write_container(path, CHAIN_SCHEMA, payload)


def load_chain(path) -> Chain:
    payload, _ = _read_container(path, CHAIN_SCHEMA)
    return Chain(
        n_iterations=payload["n_iterations"],
        burn_in_fraction=payload["burn_in_fraction"],
        thin=payload["thin"],
        seed=payload["seed"],
        sigma_fine_draws=np.asarray(payload["sigma_fine_draws"], dtype=float),
        sigma_coarse_draws=np.asarray(payload["sigma_coarse_draws"], dtype=float),
        ref_iterations=list(payload["ref_iterations"]),
        ref_fine=np.asarray(payload["ref_fine"], dtype=float),
        ref_coarse=np.asarray(payload["ref_coarse"], dtype=float),
        config=config_from_dict(payload["config"], path="chain.config")
        if payload["config"] is not None
        else None,
        dataset_digest=payload["dataset_sha256"],
    )


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------

CSV_FILES = (
    "coarse_traj.csv",
    "fine_traj.csv",
    "trace.csv",
    "rmse_coarse.csv",
    "rmse_fine.csv",
)

TRACE_TARGET_FINE = "fine_process"
TRACE_TARGET_COARSE = "coarse_process"


def _fmt(x: float) -> str:
    return repr(float(x))


def export_csv(chain: Chain, data: Dataset, out_dir) -> list:
    """Write the five analysis CSVs for a chain/dataset pair.

    All indices (d, t, k, dim) are zero-based. ``trace.csv`` leaves ``d``
    empty for the shared fine-process target.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    est_fine, est_coarse = posterior_state_mean(chain)
    D, T, K, p = data.fine_states.shape
    m = data.coarse_states.shape[-1]

    paths = []

    path = out / "coarse_traj.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "t", "dim", "true", "estimated"])
        for d in range(D):
            for t in range(T):
                for dim in range(m):
                    w.writerow(
                        [d, t, dim, _fmt(data.coarse_states[d, t, dim]), _fmt(est_coarse[d, t, dim])]
                    )
    paths.append(path)

    path = out / "fine_traj.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "t", "k", "dim", "true", "estimated"])
        for d in range(D):
            for t in range(T):
                for k in range(K):
                    for dim in range(p):
                        w.writerow(
                            [
                                d,
                                t,
                                k,
                                dim,
                                _fmt(data.fine_states[d, t, k, dim]),
                                _fmt(est_fine[d, t, k, dim]),
                            ]
                        )
    paths.append(path)

    path = out / "trace.csv"
    start = chain.burn_in_start
    iters = range(start, chain.n_iterations)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "d", "dim", "iteration", "value"])
        for dim in range(p):
            for r in iters:
                w.writerow(
                    [TRACE_TARGET_FINE, "", dim, r, _fmt(chain.sigma_fine_draws[r, dim, dim])]
                )
        for d in range(D):
            for dim in range(m):
                for r in iters:
                    w.writerow(
                        [
                            TRACE_TARGET_COARSE,
                            d,
                            dim,
                            r,
                            _fmt(chain.sigma_coarse_draws[r, d, dim, dim]),
                        ]
                    )
    paths.append(path)

    table_coarse = rmse_coarse(est_coarse, data.coarse_states)
    path = out / "rmse_coarse.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "dim", "rmse"])
        for d in range(D):
            for dim in range(m):
                w.writerow([d, dim, _fmt(table_coarse[d, dim])])
    paths.append(path)

    table_fine = rmse_fine(est_fine, data.fine_states)
    path = out / "rmse_fine.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "t", "dim", "rmse"])
        for d in range(D):
            for t in range(T):
                for dim in range(p):
                    w.writerow([d, t, dim, _fmt(table_fine[d, t, dim])])
    paths.append(path)

    return paths
