"""Acceptance: render the full figure set from CSVs produced by the real
inference pipeline, driven purely through its command line.

A reduced-size run keeps this self-contained and fast; the CSV schemas are
identical to the desk-scale run's (whose artifacts, when present from the
core acceptance suite, live in ``../artifacts/criterion3`` and can be fed to
the same commands).
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from plotkit.cli import main

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

pytestmark = pytest.mark.skipif(
    shutil.which("twoscale") is None, reason="twoscale CLI not installed"
)


@pytest.fixture(scope="module")
def pipeline_csvs(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    config = {
        "schema": "twoscale.config/1",
        "dims": {
            "n_individuals": 4,
            "n_coarse_steps": 5,
            "n_fine_steps": 5,
            "fine_dim": 3,
            "coarse_dim": 3,
        },
        "transition": {"kind": "cos-sin"},
        "coupling": {"source": "seed"},
        "noise": {
            "fine_process": 0.2,
            "coarse_process": [0.3, 0.5, 0.7, 0.2],
            "fine_meas": 0.0003,
            "coarse_meas": [0.0003, 0.0005, 0.0007, 0.0009],
        },
        "priors": {
            "fine_scale": 0.1,
            "fine_dof": 4,
            "coarse_scale": [0.1, 0.1, 0.1, 0.1],
            "coarse_dof": [8, 8, 8, 8],
        },
        "inference": {
            "n_particles": 40,
            "n_iterations": 30,
            "burn_in_fraction": 0.1,
            "thin": 5,
            "resampling": "multinomial",
            "dof_mode": "full-count",
        },
        "seed": 7,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=1))
    dataset = root / "data.tsd"
    chain = root / "chain.tsc"
    outdir = root / "report"
    for cmd in (
        ["simulate", "--config", str(config_path), "--out", str(dataset)],
        ["infer", "--dataset", str(dataset), "--config", str(config_path), "--out", str(chain)],
        ["report", "--chain", str(chain), "--dataset", str(dataset), "--out-dir", str(outdir)],
    ):
        subprocess.run(["twoscale", *cmd], check=True, capture_output=True)
    return outdir


def test_full_figure_set(pipeline_csvs, tmp_path):
    # Per-individual coarse trajectory overlays.
    code = main(
        ["--kind", "coarse_traj", "--in", str(pipeline_csvs / "coarse_traj.csv"),
         "--out", str(tmp_path / "coarse.png")]
    )
    assert code == 0
    coarse_images = sorted(tmp_path.glob("coarse_d*.png"))
    assert len(coarse_images) == 4

    # Fine trajectory overlays at every coarse step of the run.
    for t in range(5):
        code = main(
            ["--kind", "fine_traj", "--in", str(pipeline_csvs / "fine_traj.csv"),
             "--out", str(tmp_path / f"fine_t{t}.png"), "--t", str(t)]
        )
        assert code == 0
    fine_images = sorted(tmp_path.glob("fine_t*_d*.png"))
    assert len(fine_images) == 5 * 4

    # Covariance trace grid (per-individual coarse rows plus the shared fine row).
    code = main(
        ["--kind", "trace", "--in", str(pipeline_csvs / "trace.csv"),
         "--out", str(tmp_path / "trace.png")]
    )
    assert code == 0

    for image in [*coarse_images, *fine_images, tmp_path / "trace.png"]:
        assert image.read_bytes()[:8] == PNG_MAGIC
    print(
        f"[PASS] criterion 7 (figure set): {len(coarse_images)} coarse images, "
        f"{len(fine_images)} fine images, 1 trace grid rendered from pipeline CSVs"
    )


def test_runs_via_module_entry(pipeline_csvs, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "plotkit.cli", "--kind", "trace",
         "--in", str(pipeline_csvs / "trace.csv"), "--out", str(tmp_path / "t.png")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert Path(proc.stdout.strip()).exists()
