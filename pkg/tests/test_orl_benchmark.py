"""
End-to-end smoke run on ten ORL subjects with four images each.

Needs the ORL archive, looked up at ``benchmarks/orl/att_faces`` or
``$FACE_VERIFY_ORL_DIR``; skipped otherwise.
"""

import csv
import os
from pathlib import Path

import numpy as np
import pytest

from face_graph_verifier.evaluation import (
    compute_roc,
    load_manifest,
    rank1_identification,
    run_verification,
    write_roc_csv,
)

BENCHMARK_DIR = Path(__file__).parent.parent / "benchmarks" / "orl"


def orl_directory():
    configured = os.environ.get("FACE_VERIFY_ORL_DIR")
    directory = Path(configured).expanduser() if configured else BENCHMARK_DIR / "att_faces"
    return directory if (directory / "s1" / "1.pgm").exists() else None


@pytest.fixture
def orl_manifest(tmp_path):
    """The shipped manifest with its image paths pointed at the local archive."""
    images = orl_directory()
    if images is None:
        pytest.skip("ORL archive not found; set FACE_VERIFY_ORL_DIR")
    with open(BENCHMARK_DIR / "manifest.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    lines = ["subject_id,image,landmarks"]
    for row in rows:
        image = images / Path(row["image"]).relative_to("att_faces")
        landmarks = BENCHMARK_DIR / row["landmarks"]
        lines.append(f"{row['subject_id']},{image.resolve()},{landmarks.resolve()}")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def test_shipped_manifest_covers_ten_subjects():
    with open(BENCHMARK_DIR / "manifest.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))

    assert len(rows) == 40
    assert sorted({row["subject_id"] for row in rows}) == sorted(f"s{n}" for n in range(1, 11))
    assert all((BENCHMARK_DIR / row["landmarks"]).exists() for row in rows)


@pytest.mark.slow
def test_orl_smoke(orl_manifest, tmp_path):
    manifest = load_manifest(orl_manifest)
    assert len(manifest.entries) == 40

    trials = run_verification(manifest, workers=2)
    genuine = [t.fused_genuine_belief for t in trials if t.is_genuine]
    impostor = [t.fused_genuine_belief for t in trials if not t.is_genuine]
    assert (len(genuine), len(impostor)) == (120, 1440)
    assert np.mean(genuine) > np.mean(impostor)
    assert rank1_identification(trials) > 0.1

    write_roc_csv(compute_roc(trials), tmp_path / "first.csv")
    write_roc_csv(compute_roc(run_verification(manifest)), tmp_path / "second.csv")
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()
