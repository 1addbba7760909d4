"""
Tests for logging output of the verification pipeline.
"""

import logging

import numpy as np
import pytest

from face_graph_verifier.evaluation import load_manifest, run_verification
from face_graph_verifier.graphmatch import RelaxationConfig, relax
from face_graph_verifier.keypoint import save_keypoints
from face_graph_verifier.verifier import FaceVerifier
from tests.test_graphmatch import random_graph


def test_relaxation_debug_logging(caplog):
    """Test that every relaxation iteration is logged at debug level."""
    caplog.set_level(logging.DEBUG, logger="face_graph_verifier.graphmatch")
    graph = random_graph(np.random.default_rng(0), nodes=4)
    result = relax(graph, graph, RelaxationConfig(max_iterations=5))

    debug_logs = [record for record in caplog.records if record.levelname == "DEBUG"]
    log_text = "\n".join(record.message for record in debug_logs)
    assert "Relaxation iteration 1" in log_text
    assert f"in {result.iterations_used} iterations" in log_text
    assert all(record.name == "face_graph_verifier.graphmatch" for record in debug_logs)


def test_prepare_info_logging(caplog, face_pair):
    """Test that preparing a sample reports keypoint counts."""
    caplog.set_level(logging.INFO, logger="face_graph_verifier")
    (image, landmarks), _ = face_pair
    FaceVerifier().prepare(image, landmarks)

    info_logs = [record for record in caplog.records if record.levelname == "INFO"]
    assert any(
        "Prepared" in record.message and "keypoints" in record.message for record in info_logs
    )


def test_missing_region_warning(caplog, face_pair, tmp_path):
    """Test that a region without keypoints is reported as a warning."""
    (image, landmarks), _ = face_pair
    save_keypoints([], tmp_path / "none.csv")

    with caplog.at_level(logging.WARNING, logger="face_graph_verifier"):
        FaceVerifier().verify(
            image, landmarks, image, landmarks, probe_keypoints=tmp_path / "none.csv"
        )

    warnings = [record for record in caplog.records if record.levelname == "WARNING"]
    assert len([record for record in warnings if "treated as missing" in record.message]) == 4
    assert all(record.name == "face_graph_verifier.verifier" for record in warnings)


def test_evaluation_info_logging(caplog, two_subject_manifest):
    """Test that batch runs log manifest size and trial counts."""
    caplog.set_level(logging.INFO, logger="face_graph_verifier.evaluation")
    run_verification(load_manifest(two_subject_manifest))

    log_text = caplog.text
    assert "4 images" in log_text
    assert "12 trials (4 genuine, 8 impostor)" in log_text


def test_quiet_by_default(caplog, face_pair):
    """Test that nothing below WARNING is emitted without configuration."""
    (image, landmarks), _ = face_pair
    with caplog.at_level(logging.WARNING):
        FaceVerifier().verify(image, landmarks, image, landmarks)

    assert not [record for record in caplog.records if record.levelno < logging.WARNING]


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
