"""
Shared fixtures: synthetic face-like images, landmark files and manifests.
"""

from pathlib import Path

import numpy as np
import pytest

from face_graph_verifier.keypoint import GrayImage, save_image
from face_graph_verifier.landmarks import LandmarkSet, save_landmarks

FACE_WIDTH = 100
FACE_HEIGHT = 140
FACE_LANDMARKS = LandmarkSet(
    left_eye=(30.0, 50.0), right_eye=(70.0, 50.0), nose=(50.0, 80.0), mouth=(50.0, 110.0)
)


def textured_array(seed: int, width: int, height: int, blobs: int = 40) -> np.ndarray:
    """Random Gaussian blobs on a mid-grey background."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    image = np.full((height, width), 0.45)
    for _ in range(blobs):
        cx, cy = rng.uniform(8, width - 8), rng.uniform(8, height - 8)
        sigma = rng.uniform(1.5, 4.0)
        amplitude = rng.uniform(0.15, 0.35) * rng.choice([-1.0, 1.0])
        image += amplitude * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma ** 2))
    return np.clip(image, 0.0, 1.0)


def face_array(subject: int, noise: float = 0.0, variant: int = 0) -> np.ndarray:
    """Face-like image: a few blobs clustered around each landmark of one subject."""
    rng = np.random.default_rng(1000 + subject)
    yy, xx = np.mgrid[0:FACE_HEIGHT, 0:FACE_WIDTH].astype(np.float64)
    image = np.full((FACE_HEIGHT, FACE_WIDTH), 0.45)
    for cx, cy in FACE_LANDMARKS.centers():
        for _ in range(6):
            bx, by = cx + rng.uniform(-12, 12), cy + rng.uniform(-12, 12)
            sigma = rng.uniform(1.5, 4.0)
            amplitude = rng.uniform(0.2, 0.35) * rng.choice([-1.0, 1.0])
            image += amplitude * np.exp(-((xx - bx) ** 2 + (yy - by) ** 2) / (2 * sigma ** 2))
    if noise:
        image += np.random.default_rng(variant).normal(0.0, noise, image.shape)
    return np.clip(image, 0.0, 1.0)


def write_face(directory: Path, name: str, subject: int, noise: float = 0.0, variant: int = 0):
    """Write a face image and its landmarks; return both paths."""
    image_path = directory / f"{name}.pgm"
    landmark_path = directory / f"{name}.lm"
    save_image(GrayImage.from_array(face_array(subject, noise, variant)), image_path)
    save_landmarks(FACE_LANDMARKS, landmark_path)
    return image_path, landmark_path


def write_manifest(directory: Path, rows) -> Path:
    """Write a manifest from ``(subject_id, name, subject, variant)`` rows."""
    lines = ["subject_id,image,landmarks"]
    for subject_id, name, subject, variant in rows:
        write_face(directory, name, subject, noise=0.01 if variant else 0.0, variant=variant)
        lines.append(f"{subject_id},{name}.pgm,{name}.lm")
    manifest = directory / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


@pytest.fixture
def face_pair(tmp_path):
    """Gallery and probe files showing the same synthetic subject."""
    gallery = write_face(tmp_path, "gallery", subject=1)
    probe = write_face(tmp_path, "probe", subject=1, noise=0.01, variant=1)
    return gallery, probe


@pytest.fixture
def impostor_pair(tmp_path):
    """Gallery and probe files showing different synthetic subjects."""
    gallery = write_face(tmp_path, "gallery", subject=1)
    probe = write_face(tmp_path, "probe", subject=2)
    return gallery, probe


@pytest.fixture
def two_subject_manifest(tmp_path):
    """Manifest with two images for each of two subjects."""
    return write_manifest(
        tmp_path,
        [("s1", "s1_1", 1, 0), ("s1", "s1_2", 1, 1), ("s2", "s2_1", 2, 0), ("s2", "s2_2", 2, 2)],
    )
