"""
Tests for landmark parsing and ROI grouping.
"""

import math
import random

import numpy as np
import pytest

from face_graph_verifier.errors import (
    DuplicateRegionError,
    LandmarkFormatError,
    LandmarkOutOfBoundsError,
    MissingRegionError,
)
from face_graph_verifier.keypoint import DESCRIPTOR_LENGTH, Keypoint
from face_graph_verifier.landmarks import (
    REGION_ORDER,
    LandmarkSet,
    Region,
    default_roi_radius,
    group_keypoints,
    load_landmarks,
    save_landmarks,
)

VALID_LINES = "left_eye 30 50\nright_eye 70 50\nnose 50 80\nmouth 50 110.5\n"
LANDMARKS = LandmarkSet(
    left_eye=(30.0, 50.0), right_eye=(70.0, 50.0), nose=(50.0, 80.0), mouth=(50.0, 110.0)
)


def keypoint_at(x, y, tag=0):
    descriptor = [0.0] * DESCRIPTOR_LENGTH
    descriptor[tag % DESCRIPTOR_LENGTH] = 1.0
    return Keypoint(x=x, y=y, scale=2.0, orientation=0.0, descriptor=tuple(descriptor))


def test_load_landmarks(tmp_path):
    path = tmp_path / "face.lm"
    path.write_text(VALID_LINES, encoding="utf-8")

    landmarks = load_landmarks(path)
    assert landmarks.left_eye == (30.0, 50.0)
    assert landmarks.mouth == (50.0, 110.5)
    assert landmarks.center(Region.NOSE) == (50.0, 80.0)


def test_load_landmarks_any_line_order(tmp_path):
    path = tmp_path / "face.lm"
    path.write_text("# annotated by hand\nmouth 50 110\n\nnose 50 80\nright_eye 70 50\n"
                    "left_eye 30 50\n", encoding="utf-8")

    assert load_landmarks(path) == LANDMARKS


def test_missing_region_is_named(tmp_path):
    path = tmp_path / "face.lm"
    path.write_text("left_eye 30 50\nright_eye 70 50\nnose 50 80\n", encoding="utf-8")

    with pytest.raises(MissingRegionError, match="mouth"):
        load_landmarks(path)


def test_duplicate_region(tmp_path):
    path = tmp_path / "face.lm"
    path.write_text(VALID_LINES + "nose 51 81\n", encoding="utf-8")

    with pytest.raises(DuplicateRegionError, match="nose"):
        load_landmarks(path)


@pytest.mark.parametrize(
    "line", ["chin 50 130", "nose 50", "nose fifty 80", "nose 50 nan"]
)
def test_malformed_lines(tmp_path, line):
    path = tmp_path / "face.lm"
    path.write_text(line + "\n", encoding="utf-8")

    with pytest.raises(LandmarkFormatError):
        load_landmarks(path)


def test_out_of_bounds(tmp_path):
    path = tmp_path / "face.lm"
    path.write_text(VALID_LINES, encoding="utf-8")

    with pytest.raises(LandmarkOutOfBoundsError, match="mouth"):
        load_landmarks(path, width=100, height=110)


def test_coincident_points_rejected(tmp_path):
    path = tmp_path / "face.lm"
    path.write_text("left_eye 30 50\nright_eye 30 50\nnose 50 80\nmouth 50 110\n")

    with pytest.raises(LandmarkFormatError, match="distinct"):
        load_landmarks(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_landmarks(tmp_path / "absent.lm")


def test_save_landmarks_is_readable(tmp_path):
    save_landmarks(LANDMARKS, tmp_path / "out.lm")

    assert load_landmarks(tmp_path / "out.lm") == LANDMARKS


def test_default_radius():
    assert default_roi_radius(140) == pytest.approx(25.2)


def test_keypoint_at_center_is_grouped():
    groups = group_keypoints([keypoint_at(50.0, 80.0)], LANDMARKS, 10.0)

    assert len(groups[Region.NOSE]) == 1
    assert sum(groups.sizes().values()) == 1


def test_far_keypoint_is_dropped():
    groups = group_keypoints([keypoint_at(95.0, 5.0)], LANDMARKS, 20.0)

    assert all(len(groups[region]) == 0 for region in REGION_ORDER)


def test_equidistant_keypoint_goes_to_earlier_region():
    """Midpoint of left eye and nose lies 18.03 px from both."""
    point = keypoint_at(40.0, 65.0)
    groups = group_keypoints([point], LANDMARKS, 25.0)

    assert groups[Region.LEFT_EYE] == [point]
    assert groups[Region.NOSE] == []
    assert math.hypot(10.0, 15.0) <= 25.0


def test_boundary_is_inclusive():
    groups = group_keypoints([keypoint_at(50.0, 90.0)], LANDMARKS, 10.0)

    assert len(groups[Region.NOSE]) == 1


def test_group_order_follows_input():
    points = [keypoint_at(52.0, 112.0, 1), keypoint_at(48.0, 108.0, 2), keypoint_at(50, 111, 3)]
    groups = group_keypoints(points, LANDMARKS, 10.0)

    assert groups[Region.MOUTH] == points


def test_non_positive_radius():
    with pytest.raises(ValueError, match="positive"):
        group_keypoints([], LANDMARKS, 0.0)


def random_points(seed, count=200):
    rng = np.random.default_rng(seed)
    return [
        keypoint_at(float(x), float(y), tag)
        for tag, (x, y) in enumerate(zip(rng.uniform(0, 100, count), rng.uniform(0, 140, count)))
    ]


@pytest.mark.parametrize("seed", range(5))
def test_groups_are_disjoint_and_within_radius(seed):
    points = random_points(seed)
    groups = group_keypoints(points, LANDMARKS, 30.0)

    seen = []
    for region in REGION_ORDER:
        cx, cy = LANDMARKS.center(region)
        for point in groups[region]:
            assert math.hypot(point.x - cx, point.y - cy) <= 30.0
            assert all(point is not other for other in seen)
            seen.append(point)


@pytest.mark.parametrize("seed", range(5))
def test_enlarging_radius_never_drops_keypoints(seed):
    points = random_points(seed)
    small = group_keypoints(points, LANDMARKS, 15.0)
    large = group_keypoints(points, LANDMARKS, 30.0)

    small_ids = {id(p) for region in REGION_ORDER for p in small[region]}
    large_ids = {id(p) for region in REGION_ORDER for p in large[region]}
    assert small_ids <= large_ids


@pytest.mark.parametrize("seed", range(5))
def test_permuting_input_keeps_membership(seed):
    points = random_points(seed)
    shuffled = list(points)
    random.Random(seed).shuffle(shuffled)

    original = group_keypoints(points, LANDMARKS, 25.0)
    permuted = group_keypoints(shuffled, LANDMARKS, 25.0)
    for region in REGION_ORDER:
        assert {id(p) for p in original[region]} == {id(p) for p in permuted[region]}
        order = {id(p): index for index, p in enumerate(shuffled)}
        assert [order[id(p)] for p in permuted[region]] == sorted(
            order[id(p)] for p in permuted[region]
        )
