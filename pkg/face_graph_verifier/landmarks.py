"""
Facial landmark annotations and region-of-interest grouping.

A landmark file has one ``region x y`` line per region. Keypoints are assigned to the
nearest landmark whose circular ROI contains them, so the four groups never overlap.
"""

import logging
import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import (
    DuplicateRegionError,
    LandmarkFormatError,
    LandmarkOutOfBoundsError,
    MissingRegionError,
)
from .keypoint import Keypoint

logger = logging.getLogger(__name__)

ROI_HEIGHT_FRACTION = 0.18


class Region(str, Enum):
    """Facial regions, in precedence order for tie-breaking and fusion."""

    LEFT_EYE = "left_eye"
    RIGHT_EYE = "right_eye"
    NOSE = "nose"
    MOUTH = "mouth"


REGION_ORDER: Tuple[Region, ...] = (Region.LEFT_EYE, Region.RIGHT_EYE, Region.NOSE, Region.MOUTH)

Point = Tuple[float, float]


class LandmarkSet(BaseModel):
    """Pixel positions of the four facial landmarks.

    Attributes:
        left_eye (Tuple[float, float]):
            ``(x, y)`` of the left eye.
        right_eye (Tuple[float, float]):
            ``(x, y)`` of the right eye.
        nose (Tuple[float, float]):
            ``(x, y)`` of the nose (nostril midpoint).
        mouth (Tuple[float, float]):
            ``(x, y)`` of the mouth centre.
    """

    model_config = ConfigDict(frozen=True)

    left_eye: Point = Field(description="Left eye position")
    right_eye: Point = Field(description="Right eye position")
    nose: Point = Field(description="Nose position")
    mouth: Point = Field(description="Mouth position")

    @model_validator(mode="after")
    def _distinct_points(self) -> "LandmarkSet":
        points = [self.center(region) for region in REGION_ORDER]
        if len(set(points)) != len(points):
            raise ValueError("landmark positions must be pairwise distinct")
        return self

    def center(self, region: Union[Region, str]) -> Point:
        """Return the ``(x, y)`` center of a region."""
        return getattr(self, Region(region).value)

    def centers(self) -> np.ndarray:
        """Region centers as a ``(4, 2)`` array in :data:`REGION_ORDER`."""
        return np.array([self.center(region) for region in REGION_ORDER], dtype=np.float64)

    def check_bounds(self, width: int, height: int) -> None:
        """Raise :class:`LandmarkOutOfBoundsError` if any point lies outside the image."""
        for region in REGION_ORDER:
            x, y = self.center(region)
            if not (0 <= x < width and 0 <= y < height):
                raise LandmarkOutOfBoundsError(
                    f"{region.value} at ({x}, {y}) is outside the {width}x{height} image"
                )


class RegionGroups(BaseModel):
    """Keypoints grouped by facial region.

    Attributes:
        groups (Dict[Region, List[Keypoint]]):
            Keypoints per region, each in input order. Every region is present.
        roi_radius (float):
            Radius of the circular ROIs in pixels.
        landmarks (LandmarkSet):
            The ROI centers used for grouping.
    """

    model_config = ConfigDict(frozen=True)

    groups: Dict[Region, List[Keypoint]]
    roi_radius: float = Field(gt=0.0)
    landmarks: LandmarkSet

    def __getitem__(self, region: Union[Region, str]) -> List[Keypoint]:
        return self.groups[Region(region)]

    def sizes(self) -> Dict[Region, int]:
        return {region: len(self.groups[region]) for region in REGION_ORDER}


def load_landmarks(
    path: Union[str, Path], width: Optional[int] = None, height: Optional[int] = None
) -> LandmarkSet:
    """Read a landmark annotation file.

    Args:
        path (Union[str, Path]):
            UTF-8 text file with four ``region_name x y`` lines. Blank lines and lines
            starting with ``#`` are ignored.

    Keyword Parameters:
        width (Optional[int]):
            Image width; when given together with ``height`` the points are bounds-checked.
        height (Optional[int]):
            Image height.

    Returns:
        (LandmarkSet):
            The validated landmarks.

    Raises:
        FileNotFoundError:
            If the file doesn't exist.
        LandmarkFormatError:
            If a line is malformed or names an unknown region.
        DuplicateRegionError:
            If a region is listed twice.
        MissingRegionError:
            If a region is absent; the message names it.
        LandmarkOutOfBoundsError:
            If a point falls outside the image.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Landmark file not found: {path}")

    found: Dict[Region, Point] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != 3:
                raise LandmarkFormatError(
                    f"{path}:{line_number}: expected 'region x y', got {stripped!r}"
                )
            name, x_text, y_text = fields
            try:
                region = Region(name)
            except ValueError as e:
                valid = ", ".join(r.value for r in REGION_ORDER)
                raise LandmarkFormatError(
                    f"{path}:{line_number}: unknown region {name!r} (expected one of {valid})"
                ) from e
            try:
                x, y = float(x_text), float(y_text)
            except ValueError as e:
                raise LandmarkFormatError(
                    f"{path}:{line_number}: non-numeric coordinate in {stripped!r}"
                ) from e
            if not (math.isfinite(x) and math.isfinite(y)):
                raise LandmarkFormatError(f"{path}:{line_number}: non-finite coordinate")
            if region in found:
                raise DuplicateRegionError(f"{path}:{line_number}: duplicate region {name!r}")
            found[region] = (x, y)

    missing = [region.value for region in REGION_ORDER if region not in found]
    if missing:
        raise MissingRegionError(f"{path}: missing region(s): {', '.join(missing)}")

    try:
        landmarks = LandmarkSet(**{region.value: point for region, point in found.items()})
    except ValueError as e:
        raise LandmarkFormatError(f"{path}: {e}") from e
    if width is not None and height is not None:
        landmarks.check_bounds(width, height)
    return landmarks


def save_landmarks(landmarks: LandmarkSet, path: Union[str, Path]) -> None:
    """Write landmarks in the annotation format read by :func:`load_landmarks`."""
    lines = []
    for region in REGION_ORDER:
        x, y = landmarks.center(region)
        lines.append(f"{region.value} {x!r} {y!r}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def default_roi_radius(image_height: int) -> float:
    """ROI radius used when none is configured: 18% of the image height."""
    return ROI_HEIGHT_FRACTION * image_height


def group_keypoints(
    points: Sequence[Keypoint], landmarks: LandmarkSet, radius: float
) -> RegionGroups:
    """Partition keypoints into the four landmark regions.

    Args:
        points (Sequence[Keypoint]):
            Keypoints of one image.
        landmarks (LandmarkSet):
            ROI centers.
        radius (float):
            ROI radius in pixels, > 0.

    Returns:
        (RegionGroups):
            A keypoint within ``radius`` of one or more centers goes to the nearest one,
            ties going to the region earliest in :data:`REGION_ORDER`. Other keypoints
            are dropped.

    Raises:
        ValueError:
            If ``radius`` is not positive.

    Examples:
        >>> groups = group_keypoints(keypoints, landmarks, default_roi_radius(112))
        >>> len(groups[Region.NOSE])
        7
    """
    if not radius > 0:
        raise ValueError(f"ROI radius must be positive, got {radius}")

    groups: Dict[Region, List[Keypoint]] = {region: [] for region in REGION_ORDER}
    if points:
        positions = np.array([(point.x, point.y) for point in points], dtype=np.float64)
        centers = landmarks.centers()
        distances = np.hypot(
            positions[:, None, 0] - centers[None, :, 0],
            positions[:, None, 1] - centers[None, :, 1],
        )
        nearest = np.argmin(distances, axis=1)
        for index, point in enumerate(points):
            region_index = int(nearest[index])
            if distances[index, region_index] <= radius:
                groups[REGION_ORDER[region_index]].append(point)

    logger.debug(
        "Grouped %d keypoints at radius %.2f: %s",
        len(points),
        radius,
        ", ".join(f"{region.value}={len(groups[region])}" for region in REGION_ORDER),
    )
    return RegionGroups(groups=groups, roi_radius=radius, landmarks=landmarks)
