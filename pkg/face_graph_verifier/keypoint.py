"""
Grayscale image loading and SIFT keypoint extraction.

The detector builds a difference-of-Gaussians scale space, keeps scale-space extrema
that survive contrast and edge-response rejection, assigns one keypoint per dominant
gradient orientation and describes each one with a 4x4x8 gradient-orientation histogram
(128 elements, normalized, clamped and renormalized).
"""

import csv
import logging
import math
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import cv2
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import (
    ImageTooSmallError,
    KeypointFormatError,
    MalformedImageError,
    UnsupportedBitDepthError,
)

# Set up module logger
logger = logging.getLogger(__name__)

DESCRIPTOR_LENGTH = 128
MIN_IMAGE_DIMENSION = 32
MAX_IMAGE_DIMENSION = 4096
NORM_TOLERANCE = 1e-6
TWO_PI = 2.0 * math.pi

KEYPOINT_CSV_HEADER = ["x", "y", "scale", "orientation"] + [
    f"d{index}" for index in range(DESCRIPTOR_LENGTH)
]

PathLike = Union[str, Path]


class GrayImage(BaseModel):
    """Immutable grayscale image with luminance values in [0, 1].

    Attributes:
        width (int):
            Image width in pixels.
        height (int):
            Image height in pixels.
        data (np.ndarray):
            Read-only float64 array of shape ``(height, width)``; ``data.ravel()`` is the
            row-major pixel sequence.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    width: int = Field(gt=0, description="Image width in pixels")
    height: int = Field(gt=0, description="Image height in pixels")
    data: np.ndarray = Field(description="Luminance array of shape (height, width)")

    @field_validator("data", mode="before")
    @classmethod
    def _as_readonly_array(cls, value):
        array = np.array(value, dtype=np.float64)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_pixels(self) -> "GrayImage":
        if self.data.shape != (self.height, self.width):
            raise ValueError(
                f"data shape {self.data.shape} does not match {self.height}x{self.width}"
            )
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise ValueError("pixel values must lie within [0, 1]")
        return self

    @classmethod
    def from_array(cls, array: np.ndarray) -> "GrayImage":
        """Build an image from a 2-D array of luminance values in [0, 1].

        Args:
            array (np.ndarray):
                Array of shape ``(height, width)``.

        Returns:
            (GrayImage):
                The validated image.
        """
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {array.shape}")
        return cls(width=array.shape[1], height=array.shape[0], data=array)


class Keypoint(BaseModel):
    """A scale-invariant keypoint with its 128-element descriptor.

    Attributes:
        x (float):
            Sub-pixel column coordinate in input-image pixels.
        y (float):
            Sub-pixel row coordinate in input-image pixels.
        scale (float):
            Gaussian scale sigma in input-image pixels.
        orientation (float):
            Dominant gradient orientation in radians, in [0, 2*pi).
        descriptor (Tuple[float, ...]):
            128 non-negative values with unit Euclidean norm.
    """

    model_config = ConfigDict(frozen=True)

    x: float = Field(allow_inf_nan=False, description="Column coordinate")
    y: float = Field(allow_inf_nan=False, description="Row coordinate")
    scale: float = Field(gt=0.0, allow_inf_nan=False, description="Gaussian scale sigma")
    orientation: float = Field(
        ge=0.0, lt=TWO_PI, allow_inf_nan=False, description="Orientation in radians"
    )
    descriptor: Tuple[float, ...] = Field(description="Unit-norm 128-element descriptor")

    @field_validator("descriptor")
    @classmethod
    def _check_descriptor(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) != DESCRIPTOR_LENGTH:
            raise ValueError(
                f"descriptor must have {DESCRIPTOR_LENGTH} elements, got {len(value)}"
            )
        vector = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(vector)):
            raise ValueError("descriptor entries must be finite")
        if np.any(vector < 0.0):
            raise ValueError("descriptor entries must be non-negative")
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"descriptor norm must be 1 within {NORM_TOLERANCE}, got {norm}")
        return value

    @property
    def position(self) -> Tuple[float, float]:
        """Return the ``(x, y)`` location."""
        return (self.x, self.y)


class SiftConfig(BaseModel):
    """Parameters of the SIFT detector and descriptor.

    Attributes:
        octaves (int):
            Maximum number of octaves; fewer are used when the image is too small.
        scales_per_octave (int):
            Number of DoG layers searched for extrema per octave.
        contrast_threshold (float):
            Minimum interpolated DoG magnitude, scaled by ``scales_per_octave``.
        edge_response_threshold (float):
            Maximum ratio of principal curvatures accepted.
        descriptor_clamp (float):
            Clamp applied to normalized descriptor entries before renormalization.
        sigma (float):
            Blur of the first level of each octave.
        assumed_blur (float):
            Blur already present in the input image.
        border_width (int):
            Pixels at each octave border ignored during extremum search.
        upsample (bool):
            Double the input before building the pyramid.
        orientation_bins (int):
            Bins of the orientation histogram.
        orientation_peak_ratio (float):
            Secondary peaks above this fraction of the maximum yield extra keypoints.
    """

    model_config = ConfigDict(frozen=True)

    octaves: int = Field(default=4, ge=1, description="Maximum number of octaves")
    scales_per_octave: int = Field(default=3, ge=2, description="DoG layers per octave")
    contrast_threshold: float = Field(default=0.03, gt=0.0, description="DoG contrast floor")
    edge_response_threshold: float = Field(
        default=10.0, gt=0.0, description="Principal curvature ratio limit"
    )
    descriptor_clamp: float = Field(default=0.2, gt=0.0, description="Descriptor clamp")
    sigma: float = Field(default=1.6, gt=0.0, description="Base blur of each octave")
    assumed_blur: float = Field(default=0.5, ge=0.0, description="Blur of the input image")
    border_width: int = Field(default=5, ge=1, description="Ignored border in pixels")
    upsample: bool = Field(default=True, description="Double the input image first")
    orientation_bins: int = Field(default=36, ge=8, description="Orientation histogram bins")
    orientation_peak_ratio: float = Field(
        default=0.8, gt=0.0, le=1.0, description="Relative height of secondary peaks"
    )


class _Extremum(NamedTuple):
    octave: int
    layer: int
    row: float
    col: float
    octave_sigma: float


def load_image(path: PathLike) -> GrayImage:
    """Load an 8-bit binary PGM (P5) file.

    Args:
        path (PathLike):
            Path to the PGM file.

    Returns:
        (GrayImage):
            Image with pixel values scaled to [0, 1] by the declared maximum value.

    Raises:
        FileNotFoundError:
            If the file doesn't exist.
        MalformedImageError:
            If the header or pixel payload is malformed or truncated.
        UnsupportedBitDepthError:
            If the maximum value exceeds 255.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image file not found: {path}")

    raw = path.read_bytes()
    tokens, offset = _read_pgm_header(raw, path)
    magic, width_token, height_token, maxval_token = tokens
    if magic != b"P5":
        raise MalformedImageError(f"{path}: not a binary PGM (magic {magic!r}, expected b'P5')")

    try:
        width, height, maxval = int(width_token), int(height_token), int(maxval_token)
    except ValueError as e:
        raise MalformedImageError(f"{path}: non-numeric PGM header field") from e

    if width <= 0 or height <= 0:
        raise MalformedImageError(f"{path}: invalid dimensions {width}x{height}")
    if width > MAX_IMAGE_DIMENSION or height > MAX_IMAGE_DIMENSION:
        raise MalformedImageError(
            f"{path}: dimensions {width}x{height} exceed the {MAX_IMAGE_DIMENSION} pixel limit"
        )
    if maxval <= 0:
        raise MalformedImageError(f"{path}: invalid maximum value {maxval}")
    if maxval > 255:
        raise UnsupportedBitDepthError(
            f"{path}: maximum value {maxval} needs 16-bit samples; only 8-bit PGM is supported"
        )

    expected = width * height
    payload = raw[offset:offset + expected]
    if len(payload) < expected:
        raise MalformedImageError(
            f"{path}: truncated pixel data ({len(payload)} of {expected} bytes)"
        )

    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    if pixels.max(initial=0) > maxval:
        raise MalformedImageError(f"{path}: pixel value exceeds declared maximum {maxval}")
    logger.debug("Loaded %s (%dx%d, maxval %d)", path, width, height, maxval)
    return GrayImage(width=width, height=height, data=pixels / float(maxval))


def _read_pgm_header(raw: bytes, path: Path) -> Tuple[List[bytes], int]:
    """Tokenize the four PGM header fields, skipping comments.

    Returns:
        (Tuple[List[bytes], int]):
            The header tokens and the offset of the first pixel byte.
    """
    tokens: List[bytes] = []
    pos = 0
    size = len(raw)
    while len(tokens) < 4:
        while pos < size and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < size and raw[pos:pos + 1] == b"#":
            while pos < size and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < size and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedImageError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    # exactly one whitespace byte separates the header from the payload
    if pos >= size or not raw[pos:pos + 1].isspace():
        raise MalformedImageError(f"{path}: missing pixel data after PGM header")
    return tokens, pos + 1


def save_image(image: GrayImage, path: PathLike) -> None:
    """Write an image as an 8-bit binary PGM (P5) file.

    Args:
        image (GrayImage):
            Image to write; values are rounded to the nearest of 256 levels.
        path (PathLike):
            Destination path.
    """
    pixels = np.round(image.data * 255.0).astype(np.uint8)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def extract_keypoints(image: GrayImage, cfg: Optional[SiftConfig] = None) -> List[Keypoint]:
    """Extract SIFT keypoints from a grayscale image.

    Args:
        image (GrayImage):
            Input image, at least 32x32 pixels.
        cfg (Optional[SiftConfig]):
            Detector parameters; defaults to :class:`SiftConfig`.

    Returns:
        (List[Keypoint]):
            Keypoints ordered by octave, scale, row, column and orientation.

    Raises:
        ImageTooSmallError:
            If either dimension is below 32 pixels.

    Examples:
        >>> keypoints = extract_keypoints(load_image("face.pgm"))
    """
    cfg = cfg or SiftConfig()
    if image.width < MIN_IMAGE_DIMENSION or image.height < MIN_IMAGE_DIMENSION:
        raise ImageTooSmallError(
            f"image is {image.width}x{image.height}; at least "
            f"{MIN_IMAGE_DIMENSION}x{MIN_IMAGE_DIMENSION} is required"
        )

    base = _base_image(image.data.astype(np.float32), cfg)
    num_octaves = min(cfg.octaves, _max_octaves(base.shape))
    kernels = _gaussian_kernels(cfg.sigma, cfg.scales_per_octave)
    gaussians = _gaussian_pyramid(base, num_octaves, kernels)
    dogs = [
        [np.subtract(upper, lower) for lower, upper in zip(octave, octave[1:])]
        for octave in gaussians
    ]
    logger.debug("Built %d octaves of %d DoG layers", num_octaves, len(dogs[0]))

    entries = []
    for extremum in _find_extrema(dogs, cfg):
        gaussian = gaussians[extremum.octave][extremum.layer]
        for orientation in _orientations(gaussian, extremum, cfg):
            descriptor = _descriptor(gaussian, extremum, orientation, cfg)
            if descriptor is None:
                continue
            x, y, scale = _to_input_coordinates(extremum, cfg)
            entries.append((extremum.octave, scale, y, x, orientation, descriptor))

    entries.sort(key=lambda entry: entry[:5])
    keypoints: List[Keypoint] = []
    previous = None
    for octave, scale, y, x, orientation, descriptor in entries:
        key = (octave, scale, y, x, orientation)
        if key == previous:
            continue
        previous = key
        keypoints.append(
            Keypoint(
                x=x, y=y, scale=scale, orientation=orientation, descriptor=descriptor.tolist()
            )
        )
    logger.info("Extracted %d keypoints from %dx%d image", len(keypoints), image.width,
                image.height)
    return keypoints


def _base_image(image: np.ndarray, cfg: SiftConfig) -> np.ndarray:
    """Upsample (optionally) and blur the input to the first pyramid level."""
    if cfg.upsample:
        image = cv2.resize(image, (0, 0), fx=2, fy=2, interpolation=cv2.INTER_LINEAR)
        present_blur = 2.0 * cfg.assumed_blur
    else:
        present_blur = cfg.assumed_blur
    sigma_diff = math.sqrt(max(cfg.sigma ** 2 - present_blur ** 2, 0.01))
    return cv2.GaussianBlur(image, (0, 0), sigmaX=sigma_diff, sigmaY=sigma_diff)


def _max_octaves(shape: Tuple[int, ...]) -> int:
    return max(1, int(round(math.log2(min(shape)) - 1)))


def _gaussian_kernels(sigma: float, scales: int) -> np.ndarray:
    """Incremental blurs taking each level of an octave to the next."""
    k = 2.0 ** (1.0 / scales)
    kernels = np.zeros(scales + 3)
    kernels[0] = sigma
    for index in range(1, scales + 3):
        previous = (k ** (index - 1)) * sigma
        kernels[index] = math.sqrt((k * previous) ** 2 - previous ** 2)
    return kernels


def _gaussian_pyramid(
    base: np.ndarray, num_octaves: int, kernels: np.ndarray
) -> List[List[np.ndarray]]:
    pyramid = []
    image = base
    for _ in range(num_octaves):
        octave = [image]
        for kernel in kernels[1:]:
            image = cv2.GaussianBlur(image, (0, 0), sigmaX=kernel, sigmaY=kernel)
            octave.append(image)
        pyramid.append(octave)
        # the level with twice the base blur seeds the next octave; averaging 2x2 blocks
        # keeps the sampling grid symmetric under 90 degree rotation
        seed = octave[-3]
        image = cv2.resize(
            seed, (seed.shape[1] // 2, seed.shape[0] // 2), interpolation=cv2.INTER_LINEAR
        )
    return pyramid


def _find_extrema(dogs: List[List[np.ndarray]], cfg: SiftConfig) -> List[_Extremum]:
    """Locate and refine DoG scale-space extrema in every octave."""
    scales = cfg.scales_per_octave
    prefilter = 0.5 * cfg.contrast_threshold / scales
    extrema = []
    for octave_index, octave in enumerate(dogs):
        for layer in range(1, scales + 1):
            candidates = _extremum_candidates(
                octave[layer - 1], octave[layer], octave[layer + 1], prefilter, cfg.border_width
            )
            for row, col in candidates:
                refined = _localize(octave, octave_index, layer, row, col, cfg)
                if refined is not None:
                    extrema.append(refined)
    logger.debug("Kept %d localized extrema", len(extrema))
    return extrema


def _extremum_candidates(
    below: np.ndarray, current: np.ndarray, above: np.ndarray, threshold: float, border: int
) -> List[Tuple[int, int]]:
    """Pixels that are maxima or minima of their 3x3x3 neighbourhood."""
    height, width = current.shape
    if height <= 2 * border or width <= 2 * border:
        return []
    center = current[1:-1, 1:-1]
    is_max = center > threshold
    is_min = center < -threshold
    for layer in (below, current, above):
        for dy in range(3):
            for dx in range(3):
                neighbour = layer[dy:height - 2 + dy, dx:width - 2 + dx]
                is_max &= center >= neighbour
                is_min &= center <= neighbour
    rows, cols = np.nonzero(is_max | is_min)
    rows = rows + 1
    cols = cols + 1
    inside = (
        (rows >= border) & (rows < height - border) & (cols >= border) & (cols < width - border)
    )
    return list(zip(rows[inside].tolist(), cols[inside].tolist()))


def _localize(
    octave: List[np.ndarray],
    octave_index: int,
    layer: int,
    row: int,
    col: int,
    cfg: SiftConfig,
    max_attempts: int = 5,
) -> Optional[_Extremum]:
    """Refine an extremum by a 3-D quadratic fit and apply contrast/edge rejection."""
    scales = cfg.scales_per_octave
    height, width = octave[0].shape
    border = cfg.border_width
    for _ in range(max_attempts):
        cube = np.stack(
            [octave[layer + offset][row - 1:row + 2, col - 1:col + 2] for offset in (-1, 0, 1)]
        ).astype(np.float64)
        gradient = _cube_gradient(cube)
        hessian = _cube_hessian(cube)
        update = -np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        if np.all(np.abs(update) < 0.5):
            break
        col += int(round(update[0]))
        row += int(round(update[1]))
        layer += int(round(update[2]))
        if (
            row < border
            or row >= height - border
            or col < border
            or col >= width - border
            or layer < 1
            or layer > scales
        ):
            return None
    else:
        return None

    value = cube[1, 1, 1] + 0.5 * float(np.dot(gradient, update))
    if abs(value) * scales < cfg.contrast_threshold:
        return None
    xy_hessian = hessian[:2, :2]
    trace = float(np.trace(xy_hessian))
    determinant = float(np.linalg.det(xy_hessian))
    ratio = cfg.edge_response_threshold
    if determinant <= 0 or ratio * trace ** 2 >= (ratio + 1) ** 2 * determinant:
        return None

    octave_sigma = cfg.sigma * 2.0 ** ((layer + update[2]) / scales)
    return _Extremum(
        octave=octave_index,
        layer=layer,
        row=row + float(update[1]),
        col=col + float(update[0]),
        octave_sigma=float(octave_sigma),
    )


def _cube_gradient(cube: np.ndarray) -> np.ndarray:
    # axes: (scale, row, col); returned order is (x, y, s)
    dx = 0.5 * (cube[1, 1, 2] - cube[1, 1, 0])
    dy = 0.5 * (cube[1, 2, 1] - cube[1, 0, 1])
    ds = 0.5 * (cube[2, 1, 1] - cube[0, 1, 1])
    return np.array([dx, dy, ds])


def _cube_hessian(cube: np.ndarray) -> np.ndarray:
    center = cube[1, 1, 1]
    dxx = cube[1, 1, 2] - 2 * center + cube[1, 1, 0]
    dyy = cube[1, 2, 1] - 2 * center + cube[1, 0, 1]
    dss = cube[2, 1, 1] - 2 * center + cube[0, 1, 1]
    dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
    dxs = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
    dys = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
    return np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])


def _to_input_coordinates(extremum: _Extremum, cfg: SiftConfig) -> Tuple[float, float, float]:
    """Map octave coordinates back to input-image pixels."""
    factor = 2.0 ** extremum.octave
    # halving places octave pixel j at 2j + 0.5 in the octave below
    shift = 0.5 * (factor - 1.0)
    if cfg.upsample:
        # bilinear 2x upsampling places base pixel u at input position u / 2 - 0.25
        x = (extremum.col * factor + shift) / 2.0 - 0.25
        y = (extremum.row * factor + shift) / 2.0 - 0.25
        scale = extremum.octave_sigma * factor / 2.0
    else:
        x = extremum.col * factor + shift
        y = extremum.row * factor + shift
        scale = extremum.octave_sigma * factor
    return float(x), float(y), float(scale)


def _window_gradients(
    gaussian: np.ndarray, rows: np.ndarray, cols: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and orientation (radians, y pointing up) at the given pixels."""
    dx = gaussian[rows, cols + 1].astype(np.float64) - gaussian[rows, cols - 1]
    dy = gaussian[rows - 1, cols].astype(np.float64) - gaussian[rows + 1, cols]
    return np.hypot(dx, dy), np.arctan2(dy, dx) % TWO_PI


def _orientations(gaussian: np.ndarray, extremum: _Extremum, cfg: SiftConfig) -> List[float]:
    """Dominant orientations (radians) of the gradient histogram around a keypoint."""
    height, width = gaussian.shape
    num_bins = cfg.orientation_bins
    window_sigma = 1.5 * extremum.octave_sigma
    radius = int(round(3 * window_sigma))
    center_row = int(round(extremum.row))
    center_col = int(round(extremum.col))

    offsets = np.arange(-radius, radius + 1)
    rows, cols = np.meshgrid(center_row + offsets, center_col + offsets, indexing="ij")
    inside = (rows > 0) & (rows < height - 1) & (cols > 0) & (cols < width - 1)
    rows, cols = rows[inside], cols[inside]
    if rows.size == 0:
        return []

    magnitude, angle = _window_gradients(gaussian, rows, cols)
    weight = np.exp(-0.5 * ((rows - center_row) ** 2 + (cols - center_col) ** 2)
                    / window_sigma ** 2)
    bins = np.round(angle * num_bins / TWO_PI).astype(int) % num_bins
    histogram = np.bincount(bins, weights=weight * magnitude, minlength=num_bins)
    smooth = (
        6 * histogram
        + 4 * (np.roll(histogram, 1) + np.roll(histogram, -1))
        + np.roll(histogram, 2)
        + np.roll(histogram, -2)
    ) / 16.0

    peak_max = smooth.max()
    if peak_max <= 0:
        return []
    peaks = np.nonzero((smooth > np.roll(smooth, 1)) & (smooth > np.roll(smooth, -1)))[0]
    orientations = []
    for index in peaks:
        value = smooth[index]
        if value < cfg.orientation_peak_ratio * peak_max:
            continue
        left = smooth[(index - 1) % num_bins]
        right = smooth[(index + 1) % num_bins]
        offset = 0.5 * (left - right) / (left - 2 * value + right)
        orientation = float(((index + offset) % num_bins) * TWO_PI / num_bins)
        if orientation >= TWO_PI:
            orientation = 0.0
        orientations.append(orientation)
    return sorted(orientations)


def _descriptor(
    gaussian: np.ndarray,
    extremum: _Extremum,
    orientation: float,
    cfg: SiftConfig,
    window_width: int = 4,
    num_bins: int = 8,
) -> Optional[np.ndarray]:
    """Rotation-normalized 4x4x8 gradient histogram, or None for a flat patch."""
    height, width = gaussian.shape
    cos_angle = math.cos(orientation)
    sin_angle = math.sin(orientation)
    hist_width = 3.0 * extremum.octave_sigma
    half_width = int(round(hist_width * math.sqrt(2) * (window_width + 1) * 0.5))
    half_width = int(min(half_width, math.sqrt(height ** 2 + width ** 2)))
    center_row = int(round(extremum.row))
    center_col = int(round(extremum.col))

    offsets = np.arange(-half_width, half_width + 1)
    row_offset, col_offset = np.meshgrid(offsets, offsets, indexing="ij")
    row_rot = col_offset * sin_angle + row_offset * cos_angle
    col_rot = col_offset * cos_angle - row_offset * sin_angle
    row_bin = row_rot / hist_width + 0.5 * window_width - 0.5
    col_bin = col_rot / hist_width + 0.5 * window_width - 0.5
    rows = center_row + row_offset
    cols = center_col + col_offset
    keep = (
        (row_bin > -1) & (row_bin < window_width) & (col_bin > -1) & (col_bin < window_width)
        & (rows > 0) & (rows < height - 1) & (cols > 0) & (cols < width - 1)
    )
    if not np.any(keep):
        return None

    row_bin, col_bin = row_bin[keep], col_bin[keep]
    row_rot, col_rot = row_rot[keep], col_rot[keep]
    magnitude, angle = _window_gradients(gaussian, rows[keep], cols[keep])
    weight = np.exp(-0.5 / (0.5 * window_width) ** 2
                    * ((row_rot / hist_width) ** 2 + (col_rot / hist_width) ** 2))
    magnitude = magnitude * weight
    orientation_bin = ((angle - orientation) % TWO_PI) * num_bins / TWO_PI

    # trilinear interpolation into a histogram padded by one cell on each spatial side
    row_floor = np.floor(row_bin).astype(int)
    col_floor = np.floor(col_bin).astype(int)
    ori_floor = np.floor(orientation_bin).astype(int)
    row_frac = row_bin - row_floor
    col_frac = col_bin - col_floor
    ori_frac = orientation_bin - ori_floor
    ori_floor %= num_bins

    histogram = np.zeros((window_width + 2, window_width + 2, num_bins))
    for d_row, row_weight in ((0, 1 - row_frac), (1, row_frac)):
        for d_col, col_weight in ((0, 1 - col_frac), (1, col_frac)):
            for d_ori, ori_weight in ((0, 1 - ori_frac), (1, ori_frac)):
                np.add.at(
                    histogram,
                    (row_floor + 1 + d_row, col_floor + 1 + d_col, (ori_floor + d_ori) % num_bins),
                    magnitude * row_weight * col_weight * ori_weight,
                )

    vector = histogram[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vector)
    if norm <= 0:
        return None
    vector = np.minimum(vector / norm, cfg.descriptor_clamp)
    norm = np.linalg.norm(vector)
    if norm <= 0:
        return None
    return vector / norm


def save_keypoints(points: Sequence[Keypoint], path: PathLike) -> None:
    """Write keypoints to a UTF-8 CSV file.

    The header is ``x,y,scale,orientation,d0,...,d127``; values are written with
    ``repr`` so a subsequent :func:`load_keypoints` reproduces them exactly.

    Args:
        points (Sequence[Keypoint]):
            Keypoints in the order they should be stored.
        path (PathLike):
            Destination path.
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(KEYPOINT_CSV_HEADER)
        for point in points:
            writer.writerow(
                [
                    repr(float(value))
                    for value in (point.x, point.y, point.scale, point.orientation)
                ]
                + [repr(float(value)) for value in point.descriptor]
            )
    logger.debug("Wrote %d keypoints to %s", len(points), path)


def load_keypoints(path: PathLike) -> List[Keypoint]:
    """Read keypoints written by :func:`save_keypoints` (or by another tool).

    Args:
        path (PathLike):
            Path to the keypoint CSV file.

    Returns:
        (List[Keypoint]):
            Keypoints in file order.

    Raises:
        FileNotFoundError:
            If the file doesn't exist.
        KeypointFormatError:
            If the header, a column count, a field or a descriptor is invalid; the error
            names the offending line.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Keypoint file not found: {path}")

    expected_fields = len(KEYPOINT_CSV_HEADER)
    keypoints: List[Keypoint] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [field.strip() for field in header] != KEYPOINT_CSV_HEADER:
            raise KeypointFormatError("missing or invalid keypoint CSV header", line_number=1)
        for row in reader:
            line_number = reader.line_num
            if not row:
                continue
            if len(row) != expected_fields:
                raise KeypointFormatError(
                    f"expected {expected_fields} fields, got {len(row)}", line_number=line_number
                )
            try:
                values = [float(field) for field in row]
            except ValueError as e:
                raise KeypointFormatError(f"non-numeric field: {e}", line_number=line_number) from e
            if not all(math.isfinite(value) for value in values):
                raise KeypointFormatError("non-finite field", line_number=line_number)
            try:
                keypoints.append(
                    Keypoint(
                        x=values[0],
                        y=values[1],
                        scale=values[2],
                        orientation=values[3],
                        descriptor=values[4:],
                    )
                )
            except ValueError as e:
                raise KeypointFormatError(
                    f"invalid keypoint: {e}", line_number=line_number
                ) from e
    logger.debug("Loaded %d keypoints from %s", len(keypoints), path)
    return keypoints


def descriptor_similarity(a: Keypoint, b: Keypoint) -> float:
    """Similarity of two keypoint descriptors.

    Descriptors are non-negative unit vectors, so their dot product already lies in
    [0, 1]; the result is clamped to absorb rounding.

    Args:
        a (Keypoint):
            First keypoint.
        b (Keypoint):
            Second keypoint.

    Returns:
        (float):
            Score in [0, 1], symmetric in its arguments.

    Raises:
        ValueError:
            If the descriptor lengths differ.

    Examples:
        >>> descriptor_similarity(point, point)
        1.0
    """
    if len(a.descriptor) != len(b.descriptor):
        raise ValueError(
            f"descriptor length mismatch: {len(a.descriptor)} vs {len(b.descriptor)}"
        )
    dot = float(np.dot(np.asarray(a.descriptor), np.asarray(b.descriptor)))
    return min(max(dot, 0.0), 1.0)


def descriptor_matrix(points: Sequence[Keypoint]) -> np.ndarray:
    """Stack keypoint descriptors into an ``(n, 128)`` array."""
    if not points:
        return np.zeros((0, DESCRIPTOR_LENGTH))
    return np.array([point.descriptor for point in points], dtype=np.float64)
