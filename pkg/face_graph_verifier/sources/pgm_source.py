"""
Keypoints detected from 8-bit PGM face images.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

from ..keypoint import Keypoint, SiftConfig, extract_keypoints, load_image
from .base import BaseKeypointSource

logger = logging.getLogger(__name__)


class PgmImageSource(BaseKeypointSource):
    """Run the SIFT detector over a binary PGM image.

    Keyword Parameters:
        sift (Optional[SiftConfig]):
            Detector parameters; defaults to :class:`SiftConfig`.

    Examples:
        >>> source = PgmImageSource(sift=SiftConfig(octaves=3))
        >>> keypoints = source.load("s1/1.pgm")
    """

    name = "pgm"
    extensions = (".pgm",)

    def __init__(self, sift: Optional[SiftConfig] = None):
        self.sift = sift or SiftConfig()

    def load(self, path: Union[str, Path]) -> List[Keypoint]:
        path = self.validate_file(path)
        logger.debug("Detecting keypoints in %s", path)
        return extract_keypoints(load_image(path), self.sift)
