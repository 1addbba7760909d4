"""
Precomputed keypoints stored as CSV.
"""

from pathlib import Path
from typing import List, Optional, Union

from ..keypoint import Keypoint, SiftConfig, load_keypoints
from .base import BaseKeypointSource


class CsvKeypointSource(BaseKeypointSource):
    """Read keypoints previously written by ``face_verify extract``.

    Keyword Parameters:
        sift (Optional[SiftConfig]):
            Accepted so the source can be built interchangeably with
            :class:`~face_graph_verifier.sources.pgm_source.PgmImageSource`; stored
            keypoints are never re-detected, so it is unused.
    """

    name = "csv"
    extensions = (".csv",)

    def __init__(self, sift: Optional[SiftConfig] = None):
        self.sift = sift

    def load(self, path: Union[str, Path]) -> List[Keypoint]:
        return load_keypoints(self.validate_file(path))
