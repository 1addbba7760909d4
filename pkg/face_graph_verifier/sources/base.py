"""
Base interface for keypoint sources.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Tuple, Union

from ..keypoint import Keypoint


class BaseKeypointSource(ABC):
    """Abstract base class for anything that yields keypoints for a face image.

    A source is chosen by file extension: raw images are run through the detector,
    precomputed keypoint files are read back as stored.
    """

    #: Human readable name used by :func:`face_graph_verifier.sources.get_source`.
    name: str = ""

    #: Lower-case file extensions, dot included, read by this source.
    extensions: Tuple[str, ...] = ()

    @abstractmethod
    def load(self, path: Union[str, Path]) -> List[Keypoint]:
        """Return the keypoints held in (or detected from) a file.

        Args:
            path (Union[str, Path]):
                Path to the source file.

        Returns:
            (List[Keypoint]):
                Keypoints in deterministic order.

        Raises:
            FileNotFoundError:
                If the file doesn't exist.
            ValueError:
                If the file is not valid for this source.
        """

    def supports_extension(self, extension: str) -> bool:
        """Check if this source reads files with the given extension.

        Args:
            extension (str):
                File extension including the dot (e.g., '.pgm', '.csv').

        Returns:
            (bool):
                True if the extension is handled by this source.
        """
        return extension.lower() in self.extensions

    def validate_file(self, path: Union[str, Path]) -> Path:
        """Check that the file exists and has a supported extension.

        Args:
            path (Union[str, Path]):
                Path to the file to validate.

        Returns:
            (Path):
                The path as a :class:`~pathlib.Path`.

        Raises:
            FileNotFoundError:
                If the file doesn't exist.
            ValueError:
                If the file extension is not supported.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"File not found: {path}")
        if not self.supports_extension(path.suffix.lower()):
            raise ValueError(
                f"File extension {path.suffix} is not supported by {self.__class__.__name__}"
            )
        return path
