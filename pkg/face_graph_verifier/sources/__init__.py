"""
Keypoint sources for face-graph-verifier.

A source turns a file into a list of keypoints: PGM images are run through the SIFT
detector, CSV files hold descriptors computed earlier.
"""

from pathlib import Path
from typing import Dict, List, Type, Union

from .base import BaseKeypointSource
from .csv_source import CsvKeypointSource
from .pgm_source import PgmImageSource

# Registry of available sources
SOURCES: Dict[str, Type[BaseKeypointSource]] = {
    "pgm": PgmImageSource,
    "csv": CsvKeypointSource,
}


def get_source(source_name: str, **kwargs) -> BaseKeypointSource:
    """Get a keypoint source instance by name.

    Args:
        source_name (str):
            Name of the source to use ('pgm' or 'csv').

    Keyword Parameters:
        **kwargs:
            Configuration arguments passed to the source (e.g. ``sift``).

    Returns:
        (BaseKeypointSource):
            Configured source instance.

    Raises:
        ValueError:
            If the source name is not recognized.

    Examples:
        >>> source = get_source('pgm')
    """
    key = source_name.lower()
    if key not in SOURCES:
        available = ", ".join(SOURCES.keys())
        raise ValueError(f"Unknown keypoint source: {source_name}. Available sources: {available}")
    return SOURCES[key](**kwargs)


def supported_extensions() -> List[str]:
    """Extensions understood by at least one registered source, in registry order."""
    extensions: List[str] = []
    for source_class in SOURCES.values():
        for extension in source_class.extensions:
            if extension not in extensions:
                extensions.append(extension)
    return extensions


def detect_source(path: Union[str, Path], **kwargs) -> BaseKeypointSource:
    """Pick the source for a file from its extension.

    Args:
        path (Union[str, Path]):
            Path to an image or keypoint file.

    Keyword Parameters:
        **kwargs:
            Configuration arguments passed to the source.

    Returns:
        (BaseKeypointSource):
            Source able to read the file.

    Raises:
        ValueError:
            If no source supports the file extension.

    Examples:
        >>> detect_source('face.pgm').name
        'pgm'
    """
    extension = Path(path).suffix.lower()
    for source_class in SOURCES.values():
        source = source_class(**kwargs)
        if source.supports_extension(extension):
            return source
    raise ValueError(
        f"No keypoint source for file extension: {extension}. "
        f"Supported extensions: {', '.join(supported_extensions())}"
    )


__all__ = [
    "BaseKeypointSource",
    "CsvKeypointSource",
    "PgmImageSource",
    "SOURCES",
    "get_source",
    "detect_source",
    "supported_extensions",
]
