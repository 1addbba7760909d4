"""
face-graph-verifier: face verification by relaxation matching of SIFT landmark graphs.
"""

from .errors import FaceVerifierError
from .evaluation import (
    DatasetManifest,
    ROCSummary,
    Trial,
    compute_roc,
    load_manifest,
    rank1_identification,
    run_verification,
)
from .fusion import (
    FusionConfig,
    MassFunction,
    dempster_combine,
    fuse_region_scores,
    score_to_mass,
)
from .graphmatch import (
    AttributedGraph,
    RelaxationConfig,
    RelaxationResult,
    build_graph,
    graph_match_score,
    relax,
)
from .keypoint import (
    GrayImage,
    Keypoint,
    SiftConfig,
    descriptor_similarity,
    extract_keypoints,
    load_image,
    load_keypoints,
    save_keypoints,
)
from .landmarks import LandmarkSet, Region, RegionGroups, group_keypoints, load_landmarks
from .sources import BaseKeypointSource, detect_source, get_source
from .verifier import FaceSample, FaceVerifier, PipelineConfig, VerificationReport

__version__ = "0.1.0"
__all__ = [
    "FaceVerifier",
    "FaceSample",
    "PipelineConfig",
    "VerificationReport",
    "FaceVerifierError",
    "GrayImage",
    "Keypoint",
    "SiftConfig",
    "load_image",
    "extract_keypoints",
    "load_keypoints",
    "save_keypoints",
    "descriptor_similarity",
    "LandmarkSet",
    "Region",
    "RegionGroups",
    "load_landmarks",
    "group_keypoints",
    "AttributedGraph",
    "RelaxationConfig",
    "RelaxationResult",
    "build_graph",
    "relax",
    "graph_match_score",
    "MassFunction",
    "FusionConfig",
    "score_to_mass",
    "dempster_combine",
    "fuse_region_scores",
    "DatasetManifest",
    "Trial",
    "ROCSummary",
    "load_manifest",
    "run_verification",
    "compute_roc",
    "rank1_identification",
    "BaseKeypointSource",
    "get_source",
    "detect_source",
]
