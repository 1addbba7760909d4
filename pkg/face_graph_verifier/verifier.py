"""
Single-pair face verification pipeline.

A face image and its landmark file are prepared once into a :class:`FaceSample`
(keypoints grouped per region, one attributed graph per region). Two samples are then
compared region by region with relaxation matching and the regional scores are fused.
"""

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from .errors import AllRegionsMissingError
from .fusion import FusionConfig, MassFunction, fuse_region_scores
from .graphmatch import (
    AttributedGraph,
    RelaxationConfig,
    RelaxationResult,
    build_graph,
    graph_match_score,
    relax,
    weighted_match_score,
)
from .keypoint import Keypoint, SiftConfig, extract_keypoints, load_image
from .landmarks import (
    REGION_ORDER,
    LandmarkSet,
    Region,
    RegionGroups,
    default_roi_radius,
    group_keypoints,
    load_landmarks,
)
from .sources import detect_source

# Set up module logger
logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class PipelineConfig(BaseModel):
    """Settings for every stage of a comparison.

    Attributes:
        sift (SiftConfig):
            Keypoint detector settings.
        roi_radius (Optional[float]):
            ROI radius in pixels; None uses 18% of each image's height.
        relaxation (RelaxationConfig):
            Graph matcher settings.
        fusion (FusionConfig):
            Evidence fusion settings.
        region_score (str):
            ``similarity`` weights each assigned node by its descriptor similarity,
            ``posterior`` uses the posterior maxima alone.
    """

    model_config = ConfigDict(frozen=True)

    sift: SiftConfig = Field(default_factory=SiftConfig)
    roi_radius: Optional[float] = Field(default=None, gt=0.0, description="ROI radius in pixels")
    relaxation: RelaxationConfig = Field(default_factory=RelaxationConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    region_score: Literal["similarity", "posterior"] = Field(
        default="similarity", description="Regional score fed to fusion"
    )


class FaceSample(BaseModel):
    """A face image prepared for comparison.

    Attributes:
        image_path (str):
            Source image.
        width (int):
            Image width in pixels.
        height (int):
            Image height in pixels.
        landmarks (LandmarkSet):
            Landmark annotation.
        keypoints (List[Keypoint]):
            All keypoints of the image.
        groups (RegionGroups):
            Keypoints per region.
        graphs (Dict[Region, AttributedGraph]):
            Attributed graph per region.
    """

    model_config = ConfigDict(frozen=True)

    image_path: str
    width: int
    height: int
    landmarks: LandmarkSet
    keypoints: List[Keypoint]
    groups: RegionGroups
    graphs: Dict[Region, AttributedGraph]


class RegionResult(BaseModel):
    """Outcome of matching one facial region.

    Attributes:
        region (Region):
            The region.
        gallery_nodes (int):
            Gallery graph size.
        probe_nodes (int):
            Probe graph size.
        score (Optional[float]):
            Regional score, or None when the region is missing on either side.
        iterations (int):
            Relaxation iterations used.
        converged (bool):
            Whether relaxation converged.
        assigned (int):
            Gallery nodes with a probe label.
        relaxation (Optional[RelaxationResult]):
            Full matcher output; not serialized.
    """

    model_config = ConfigDict(frozen=True)

    region: Region
    gallery_nodes: int = Field(ge=0)
    probe_nodes: int = Field(ge=0)
    score: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    iterations: int = Field(default=0, ge=0)
    converged: bool = False
    assigned: int = Field(default=0, ge=0)
    relaxation: Optional[RelaxationResult] = Field(default=None, exclude=True)

    @property
    def missing(self) -> bool:
        return self.score is None


class VerificationReport(BaseModel):
    """Result of verifying a probe face against a gallery face.

    Attributes:
        gallery (str):
            Gallery image path.
        probe (str):
            Probe image path.
        regions (List[RegionResult]):
            Per-region outcomes in region order.
        mass (MassFunction):
            Fused mass function.
        belief (float):
            Fused belief in ``genuine``.
        score (float):
            Quantity the decision was taken on.
        accepted (bool):
            The decision.
    """

    model_config = ConfigDict(frozen=True)

    gallery: str
    probe: str
    regions: List[RegionResult]
    mass: MassFunction
    belief: float = Field(ge=0.0, le=1.0)
    score: float = Field(ge=0.0, le=1.0)
    accepted: bool

    def region_scores(self) -> Dict[Region, Optional[float]]:
        return {result.region: result.score for result in self.regions}


class FaceVerifier:
    """Verify faces by matching regional SIFT graphs.

    Keyword Parameters:
        config (Optional[PipelineConfig]):
            Pipeline settings; defaults to :class:`PipelineConfig`.

    Examples:
        >>> verifier = FaceVerifier()
        >>> report = verifier.verify("s1/1.pgm", "s1/1.lm", "s1/2.pgm", "s1/2.lm")
        >>> report.accepted
        True
    """

    def __init__(self, config: Optional[PipelineConfig] = None):
        self.config = config or PipelineConfig()

    def prepare(
        self,
        image_path: PathLike,
        landmark_path: PathLike,
        keypoints_path: Optional[PathLike] = None,
    ) -> FaceSample:
        """Load an image, its landmarks and keypoints, and build the regional graphs.

        Args:
            image_path (PathLike):
                8-bit PGM image.
            landmark_path (PathLike):
                Landmark annotation for the image.

        Keyword Parameters:
            keypoints_path (Optional[PathLike]):
                Precomputed keypoints to use instead of running the detector.

        Returns:
            (FaceSample):
                The prepared sample.

        Raises:
            FileNotFoundError:
                If an input file doesn't exist.
            FaceVerifierError:
                If an input file is invalid.
        """
        image = load_image(image_path)
        if keypoints_path is not None:
            keypoints = detect_source(keypoints_path, sift=self.config.sift).load(keypoints_path)
        else:
            keypoints = extract_keypoints(image, self.config.sift)
        landmarks = load_landmarks(landmark_path, width=image.width, height=image.height)
        radius = self.config.roi_radius or default_roi_radius(image.height)
        groups = group_keypoints(keypoints, landmarks, radius)
        graphs = {region: build_graph(groups[region]) for region in REGION_ORDER}
        logger.info(
            "Prepared %s: %d keypoints, %d grouped",
            image_path,
            len(keypoints),
            sum(graph.size for graph in graphs.values()),
        )
        return FaceSample(
            image_path=str(image_path),
            width=image.width,
            height=image.height,
            landmarks=landmarks,
            keypoints=keypoints,
            groups=groups,
            graphs=graphs,
        )

    def compare(self, gallery: FaceSample, probe: FaceSample) -> VerificationReport:
        """Match two prepared samples and fuse the regional evidence.

        Args:
            gallery (FaceSample):
                Enrolled face.
            probe (FaceSample):
                Face being verified.

        Returns:
            (VerificationReport):
                Regional scores, fused mass and decision.
        """
        regions = [self._compare_region(region, gallery, probe) for region in REGION_ORDER]
        fusion_cfg = self.config.fusion
        try:
            fused = fuse_region_scores({r.region: r.score for r in regions}, fusion_cfg)
            mass, score, accepted = fused.mass, fused.score, fused.accepted
        except AllRegionsMissingError:
            logger.warning(
                "No region matched between %s and %s; rejecting", gallery.image_path,
                probe.image_path,
            )
            mass, score, accepted = MassFunction.vacuous(), 0.0, False

        logger.info(
            "%s vs %s: belief=%.4f %s",
            gallery.image_path,
            probe.image_path,
            mass.belief,
            "ACCEPT" if accepted else "REJECT",
        )
        return VerificationReport(
            gallery=gallery.image_path,
            probe=probe.image_path,
            regions=regions,
            mass=mass,
            belief=min(max(mass.belief, 0.0), 1.0),
            score=score,
            accepted=accepted,
        )

    def verify(
        self,
        gallery_image: PathLike,
        gallery_landmarks: PathLike,
        probe_image: PathLike,
        probe_landmarks: PathLike,
        gallery_keypoints: Optional[PathLike] = None,
        probe_keypoints: Optional[PathLike] = None,
    ) -> VerificationReport:
        """Prepare both faces and compare them."""
        gallery = self.prepare(gallery_image, gallery_landmarks, gallery_keypoints)
        probe = self.prepare(probe_image, probe_landmarks, probe_keypoints)
        return self.compare(gallery, probe)

    def _compare_region(
        self, region: Region, gallery: FaceSample, probe: FaceSample
    ) -> RegionResult:
        gallery_graph = gallery.graphs[region]
        probe_graph = probe.graphs[region]
        if gallery_graph.size == 0 or probe_graph.size == 0:
            logger.warning(
                "Region %s has no keypoints (gallery %d, probe %d); treated as missing",
                region.value,
                gallery_graph.size,
                probe_graph.size,
            )
            return RegionResult(
                region=region, gallery_nodes=gallery_graph.size, probe_nodes=probe_graph.size
            )

        result = relax(gallery_graph, probe_graph, self.config.relaxation)
        if self.config.region_score == "similarity":
            score = weighted_match_score(result)
        else:
            score = graph_match_score(result)
        logger.debug("Region %s score %.4f", region.value, score)
        return RegionResult(
            region=region,
            gallery_nodes=gallery_graph.size,
            probe_nodes=probe_graph.size,
            score=score,
            iterations=result.iterations_used,
            converged=result.converged,
            assigned=sum(1 for label in result.assignment.values() if label is not None),
            relaxation=result,
        )
