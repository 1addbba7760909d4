"""
Attributed graphs over regional keypoints and probabilistic relaxation matching.

Nodes carry SIFT descriptors and edges carry the pixel distance between keypoints.
Matching a gallery graph against a probe graph starts from label probabilities
proportional to descriptor similarity and repeatedly reweights each label by the
support it gets from the current labels of every other gallery node, where support
measures how well gallery and probe edge lengths agree. All supports are accumulated
in the log domain so that large graphs do not underflow.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .errors import EmptyGraphError, GraphMatchError
from .keypoint import Keypoint, descriptor_matrix

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-9
# Above this many kernel entries the edge kernel is built one gallery node at a time.
MAX_PRECOMPUTED_KERNEL = 4_000_000


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


class AttributedGraph(BaseModel):
    """Complete graph over a keypoint group.

    Attributes:
        nodes (List[Keypoint]):
            Node attributes, in input order.
        distances (np.ndarray):
            Symmetric ``(n, n)`` matrix of Euclidean pixel distances between nodes.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: List[Keypoint]
    distances: np.ndarray

    @field_validator("distances", mode="before")
    @classmethod
    def _as_array(cls, value):
        return _readonly(value)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return self.size * (self.size - 1) // 2

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        """Unordered edges ``(i, p, distance)`` with ``i < p``."""
        return [
            (i, p, float(self.distances[i, p]))
            for i in range(self.size)
            for p in range(i + 1, self.size)
        ]

    @property
    def descriptors(self) -> np.ndarray:
        return descriptor_matrix(self.nodes)


class ProbabilityMatrix(BaseModel):
    """Row-stochastic label probabilities, gallery nodes by probe nodes."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        array = _readonly(value)
        if array.ndim != 2:
            raise ValueError(f"probability matrix must be 2-D, got shape {array.shape}")
        if array.size:
            if np.any(array < 0.0) or np.any(array > 1.0 + ROW_SUM_TOLERANCE):
                raise ValueError("probabilities must lie within [0, 1]")
            if np.any(np.abs(array.sum(axis=1) - 1.0) > ROW_SUM_TOLERANCE):
                raise ValueError("every row must sum to 1")
        return array

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


class RelaxationConfig(BaseModel):
    """Parameters of the relaxation matcher.

    Attributes:
        phi (float):
            Stop once no probability changes by this much in one iteration.
        max_iterations (int):
            Iteration cap.
        epsilon_support (float):
            Floor applied to each inner support sum before taking its log.
        sigma_e (float):
            Length scale (pixels) of the edge-similarity kernel.
        min_posterior (float):
            A gallery node is left unassigned when its best posterior is below this.
    """

    model_config = ConfigDict(frozen=True)

    phi: float = Field(default=1e-4, gt=0.0, description="Convergence threshold")
    max_iterations: int = Field(default=50, ge=1, description="Maximum iterations")
    epsilon_support: float = Field(default=1e-300, gt=0.0, description="Support floor")
    sigma_e: float = Field(default=10.0, gt=0.0, description="Edge kernel length scale")
    min_posterior: float = Field(
        default=0.5, ge=0.0, le=1.0, description="Minimum posterior for an assignment"
    )


class RelaxationResult(BaseModel):
    """Outcome of matching one gallery graph against one probe graph.

    Attributes:
        posterior (ProbabilityMatrix):
            Final label probabilities.
        prior (ProbabilityMatrix):
            Initial probabilities derived from descriptor similarity.
        similarity (np.ndarray):
            Node similarity matrix the priors were derived from.
        assignment (Dict[int, Optional[int]]):
            Probe node chosen for every gallery node, or None.
        iterations_used (int):
            Number of updates performed.
        converged (bool):
            Whether the stop threshold was reached before the iteration cap.
        score (float):
            :func:`graph_match_score` of this result.
        trace (List[float]):
            Largest probability change of each iteration.
        reset_rows (List[int]):
            Gallery rows whose supports all underflowed and were reset to uniform.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    posterior: ProbabilityMatrix
    prior: ProbabilityMatrix
    similarity: np.ndarray
    assignment: Dict[int, Optional[int]]
    iterations_used: int = Field(ge=0)
    converged: bool
    score: float = Field(ge=0.0, le=1.0)
    trace: List[float] = Field(default_factory=list)
    reset_rows: List[int] = Field(default_factory=list)

    @field_validator("similarity", mode="before")
    @classmethod
    def _as_array(cls, value):
        return _readonly(value)


def build_graph(group: Sequence[Keypoint]) -> AttributedGraph:
    """Build the complete attributed graph of a keypoint group.

    Args:
        group (Sequence[Keypoint]):
            Keypoints of one facial region; may be empty.

    Returns:
        (AttributedGraph):
            Graph whose node order is the input order.

    Examples:
        >>> build_graph([]).edge_count
        0
    """
    nodes = list(group)
    if not nodes:
        return AttributedGraph(nodes=[], distances=np.zeros((0, 0)))
    positions = np.array([(node.x, node.y) for node in nodes], dtype=np.float64)
    distances = np.hypot(
        positions[:, None, 0] - positions[None, :, 0],
        positions[:, None, 1] - positions[None, :, 1],
    )
    return AttributedGraph(nodes=nodes, distances=distances)


def node_similarity_matrix(gallery: AttributedGraph, probe: AttributedGraph) -> np.ndarray:
    """Descriptor similarity of every gallery node with every probe node.

    Args:
        gallery (AttributedGraph):
            Gallery graph.
        probe (AttributedGraph):
            Probe graph.

    Returns:
        (np.ndarray):
            ``(n_gallery, n_probe)`` matrix with entries in [0, 1].

    Raises:
        EmptyGraphError:
            If either graph has no nodes.
    """
    if gallery.size == 0 or probe.size == 0:
        raise EmptyGraphError(
            f"cannot compare graphs of {gallery.size} and {probe.size} nodes"
        )
    return np.clip(gallery.descriptors @ probe.descriptors.T, 0.0, 1.0)


def edge_similarity(d_gallery: float, d_probe: float, sigma_e: float) -> float:
    """Similarity of two edges from their lengths: ``exp(-|d_gallery - d_probe| / sigma_e)``.

    Raises:
        GraphMatchError:
            If ``sigma_e`` is not positive or a distance is negative.
    """
    if not sigma_e > 0:
        raise GraphMatchError(f"sigma_e must be positive, got {sigma_e}")
    if d_gallery < 0 or d_probe < 0:
        raise GraphMatchError("edge distances must be non-negative")
    return float(np.exp(-abs(d_gallery - d_probe) / sigma_e))


def edge_kernel(
    gallery_distances: np.ndarray, probe_distances: np.ndarray, sigma_e: float
) -> np.ndarray:
    """Edge similarity of every gallery edge ``(i, p)`` with every probe edge ``(j, q)``.

    Returns:
        (np.ndarray):
            Array of shape ``(n', n', n'', n'')`` indexed ``[i, p, j, q]``.
    """
    if not sigma_e > 0:
        raise GraphMatchError(f"sigma_e must be positive, got {sigma_e}")
    difference = np.abs(gallery_distances[:, :, None, None] - probe_distances[None, None, :, :])
    return np.exp(-difference / sigma_e)


def prior_matrix(similarity: np.ndarray) -> np.ndarray:
    """Row-normalize node similarities into prior label probabilities.

    A row with no similarity mass becomes uniform.
    """
    similarity = np.asarray(similarity, dtype=np.float64)
    totals = similarity.sum(axis=1, keepdims=True)
    uniform = np.full_like(similarity, 1.0 / similarity.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, similarity / np.where(totals > 0, totals, 1.0), uniform)


def log_support(
    probabilities: np.ndarray,
    gallery_distances: np.ndarray,
    probe_distances: np.ndarray,
    sigma_e: float,
    epsilon: float,
    kernel: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Log of the contextual support every gallery node lends each label.

    Entry ``(i, j)`` is ``sum over p != i of log(max(sum_q E[i, p, j, q] * P[p, q], eps))``.

    Args:
        probabilities (np.ndarray):
            Current ``(n', n'')`` label probabilities.
        gallery_distances (np.ndarray):
            Gallery edge lengths ``(n', n')``.
        probe_distances (np.ndarray):
            Probe edge lengths ``(n'', n'')``.
        sigma_e (float):
            Edge kernel length scale.
        epsilon (float):
            Floor for the inner sums.

    Keyword Parameters:
        kernel (Optional[np.ndarray]):
            Precomputed :func:`edge_kernel`; computed per gallery node when omitted.

    Returns:
        (np.ndarray):
            ``(n', n'')`` array of log supports.
    """
    n_gallery = probabilities.shape[0]
    support = np.zeros_like(probabilities)
    for i in range(n_gallery):
        if kernel is not None:
            kernel_i = kernel[i]
        else:
            kernel_i = np.exp(
                -np.abs(gallery_distances[i][:, None, None] - probe_distances[None, :, :])
                / sigma_e
            )
        # inner[p, j] = sum_q kernel_i[p, j, q] * P[p, q]
        inner = np.einsum("pjq,pq->pj", kernel_i, probabilities)
        logs = np.log(np.maximum(inner, epsilon))
        logs[i] = 0.0
        support[i] = logs.sum(axis=0)
    return support


def relaxation_step(
    probabilities: np.ndarray, support: np.ndarray
) -> Tuple[np.ndarray, List[int]]:
    """Apply one relaxation update.

    The new probability of label ``j`` for node ``i`` is proportional to
    ``P[i, j] * Q[i, j]`` with ``Q[i, j] = P[i, j] * exp(support[i, j])``.

    Args:
        probabilities (np.ndarray):
            Current row-stochastic matrix.
        support (np.ndarray):
            Output of :func:`log_support` for ``probabilities``.

    Returns:
        (Tuple[np.ndarray, List[int]]):
            Updated matrix and the rows that had no surviving mass and were reset to
            uniform.
    """
    with np.errstate(divide="ignore"):
        log_numerator = 2.0 * np.log(probabilities) + support
    row_max = log_numerator.max(axis=1, keepdims=True)
    dead = ~np.isfinite(row_max[:, 0])
    shifted = np.exp(log_numerator - np.where(np.isfinite(row_max), row_max, 0.0))
    shifted[dead] = 1.0
    updated = shifted / shifted.sum(axis=1, keepdims=True)
    return updated, [int(row) for row in np.nonzero(dead)[0]]


def relax(
    gallery: AttributedGraph,
    probe: AttributedGraph,
    cfg: Optional[RelaxationConfig] = None,
) -> RelaxationResult:
    """Match two graphs by iterative probabilistic relaxation.

    Args:
        gallery (AttributedGraph):
            Gallery graph (rows).
        probe (AttributedGraph):
            Probe graph (labels).
        cfg (Optional[RelaxationConfig]):
            Matcher parameters; defaults to :class:`RelaxationConfig`.

    Returns:
        (RelaxationResult):
            Posterior, assignment and score.

    Raises:
        EmptyGraphError:
            If either graph has no nodes.

    Examples:
        >>> result = relax(build_graph(gallery_group), build_graph(probe_group))
        >>> result.converged
        True
    """
    cfg = cfg or RelaxationConfig()
    similarity = node_similarity_matrix(gallery, probe)
    prior = prior_matrix(similarity)

    kernel = None
    if (gallery.size * probe.size) ** 2 <= MAX_PRECOMPUTED_KERNEL:
        kernel = edge_kernel(gallery.distances, probe.distances, cfg.sigma_e)

    current = prior
    trace: List[float] = []
    reset_rows: List[int] = []
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        support = log_support(
            current, gallery.distances, probe.distances, cfg.sigma_e, cfg.epsilon_support,
            kernel=kernel,
        )
        updated, dead = relaxation_step(current, support)
        if dead:
            logger.warning(
                "Relaxation rows %s lost all support at iteration %d; reset to uniform",
                dead,
                iterations,
            )
            reset_rows.extend(row for row in dead if row not in reset_rows)
        delta = float(np.max(np.abs(updated - current)))
        trace.append(delta)
        logger.debug("Relaxation iteration %d: max delta %.3e", iterations, delta)
        current = updated
        if delta < cfg.phi:
            converged = True
            break

    posterior = ProbabilityMatrix(values=current)
    labels = _assign(current, cfg.min_posterior)
    result = RelaxationResult(
        posterior=posterior,
        prior=ProbabilityMatrix(values=prior),
        similarity=similarity,
        assignment=labels,
        iterations_used=iterations,
        converged=converged,
        score=_score(current, labels),
        trace=trace,
        reset_rows=sorted(reset_rows),
    )
    logger.debug(
        "Matched %dx%d graphs in %d iterations (converged=%s, score=%.4f)",
        gallery.size,
        probe.size,
        iterations,
        converged,
        result.score,
    )
    return result


def _assign(posterior: np.ndarray, min_posterior: float) -> Dict[int, Optional[int]]:
    labels: Dict[int, Optional[int]] = {}
    for i, row in enumerate(posterior):
        j = int(np.argmax(row))
        labels[i] = j if row[j] >= min_posterior else None
    return labels


def _score(posterior: np.ndarray, labels: Dict[int, Optional[int]]) -> float:
    if not labels:
        return 0.0
    maxima = [posterior[i, j] for i, j in labels.items() if j is not None]
    if not maxima:
        return 0.0
    score = float(np.mean(maxima)) * len(maxima) / len(labels)
    return min(max(score, 0.0), 1.0)


def assignment(result: RelaxationResult, min_posterior: float) -> Dict[int, Optional[int]]:
    """Label each gallery node with its most probable probe node.

    Args:
        result (RelaxationResult):
            Relaxation outcome.
        min_posterior (float):
            Nodes whose best posterior is below this are mapped to None.

    Returns:
        (Dict[int, Optional[int]]):
            Gallery index to probe index (lowest index on ties) or None.
    """
    return _assign(result.posterior.values, min_posterior)


def graph_match_score(result: RelaxationResult) -> float:
    """Mean posterior maximum of the assigned gallery nodes times the assigned fraction.

    Returns 0 when nothing is assigned.
    """
    return _score(result.posterior.values, result.assignment)


def weighted_match_score(result: RelaxationResult) -> float:
    """Like :func:`graph_match_score`, with each posterior maximum weighted by the
    descriptor similarity of the chosen node pair.

    Relaxation sharpens posteriors towards certainty for any pair of graphs, so this
    variant keeps the descriptor evidence in the regional score.
    """
    labels = result.assignment
    if not labels:
        return 0.0
    posterior = result.posterior.values
    total = sum(
        posterior[i, j] * result.similarity[i, j] for i, j in labels.items() if j is not None
    )
    return min(max(float(total) / len(labels), 0.0), 1.0)


def write_trace_csv(result: RelaxationResult, path: Union[str, Path]) -> None:
    """Write the per-iteration largest probability change as ``iteration,max_delta``."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["iteration", "max_delta"])
        for iteration, delta in enumerate(result.trace, start=1):
            writer.writerow([iteration, repr(delta)])
