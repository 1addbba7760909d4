"""
Batch verification over a dataset manifest and ROC analysis.

Every image in the manifest is compared against every other image (both orders, no
self-pairs). The fused genuine belief of each trial is swept against a grid of
thresholds to produce false accept / false reject rates, the equal error rate, the best
verification accuracy and rank-1 identification.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from .errors import (
    EvaluationError,
    FaceVerifierError,
    InsufficientTrialsError,
    ManifestError,
)
from .verifier import FaceSample, FaceVerifier, PipelineConfig

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["subject_id", "image", "landmarks"]
OPTIONAL_MANIFEST_COLUMNS = ["keypoints"]
DEFAULT_SWEEP = 1001

PathLike = Union[str, Path]
T = TypeVar("T")
R = TypeVar("R")


class ManifestEntry(BaseModel):
    """One image of the dataset."""

    model_config = ConfigDict(frozen=True)

    subject_id: str = Field(min_length=1)
    image: Path
    landmarks: Path
    keypoints: Optional[Path] = None

    @field_validator("subject_id")
    @classmethod
    def _strip(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("subject_id must not be empty")
        return value


class DatasetManifest(BaseModel):
    """Ordered list of dataset images.

    Attributes:
        entries (List[ManifestEntry]):
            Images in manifest order.
    """

    model_config = ConfigDict(frozen=True)

    entries: List[ManifestEntry]

    @property
    def subjects(self) -> List[str]:
        """Distinct subject ids in order of first appearance."""
        seen: List[str] = []
        for entry in self.entries:
            if entry.subject_id not in seen:
                seen.append(entry.subject_id)
        return seen


class Trial(BaseModel):
    """One gallery/probe comparison.

    Attributes:
        gallery_index (int):
            Manifest index of the gallery image.
        probe_index (int):
            Manifest index of the probe image.
        gallery_id (str):
            Subject of the gallery image.
        probe_id (str):
            Subject of the probe image.
        fused_genuine_belief (float):
            Fused belief in ``genuine``.
        decision_score (Optional[float]):
            Quantity the decision is taken on when it differs from the belief
            (pignistic decision basis).
        is_genuine (bool):
            True when both images show the same subject.
    """

    model_config = ConfigDict(frozen=True)

    gallery_index: int = Field(default=0, ge=0)
    probe_index: int = Field(default=0, ge=0)
    gallery_id: str
    probe_id: str
    fused_genuine_belief: float = Field(ge=0.0, le=1.0)
    decision_score: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    is_genuine: bool

    @property
    def score(self) -> float:
        if self.decision_score is None:
            return self.fused_genuine_belief
        return self.decision_score


class ROCPoint(BaseModel):
    """Error rates at one decision threshold."""

    model_config = ConfigDict(frozen=True)

    threshold: float = Field(ge=0.0, le=1.0)
    false_accept_rate: float = Field(ge=0.0, le=1.0)
    false_reject_rate: float = Field(ge=0.0, le=1.0)


class ROCSummary(BaseModel):
    """ROC table and the figures derived from it.

    Attributes:
        points (List[ROCPoint]):
            One point per threshold, thresholds ascending.
        eer (float):
            Equal error rate, the mean of FAR and FRR where they are closest.
        eer_threshold (float):
            Threshold at which the EER was read.
        best_accuracy (float):
            Highest fraction of correctly decided trials.
        best_threshold (float):
            Threshold achieving ``best_accuracy``.
        auc (float):
            Area under the ROC curve (true accept rate against false accept rate).
    """

    model_config = ConfigDict(frozen=True)

    points: List[ROCPoint]
    eer: float = Field(ge=0.0, le=1.0)
    eer_threshold: float
    best_accuracy: float = Field(ge=0.0, le=1.0)
    best_threshold: float
    auc: float = Field(ge=0.0, le=1.0)


def load_manifest(path: PathLike) -> DatasetManifest:
    """Read a dataset manifest.

    The manifest is a UTF-8 CSV file with header ``subject_id,image,landmarks`` and an
    optional ``keypoints`` column. Relative paths are resolved against the manifest's
    directory.

    Args:
        path (PathLike):
            Manifest file.

    Returns:
        (DatasetManifest):
            The manifest with resolved paths.

    Raises:
        FileNotFoundError:
            If the manifest doesn't exist.
        ManifestError:
            If the header is wrong, a row is incomplete or a referenced file is missing.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    base = path.parent

    entries: List[ManifestEntry] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = [name.strip() for name in (reader.fieldnames or [])]
        if header not in (MANIFEST_COLUMNS, MANIFEST_COLUMNS + OPTIONAL_MANIFEST_COLUMNS):
            raise ManifestError(
                f"{path}: header must be {','.join(MANIFEST_COLUMNS)}[,keypoints], "
                f"got {','.join(header) or 'nothing'}"
            )
        reader.fieldnames = header
        for row in reader:
            line = reader.line_num
            if any(row.get(column) in (None, "") for column in MANIFEST_COLUMNS):
                raise ManifestError(f"{path}:{line}: incomplete row")
            keypoints = (row.get("keypoints") or "").strip()
            try:
                entry = ManifestEntry(
                    subject_id=row["subject_id"],
                    image=base / row["image"].strip(),
                    landmarks=base / row["landmarks"].strip(),
                    keypoints=base / keypoints if keypoints else None,
                )
            except ValueError as e:
                raise ManifestError(f"{path}:{line}: {e}") from e
            for referenced in (entry.image, entry.landmarks, entry.keypoints):
                if referenced is not None and not referenced.exists():
                    raise ManifestError(f"{path}:{line}: file not found: {referenced}")
            entries.append(entry)

    if not entries:
        raise ManifestError(f"{path}: manifest has no entries")
    logger.info("Loaded manifest %s: %d images", path, len(entries))
    return DatasetManifest(entries=entries)


def _ordered_map(
    func: Callable[[T], R], items: Sequence[T], workers: int, progress: bool, desc: str
) -> List[R]:
    """Apply ``func`` to every item, keeping input order whatever the pool size."""
    with tqdm(total=len(items), desc=desc, disable=not progress, leave=False) as bar:
        if workers <= 1:
            results = []
            for item in items:
                results.append(func(item))
                bar.update()
            return results
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = []
            for result in pool.map(func, items):
                results.append(result)
                bar.update()
            return results


def run_verification(
    manifest: DatasetManifest,
    config: Optional[PipelineConfig] = None,
    workers: int = 1,
    progress: bool = False,
) -> List[Trial]:
    """Compare every ordered pair of distinct manifest images.

    Each image is prepared once and reused for all of its trials.

    Args:
        manifest (DatasetManifest):
            Images to compare.
        config (Optional[PipelineConfig]):
            Pipeline settings.

    Keyword Parameters:
        workers (int):
            Size of the thread pool; results come back in the same order for any size.
        progress (bool):
            Show a progress bar on stderr.

    Returns:
        (List[Trial]):
            Trials ordered by gallery index, then probe index.

    Raises:
        ManifestError:
            If an image, landmark or keypoint file cannot be used; the message names
            the entry.
    """
    verifier = FaceVerifier(config)
    entries = manifest.entries

    def prepare(index: int) -> FaceSample:
        entry = entries[index]
        try:
            return verifier.prepare(entry.image, entry.landmarks, entry.keypoints)
        except (FaceVerifierError, OSError) as e:
            raise ManifestError(
                f"entry {index + 1} (subject {entry.subject_id}, image {entry.image}): {e}"
            ) from e

    samples = _ordered_map(prepare, list(range(len(entries))), workers, progress, "prepare")
    pairs = [(i, j) for i in range(len(entries)) for j in range(len(entries)) if i != j]

    def compare(pair) -> Trial:
        i, j = pair
        report = verifier.compare(samples[i], samples[j])
        return Trial(
            gallery_index=i,
            probe_index=j,
            gallery_id=entries[i].subject_id,
            probe_id=entries[j].subject_id,
            fused_genuine_belief=report.belief,
            decision_score=None if report.score == report.belief else report.score,
            is_genuine=entries[i].subject_id == entries[j].subject_id,
        )

    trials = _ordered_map(compare, pairs, workers, progress, "compare")
    genuine = sum(1 for trial in trials if trial.is_genuine)
    logger.info(
        "Ran %d trials (%d genuine, %d impostor)", len(trials), genuine, len(trials) - genuine
    )
    return trials


def compute_roc(trials: Sequence[Trial], n_thresholds: int = DEFAULT_SWEEP) -> ROCSummary:
    """Sweep the decision threshold uniformly over [0, 1].

    A trial is accepted when its score is at least the threshold.

    The EER is the mean of FAR and FRR at the first threshold minimizing
    ``|FAR - FRR|``, not FAR alone. On a coarse sweep the two rates rarely meet
    exactly, and with coincident genuine and impostor scores the sweep jumps from
    (FAR 1, FRR 0) to (FAR 0, FRR 1); the mean reports 0.5 there where FAR alone
    would report 1.

    Best accuracy also counts a reject-all operating point, reported at threshold 1.

    Args:
        trials (Sequence[Trial]):
            Trials with at least one genuine and one impostor.
        n_thresholds (int):
            Number of thresholds, at least 2.

    Returns:
        (ROCSummary):
            ROC table, EER, best accuracy and AUC.

    Raises:
        InsufficientTrialsError:
            If there are no genuine or no impostor trials.
        EvaluationError:
            If ``n_thresholds`` is below 2.

    Examples:
        >>> summary = compute_roc(run_verification(load_manifest("orl.csv")))
        >>> len(summary.points)
        1001
    """
    if n_thresholds < 2:
        raise EvaluationError(f"need at least 2 thresholds, got {n_thresholds}")
    scores = np.array([trial.score for trial in trials], dtype=np.float64)
    genuine = np.array([trial.is_genuine for trial in trials], dtype=bool)
    n_genuine = int(genuine.sum())
    n_impostor = len(trials) - n_genuine
    if n_genuine == 0 or n_impostor == 0:
        raise InsufficientTrialsError(
            f"ROC needs genuine and impostor trials, got {n_genuine} genuine and "
            f"{n_impostor} impostor"
        )

    thresholds = np.linspace(0.0, 1.0, n_thresholds)
    accepted = scores[None, :] >= thresholds[:, None]
    far = (accepted & ~genuine).sum(axis=1) / n_impostor
    frr = (~accepted & genuine).sum(axis=1) / n_genuine

    eer_index = int(np.argmin(np.abs(far - frr)))
    eer = float(0.5 * (far[eer_index] + frr[eer_index]))

    correct = (accepted & genuine).sum(axis=1) + (~accepted & ~genuine).sum(axis=1)
    accuracy = correct / len(trials)
    best_index = int(np.argmax(accuracy))
    best_accuracy = float(accuracy[best_index])
    best_threshold = float(thresholds[best_index])
    # rejecting everything is always an available operating point
    reject_all = n_impostor / len(trials)
    if reject_all > best_accuracy:
        best_accuracy, best_threshold = reject_all, 1.0

    # thresholds descending give FAR ascending; start the curve at the origin
    fpr = np.concatenate(([0.0], far[::-1]))
    tpr = np.concatenate(([0.0], 1.0 - frr[::-1]))
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))

    points = [
        ROCPoint(threshold=float(t), false_accept_rate=float(a), false_reject_rate=float(r))
        for t, a, r in zip(thresholds, far, frr)
    ]
    logger.info(
        "ROC over %d trials: eer=%.4f at %.3f, best accuracy %.4f at %.3f, auc=%.4f",
        len(trials),
        eer,
        thresholds[eer_index],
        best_accuracy,
        best_threshold,
        auc,
    )
    return ROCSummary(
        points=points,
        eer=eer,
        eer_threshold=float(thresholds[eer_index]),
        best_accuracy=best_accuracy,
        best_threshold=best_threshold,
        auc=min(max(auc, 0.0), 1.0),
    )


def rank1_identification(trials: Iterable[Trial]) -> float:
    """Fraction of probes whose best-scoring gallery image shows the probe's subject.

    Only probes whose subject has another image in the gallery are counted; ties go to
    the lowest gallery index.

    Returns:
        (float):
            Rank-1 rate, or 0.0 when no probe is identifiable.
    """
    best = {}
    identifiable = set()
    for trial in trials:
        if trial.is_genuine:
            identifiable.add(trial.probe_index)
        current = best.get(trial.probe_index)
        if (
            current is None
            or trial.score > current.score
            or (trial.score == current.score and trial.gallery_index < current.gallery_index)
        ):
            best[trial.probe_index] = trial

    if not identifiable:
        logger.warning("No probe has a same-subject gallery image; rank-1 rate is 0")
        return 0.0
    hits = sum(1 for probe in identifiable if best[probe].is_genuine)
    return hits / len(identifiable)


def write_roc_csv(summary: ROCSummary, path: PathLike) -> None:
    """Write the ROC table as ``threshold,far,frr`` with six decimals."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["threshold", "far", "frr"])
        for point in summary.points:
            writer.writerow(
                [
                    f"{point.threshold:.6f}",
                    f"{point.false_accept_rate:.6f}",
                    f"{point.false_reject_rate:.6f}",
                ]
            )


def format_summary(summary: ROCSummary, rank1: float) -> str:
    """One-line summary: ``eer=<v> best_accuracy=<v> rank1=<v>``."""
    return f"eer={summary.eer:.4f} best_accuracy={summary.best_accuracy:.4f} rank1={rank1:.4f}"
