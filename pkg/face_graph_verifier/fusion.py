"""
Dempster-Shafer fusion of regional match scores.

Each regional score becomes a mass function over the frame {genuine, impostor}, with a
fixed share of mass left on the whole frame as uncertainty. The regional masses are
combined with Dempster's rule and the fused belief in ``genuine`` is thresholded.
"""

import logging
from typing import List, Literal, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import AllRegionsMissingError, FusionError, TotalConflictError
from .landmarks import REGION_ORDER, Region

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-9
CONFLICT_TOLERANCE = 1e-12


class MassFunction(BaseModel):
    """Basic probability assignment over {genuine, impostor}.

    Attributes:
        genuine (float):
            Mass committed to ``genuine``.
        impostor (float):
            Mass committed to ``impostor``.
        uncertain (float):
            Mass on the whole frame.
    """

    model_config = ConfigDict(frozen=True)

    genuine: float = Field(ge=0.0, le=1.0)
    impostor: float = Field(ge=0.0, le=1.0)
    uncertain: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _sums_to_one(self) -> "MassFunction":
        total = self.genuine + self.impostor + self.uncertain
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"masses must sum to 1, got {total}")
        return self

    @classmethod
    def vacuous(cls) -> "MassFunction":
        """Total ignorance; the identity of Dempster's rule."""
        return cls(genuine=0.0, impostor=0.0, uncertain=1.0)

    @property
    def belief(self) -> float:
        """Belief in ``genuine``."""
        return self.genuine

    @property
    def plausibility(self) -> float:
        """Plausibility of ``genuine``."""
        return self.genuine + self.uncertain

    @property
    def pignistic(self) -> float:
        """Pignistic probability of ``genuine``: frame mass split evenly."""
        return self.genuine + 0.5 * self.uncertain

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.genuine, self.impostor, self.uncertain)


class FusionConfig(BaseModel):
    """How regional scores are turned into a decision.

    Attributes:
        uncertainty_alpha (float):
            Mass each region leaves on the whole frame.
        decision_threshold (float):
            Accept when the decision score reaches this value.
        missing_region_policy (str):
            ``vacuous`` combines a missing region as total ignorance, ``skip`` leaves it
            out. Both give the same fused mass.
        decision_basis (str):
            ``belief`` thresholds the fused genuine mass, ``pignistic`` the pignistic
            probability of genuine.
    """

    model_config = ConfigDict(frozen=True)

    uncertainty_alpha: float = Field(default=0.1, ge=0.0, le=1.0, description="Uncertainty mass")
    decision_threshold: float = Field(default=0.5, ge=0.0, le=1.0, description="Accept threshold")
    missing_region_policy: Literal["vacuous", "skip"] = Field(
        default="vacuous", description="Treatment of regions without a score"
    )
    decision_basis: Literal["belief", "pignistic"] = Field(
        default="belief", description="Quantity compared against the threshold"
    )


class FusionResult(BaseModel):
    """Fused evidence for one comparison.

    Attributes:
        mass (MassFunction):
            Combined mass function.
        score (float):
            Quantity the decision was taken on (see ``FusionConfig.decision_basis``).
        accepted (bool):
            Whether ``score`` reached the decision threshold.
        conflicts (List[float]):
            Conflict of each pairwise combination, in combination order.
        regions_used (List[Region]):
            Regions that contributed a score.
    """

    model_config = ConfigDict(frozen=True)

    mass: MassFunction
    score: float = Field(ge=0.0, le=1.0)
    accepted: bool
    conflicts: List[float] = Field(default_factory=list)
    regions_used: List[Region] = Field(default_factory=list)


def score_to_mass(score: float, alpha: float) -> MassFunction:
    """Map a score in [0, 1] to ``((1-alpha)*score, (1-alpha)*(1-score), alpha)``.

    Raises:
        FusionError:
            If ``score`` or ``alpha`` is outside [0, 1].

    Examples:
        >>> score_to_mass(0.5, 0.2).as_tuple()
        (0.4, 0.4, 0.2)
    """
    if not 0.0 <= score <= 1.0:
        raise FusionError(f"score must lie within [0, 1], got {score}")
    if not 0.0 <= alpha <= 1.0:
        raise FusionError(f"alpha must lie within [0, 1], got {alpha}")
    committed = 1.0 - alpha
    return MassFunction(
        genuine=committed * score, impostor=committed * (1.0 - score), uncertain=alpha
    )


def combine_with_conflict(a: MassFunction, b: MassFunction) -> Tuple[MassFunction, float]:
    """Combine two mass functions with Dempster's rule and report their conflict.

    Args:
        a (MassFunction):
            First operand.
        b (MassFunction):
            Second operand.

    Returns:
        (Tuple[MassFunction, float]):
            The normalized combination and the conflict ``K``.

    Raises:
        TotalConflictError:
            If ``K`` is 1, so nothing is left to normalize.
    """
    conflict = a.genuine * b.impostor + a.impostor * b.genuine
    normalizer = 1.0 - conflict
    if normalizer <= CONFLICT_TOLERANCE:
        raise TotalConflictError(
            f"total conflict between {a.as_tuple()} and {b.as_tuple()} (K={conflict})"
        )
    genuine = a.genuine * b.genuine + a.genuine * b.uncertain + a.uncertain * b.genuine
    impostor = a.impostor * b.impostor + a.impostor * b.uncertain + a.uncertain * b.impostor
    uncertain = a.uncertain * b.uncertain
    raw = [genuine / normalizer, impostor / normalizer, uncertain / normalizer]
    # Rounding grows as the normalizer shrinks and can push a mass past 1.
    values = [min(max(value, 0.0), 1.0) for value in raw]
    total = sum(values)
    if values != raw or abs(total - 1.0) > MASS_TOLERANCE / 10:
        values = [value / total for value in values]
    combined = MassFunction(genuine=values[0], impostor=values[1], uncertain=values[2])
    return combined, conflict


def dempster_combine(a: MassFunction, b: MassFunction) -> MassFunction:
    """Combine two mass functions with Dempster's rule.

    Raises:
        TotalConflictError:
            If the two are in total conflict.
    """
    return combine_with_conflict(a, b)[0]


def fuse_region_scores(
    scores: Mapping[Union[Region, str], Optional[float]],
    cfg: Optional[FusionConfig] = None,
) -> FusionResult:
    """Fuse regional scores into a single decision.

    Args:
        scores (Mapping[Union[Region, str], Optional[float]]):
            Score per region; None or an absent key marks the region as missing.
        cfg (Optional[FusionConfig]):
            Fusion parameters; defaults to :class:`FusionConfig`.

    Returns:
        (FusionResult):
            The fused mass and the decision.

    Raises:
        FusionError:
            If a key is not a facial region or a score is out of range.
        AllRegionsMissingError:
            If no region has a score.
        TotalConflictError:
            If two sources totally conflict (only possible with zero uncertainty).
    """
    cfg = cfg or FusionConfig()
    by_region = {}
    for key, value in scores.items():
        try:
            by_region[Region(key)] = value
        except ValueError as e:
            raise FusionError(f"unknown region: {key!r}") from e

    masses: List[MassFunction] = []
    used: List[Region] = []
    for region in REGION_ORDER:
        score = by_region.get(region)
        if score is None:
            logger.debug("Region %s missing", region.value)
            if cfg.missing_region_policy == "vacuous":
                masses.append(MassFunction.vacuous())
            continue
        masses.append(score_to_mass(score, cfg.uncertainty_alpha))
        used.append(region)

    if not used:
        raise AllRegionsMissingError("no regional score available to fuse")

    fused = masses[0]
    conflicts: List[float] = []
    for mass in masses[1:]:
        fused, conflict = combine_with_conflict(fused, mass)
        conflicts.append(conflict)

    score = fused.belief if cfg.decision_basis == "belief" else fused.pignistic
    score = min(max(score, 0.0), 1.0)
    accepted = score >= cfg.decision_threshold
    logger.debug(
        "Fused %d regions: mass=%s %s=%.4f accepted=%s",
        len(used),
        fused.as_tuple(),
        cfg.decision_basis,
        score,
        accepted,
    )
    return FusionResult(
        mass=fused, score=score, accepted=accepted, conflicts=conflicts, regions_used=used
    )
