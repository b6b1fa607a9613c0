"""Probabilistic semantic-relevance sensor: prompt-ensemble statistics and view confidence.

A view of the scene is scored against an ensemble of prompt phrasings. The
score spread across the ensemble quantifies how uncertain the relevance
estimate is; a bearing-dependent confidence term inflates that variance away
from the optical axis, producing one mean plus a per-ray variance profile per
observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import FovSpec, VisibleCell

CONVENTIONS = ("vlfm", "literal")
DEFAULT_CONVENTION = "vlfm"
DEFAULT_ENSEMBLE_SIZE = 7
VARIANCE_FLOOR = 1e-6

DEFAULT_PROMPTS = (
    "Seems like there is a {target} ahead",
    "A place where {target} can be found",
    "A {target} can be in the vicinity",
    "Seems like a {target} is ahead",
    "A {target} is in the vicinity",
    "{target} likely ahead",
    "{target}",
)


@dataclass(frozen=True)
class PromptEnsemble:
    """A set of prompt phrasings sharing a target placeholder."""

    prompts: tuple[str, ...] = DEFAULT_PROMPTS
    target_token: str = "{target}"

    def __post_init__(self) -> None:
        if len(self.prompts) < 2:
            raise ValueError(f"ensemble needs at least 2 prompts, got {len(self.prompts)}")

    @property
    def size(self) -> int:
        return len(self.prompts)

    def for_target(self, target: str) -> list[str]:
        """Substitute the target into every prompt; the results must be distinct."""
        rendered = [p.replace(self.target_token, target) for p in self.prompts]
        if len(set(rendered)) != len(rendered):
            raise ValueError(f"prompts are not distinct after substituting {target!r}")
        return rendered


@dataclass(frozen=True)
class ScoreSample:
    """One round of relevance scores, one per prompt, each in [-1, 1]."""

    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.scores:
            raise ValueError("score sample is empty")
        for s in self.scores:
            if not -1.0 <= s <= 1.0:
                raise ValueError(f"score {s} outside [-1, 1]")

    def __len__(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class RelevanceObservation:
    """Fused view measurement: ensemble mean, ensemble variance, per-ray variance.

    ``per_ray_variance`` maps each ray bearing to the measurement variance
    used when fusing that ray's cells; it always dominates the ensemble
    variance because off-axis rays only add uncertainty.
    """

    mean: float
    ensemble_variance: float
    per_ray_variance: dict[float, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not -1.0 <= self.mean <= 1.0:
            raise ValueError(f"observation mean {self.mean} outside [-1, 1]")
        if self.ensemble_variance < 0.0:
            raise ValueError(f"ensemble variance {self.ensemble_variance} is negative")
        for bearing, var in self.per_ray_variance.items():
            if var < self.ensemble_variance:
                raise ValueError(
                    f"per-ray variance {var} at bearing {bearing} below ensemble "
                    f"variance {self.ensemble_variance}"
                )


@dataclass(frozen=True)
class SemanticField:
    """Ground-truth relevance per cell, in [0, 1]; the synthetic sensor reads it."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"field must be 2D, got shape {v.shape}")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("field values outside [0, 1]")
        object.__setattr__(self, "values", v)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Raises ValueError on zero vectors or mismatched dimensions.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise ValueError(f"vectors must share one dimension, got {va.shape} and {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    value = float(np.dot(va, vb) / (na * nb))
    return min(1.0, max(-1.0, value))


def ensemble_stats(sample: ScoreSample) -> tuple[float, float]:
    """Mean and population variance (divisor N) of an ensemble's scores.

    Raises ValueError for ensembles smaller than two.
    """
    n = len(sample)
    if n < 2:
        raise ValueError(f"ensemble statistics need at least 2 scores, got {n}")
    scores = np.asarray(sample.scores, dtype=np.float64)
    mean = float(scores.mean())
    variance = float(np.mean((scores - mean) ** 2))
    return mean, variance


def viewpoint_confidence(bearing: float, fov: float, convention: str = DEFAULT_CONVENTION) -> float:
    """Confidence in [0, 1] that a ray at ``bearing`` measures relevance reliably.

    The ``vlfm`` convention (default) is cos^2(bearing * pi / fov): 1 on the
    optical axis, falling to 0 at the field edge. The ``literal`` convention
    is cos^2(2 * bearing * pi / fov), a twice-compressed falloff that returns
    to 1 at the edge; it is kept for fidelity audits.

    Raises ValueError when |bearing| exceeds fov/2 or the convention is unknown.
    """
    if abs(bearing) > fov / 2.0:
        raise ValueError(f"bearing {bearing} outside field of view {fov}")
    if convention == "vlfm":
        return math.cos(bearing * math.pi / fov) ** 2
    if convention == "literal":
        return math.cos(2.0 * bearing * math.pi / fov) ** 2
    raise ValueError(f"unknown confidence convention {convention!r}")


def per_ray_variance(
    ensemble_variance: float,
    bearing: float,
    fov: float,
    convention: str = DEFAULT_CONVENTION,
) -> float:
    """Measurement variance for one ray: ensemble variance plus off-axis penalty.

    The penalty is ``1 - confidence`` and vanishes on the optical axis.
    """
    if ensemble_variance < 0.0:
        raise ValueError(f"ensemble variance {ensemble_variance} is negative")
    return ensemble_variance + (1.0 - viewpoint_confidence(bearing, fov, convention))


def build_observation(
    sample: ScoreSample,
    bearings,
    fov: FovSpec,
    convention: str = DEFAULT_CONVENTION,
    variance_floor: float = VARIANCE_FLOOR,
) -> RelevanceObservation:
    """Turn a score sample into a fused observation over the given ray bearings.

    Single-score samples are treated as point estimates with zero ensemble
    variance. The floor keeps measurement variances strictly positive so the
    map update never divides by zero.
    """
    if len(sample) >= 2:
        mean, variance = ensemble_stats(sample)
    else:
        mean, variance = sample.scores[0], 0.0
    variance = max(variance, variance_floor)
    per_ray = {
        b: per_ray_variance(variance, b, fov.horizontal_fov, convention)
        for b in set(bearings)
    }
    return RelevanceObservation(mean=mean, ensemble_variance=variance, per_ray_variance=per_ray)


def view_relevance(
    field_values: SemanticField,
    visible: list[VisibleCell],
    fov: FovSpec,
    convention: str = DEFAULT_CONVENTION,
) -> float:
    """Collapse the visible cells to one scalar: confidence-weighted mean relevance.

    Cells near the optical axis dominate; if every weight is zero the plain
    mean is used instead.
    """
    if not visible:
        raise ValueError("cannot compute view relevance for an empty visible set")
    values = field_values.values
    total = 0.0
    weight_sum = 0.0
    for vc in visible:
        w = viewpoint_confidence(vc.bearing, fov.horizontal_fov, convention)
        col, row = vc.cell
        total += w * float(values[row, col])
        weight_sum += w
    if weight_sum == 0.0:
        return float(np.mean([values[vc.cell[1], vc.cell[0]] for vc in visible]))
    return total / weight_sum


def sample_scores(
    relevance: float,
    ensemble_size: int,
    noise_sigma: float,
    rng: np.random.Generator,
    prompt_biases=None,
) -> ScoreSample:
    """Draw one score per prompt around a view relevance value, clamped to [-1, 1].

    ``prompt_biases`` adds a fixed per-prompt offset before clamping, modelling
    prompt phrasings that systematically over- or under-report relevance.
    """
    if ensemble_size < 1:
        raise ValueError(f"ensemble size must be positive, got {ensemble_size}")
    if noise_sigma < 0.0:
        raise ValueError(f"noise sigma must be nonnegative, got {noise_sigma}")
    biases = np.zeros(ensemble_size) if prompt_biases is None else np.asarray(prompt_biases, float)
    if biases.shape != (ensemble_size,):
        raise ValueError(f"expected {ensemble_size} prompt biases, got shape {biases.shape}")
    noise = rng.normal(0.0, noise_sigma, ensemble_size) if noise_sigma > 0.0 else 0.0
    raw = relevance + biases + noise
    clamped = np.clip(raw, -1.0, 1.0)
    return ScoreSample(scores=tuple(float(s) for s in clamped))


def observe_synthetic(
    field_values: SemanticField,
    visible: list[VisibleCell],
    ensemble_size: int,
    noise_sigma: float,
    rng,
    fov: FovSpec,
    prompt_biases=None,
    convention: str = DEFAULT_CONVENTION,
    variance_floor: float = VARIANCE_FLOOR,
) -> tuple[ScoreSample, RelevanceObservation]:
    """Simulate one prompt-ensemble measurement of the visible region.

    The view is collapsed to a confidence-weighted mean of the ground-truth
    field, scored ``ensemble_size`` times under Gaussian noise, and packaged
    with the per-ray variance profile of the bearings actually seen.
    ``rng`` is a seed or a numpy Generator; fixed seeds reproduce bit-exactly.

    Raises ValueError on an empty visible set.
    """
    if not visible:
        raise ValueError("cannot observe an empty visible set")
    generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    relevance = view_relevance(field_values, visible, fov, convention)
    sample = sample_scores(relevance, ensemble_size, noise_sigma, generator, prompt_biases)
    observation = build_observation(
        sample,
        (vc.bearing for vc in visible),
        fov,
        convention,
        variance_floor,
    )
    return sample, observation


def qq_correlation(values) -> float:
    """Pearson correlation of sorted values against standard normal quantiles.

    Values near 1 indicate the sample is consistent with a Gaussian. Constant
    input has no spread to compare, so it returns 0.0.
    """
    x = np.sort(np.asarray(values, dtype=np.float64))
    n = x.size
    if n < 3:
        raise ValueError(f"need at least 3 values for a QQ correlation, got {n}")
    if np.all(x == x[0]):
        return 0.0
    from scipy.stats import norm

    quantiles = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return float(np.corrcoef(x, quantiles)[0, 1])
