"""Two-stage conditional inference.

A first stage of small leaf classifiers, combined as an AND of clauses where
each clause is one leaf or an OR of two leaves, decides whether the full
classifier runs at all. Rejected inputs are labeled clutter immediately.

Cost accounting (MAC-equivalents):

* the HSV conversion is computed once per image and charged the first time a
  color leaf is evaluated on it;
* each evaluated leaf adds its descriptor's marginal preprocessing cost and
  its network's MACs;
* the final classifier adds its MACs only when the gate opens.

Clauses run cheapest first (summed standalone preprocessing cost, ties in
declaration order). With ``short_circuit`` on, evaluation stops at the first
failed clause and an OR clause stops at its first passing leaf.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import features
from .dataset import DetectionLabel, LabeledImage
from .errors import ContractError, ShapeError
from .features import ColorDescriptor, FeatureConfig, SemanticDescriptor, descriptor_from_dict
from .mlp import MlpClassifier


@dataclass(frozen=True, eq=False)
class Leaf:
    descriptor: SemanticDescriptor
    classifier: MlpClassifier
    delta: float | None = None  # per-leaf override of the hierarchy threshold

    def threshold(self, delta: float) -> float:
        return delta if self.delta is None else self.delta


@dataclass(frozen=True, eq=False)
class StageExpr:
    """AND over clauses; each clause is a tuple of one or two leaves (OR)."""

    clauses: tuple = ()

    def __post_init__(self):
        clauses = tuple(tuple(c) for c in self.clauses)
        seen = set()
        for clause in clauses:
            if len(clause) not in (1, 2):
                raise ContractError("a clause holds one leaf or an OR pair")
            for leaf in clause:
                if not isinstance(leaf, Leaf):
                    raise ContractError("clauses must contain Leaf objects")
                if leaf.descriptor in seen:
                    raise ContractError(f"{leaf.descriptor.key} appears in more than one clause")
                seen.add(leaf.descriptor)
        object.__setattr__(self, "clauses", clauses)

    @property
    def empty(self) -> bool:
        return not self.clauses

    @property
    def leaves(self) -> list[Leaf]:
        return [leaf for clause in self.clauses for leaf in clause]

    @property
    def descriptors(self) -> list:
        return [leaf.descriptor for leaf in self.leaves]

    def and_(self, other: "StageExpr") -> "StageExpr":
        return StageExpr(self.clauses + other.clauses)

    def signature(self) -> frozenset:
        """Order-free identity of the expression's structure."""
        return frozenset(frozenset(l.descriptor for l in c) for c in self.clauses)

    def __str__(self) -> str:
        if self.empty:
            return "NULL"
        parts = []
        for clause in self.clauses:
            names = [leaf.descriptor.short for leaf in clause]
            parts.append(names[0] if len(names) == 1 else f"({'+'.join(names)})")
        text = ".".join(parts)
        if len(self.clauses) == 1 and len(self.clauses[0]) == 2:
            text = text[1:-1]
        return text


def single(leaf: Leaf) -> StageExpr:
    return StageExpr(((leaf,),))


def or_pair(a: Leaf, b: Leaf) -> StageExpr:
    return StageExpr(((a, b),))


def eval_expr(expr: StageExpr, scores: dict, delta: float) -> bool:
    """Evaluate the gate on precomputed leaf scores; ties (score == delta) pass."""
    for leaf in expr.leaves:
        if leaf.descriptor not in scores:
            raise ContractError(f"missing score for {leaf.descriptor.key}")
    return all(
        any(scores[leaf.descriptor] >= leaf.threshold(delta) for leaf in clause)
        for clause in expr.clauses
    )


def leaf_standalone_cost(leaf: Leaf, dims, config: FeatureConfig) -> int:
    return features.preprocessing_cost(leaf.descriptor, dims, config) + leaf.classifier.macs_per_inference


def ordered_clauses(expr: StageExpr, dims, config: FeatureConfig) -> list[tuple]:
    costs = [sum(features.preprocessing_cost(l.descriptor, dims, config) for l in c)
             for c in expr.clauses]
    order = sorted(range(len(expr.clauses)), key=lambda i: (costs[i], i))
    return [expr.clauses[i] for i in order]


def first_stage_full_cost(expr: StageExpr, dims, config: FeatureConfig) -> int:
    """Cost of evaluating every leaf once, sharing the HSV pass."""
    total = sum(
        features.descriptor_marginal_cost(l.descriptor, dims, config) + l.classifier.macs_per_inference
        for l in expr.leaves
    )
    if any(isinstance(d, ColorDescriptor) for d in expr.descriptors):
        total += features.hsv_conversion_cost(dims, config)
    return total


def rgb_vector(image) -> np.ndarray:
    return np.asarray(getattr(image, "pixels", image), dtype=np.float64).ravel() / 255.0


def rgb_matrix(images) -> np.ndarray:
    return np.vstack([rgb_vector(im) for im in images])


@dataclass(frozen=True)
class MacsBreakdown:
    preprocessing: int
    first_stage: int
    second_stage: int

    @property
    def total(self) -> int:
        return self.preprocessing + self.first_stage + self.second_stage


@dataclass(frozen=True)
class CascadeResult:
    label: DetectionLabel
    second_stage_enabled: bool
    macs_breakdown: MacsBreakdown
    final_score: float | None = None

    @property
    def macs_total(self) -> int:
        return self.macs_breakdown.total


@dataclass(frozen=True, eq=False)
class Hierarchy:
    first_stage: StageExpr
    delta: float
    final: MlpClassifier
    final_threshold: float = 0.5
    image_shape: tuple = (32, 32)
    grid: int = 8
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    short_circuit: bool = True

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ContractError("delta must lie in [0, 1]")
        if not 0.0 < self.final_threshold < 1.0:
            raise ContractError("final_threshold must lie in (0, 1)")
        h, w = self.image_shape
        object.__setattr__(self, "image_shape", (int(h), int(w)))
        if self.final.d_in != h * w * 3:
            raise ShapeError(f"final classifier expects {self.final.d_in} inputs, image gives {h * w * 3}")
        for leaf in self.first_stage.leaves:
            if leaf.classifier.d_in != self.grid * self.grid:
                raise ShapeError(f"leaf {leaf.descriptor.key} expects {leaf.classifier.d_in} features")
        cost = first_stage_full_cost(self.first_stage, self.image_shape, self.feature_config)
        if self.first_stage.leaves and cost >= self.final.macs_per_inference:
            raise ContractError(
                f"first stage costs {cost} MACs, not below the final classifier's "
                f"{self.final.macs_per_inference}"
            )

    @property
    def first_stage_cost(self) -> int:
        return first_stage_full_cost(self.first_stage, self.image_shape, self.feature_config)

    def with_delta(self, delta: float) -> "Hierarchy":
        return replace(self, delta=delta)

    def with_first_stage(self, expr: StageExpr) -> "Hierarchy":
        return replace(self, first_stage=expr)

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "format": "semcascade.hierarchy/1",
            "delta": self.delta,
            "final_threshold": self.final_threshold,
            "image_shape": list(self.image_shape),
            "grid": self.grid,
            "short_circuit": self.short_circuit,
            "feature_config": self.feature_config.to_dict(),
            "expression": str(self.first_stage),
            "clauses": [
                [
                    {"descriptor": l.descriptor.to_dict(), "delta": l.delta,
                     "classifier": l.classifier.to_dict()}
                    for l in clause
                ]
                for clause in self.first_stage.clauses
            ],
            "final": self.final.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Hierarchy":
        clauses = tuple(
            tuple(
                Leaf(descriptor_from_dict(l["descriptor"]), MlpClassifier.from_dict(l["classifier"]), l.get("delta"))
                for l in clause
            )
            for clause in data["clauses"]
        )
        return cls(
            first_stage=StageExpr(clauses),
            delta=float(data["delta"]),
            final=MlpClassifier.from_dict(data["final"]),
            final_threshold=float(data["final_threshold"]),
            image_shape=tuple(data["image_shape"]),
            grid=int(data["grid"]),
            feature_config=FeatureConfig.from_dict(data["feature_config"]),
            short_circuit=bool(data["short_circuit"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "Hierarchy":
        return cls.from_dict(json.loads(text))


def classify(h: Hierarchy, image: LabeledImage) -> CascadeResult:
    pixels = image.pixels
    if pixels.shape[:2] != h.image_shape:
        raise ShapeError(f"image is {pixels.shape[:2]}, hierarchy expects {h.image_shape}")
    cfg = h.feature_config
    dims = h.image_shape
    pre = first = 0
    codes = None
    gate = True
    for clause in ordered_clauses(h.first_stage, dims, cfg):
        if not gate and h.short_circuit:
            break
        clause_pass = False
        for leaf in clause:
            if clause_pass and h.short_circuit:
                break
            if isinstance(leaf.descriptor, ColorDescriptor) and codes is None:
                codes = features.image_bucket_codes(pixels, cfg)
                pre += features.hsv_conversion_cost(dims, cfg)
            pre += features.descriptor_marginal_cost(leaf.descriptor, dims, cfg)
            fv = features.extract_feature(pixels, leaf.descriptor, h.grid, cfg, codes=codes)
            out = leaf.classifier.forward(fv.values)
            first += out.macs
            if out.score >= leaf.threshold(h.delta):
                clause_pass = True
        gate = gate and clause_pass
    if not gate:
        return CascadeResult(DetectionLabel.CLUTTER, False, MacsBreakdown(pre, first, 0))
    out = h.final.forward(rgb_vector(pixels))
    label = DetectionLabel.OBJECT if out.score >= h.final_threshold else DetectionLabel.CLUTTER
    return CascadeResult(label, True, MacsBreakdown(pre, first, out.macs), out.score)


def gate_outcomes(expr: StageExpr, score_table: dict, delta: float, dims,
                  config: FeatureConfig, short_circuit: bool = True, n: int | None = None):
    """Vectorised gate evaluation over a batch of precomputed leaf scores.

    ``score_table`` maps each descriptor to an array of scores (one per input).
    Returns ``(passed, preprocessing_macs, first_stage_macs)`` arrays following
    the same evaluation order and charging rules as :func:`classify`. ``n``
    is required when the expression is empty.
    """
    if n is None:
        if not expr.leaves:
            raise ContractError("batch size needed for an empty expression")
        n = len(score_table[expr.leaves[0].descriptor])
    pre = np.zeros(n, dtype=np.int64)
    first = np.zeros(n, dtype=np.int64)
    hsv_paid = np.zeros(n, dtype=bool)
    gate = np.ones(n, dtype=bool)
    hsv_cost = features.hsv_conversion_cost(dims, config)
    for clause in ordered_clauses(expr, dims, config):
        active = gate.copy() if short_circuit else np.ones(n, dtype=bool)
        clause_pass = np.zeros(n, dtype=bool)
        for leaf in clause:
            run = active & ~clause_pass if short_circuit else active
            if isinstance(leaf.descriptor, ColorDescriptor):
                pay = run & ~hsv_paid
                pre[pay] += hsv_cost
                hsv_paid |= run
            pre[run] += features.descriptor_marginal_cost(leaf.descriptor, dims, config)
            first[run] += leaf.classifier.macs_per_inference
            clause_pass |= run & (np.asarray(score_table[leaf.descriptor]) >= leaf.threshold(delta))
        gate &= clause_pass
    return gate, pre, first


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    avg_macs_per_input: float
    clutter_pass_fraction: float
    object_pass_fraction: float
    pass_fraction: float
    avg_first_stage_macs: float
    n: int
    n_clutter: int


def _require_both_labels(test_set):
    if not test_set:
        raise ContractError("test set is empty")
    objects = sum(im.is_object for im in test_set)
    if objects == 0 or objects == len(test_set):
        raise ContractError("test set needs both object and clutter items")
    if any(im.detection_label is None for im in test_set):
        raise ContractError("test images must carry detection labels")


def summarize(test_set, results) -> Metrics:
    is_obj = np.array([im.is_object for im in test_set])
    pred = np.array([r.label is DetectionLabel.OBJECT for r in results])
    passed = np.array([r.second_stage_enabled for r in results])
    macs = np.array([r.macs_total for r in results], dtype=np.float64)
    first = np.array([r.macs_breakdown.preprocessing + r.macs_breakdown.first_stage for r in results],
                     dtype=np.float64)
    return Metrics(
        accuracy=float((pred == is_obj).mean()),
        avg_macs_per_input=float(macs.mean()),
        clutter_pass_fraction=float(passed[~is_obj].mean()),
        object_pass_fraction=float(passed[is_obj].mean()),
        pass_fraction=float(passed.mean()),
        avg_first_stage_macs=float(first.mean()),
        n=len(test_set),
        n_clutter=int((~is_obj).sum()),
    )


def evaluate(h: Hierarchy, test_set) -> Metrics:
    _require_both_labels(test_set)
    return summarize(test_set, [classify(h, im) for im in test_set])


def evaluate_baseline(final: MlpClassifier, test_set, threshold: float = 0.5) -> Metrics:
    """Metrics of the standalone final classifier (every input runs it)."""
    _require_both_labels(test_set)
    # per-image forward keeps the arithmetic identical to classify()
    scores = np.array([final.forward(rgb_vector(im)).score for im in test_set])
    is_obj = np.array([im.is_object for im in test_set])
    return Metrics(
        accuracy=float(((scores >= threshold) == is_obj).mean()),
        avg_macs_per_input=float(final.macs_per_inference),
        clutter_pass_fraction=1.0,
        object_pass_fraction=1.0,
        pass_fraction=1.0,
        avg_first_stage_macs=0.0,
        n=len(test_set),
        n_clutter=int((~is_obj).sum()),
    )
