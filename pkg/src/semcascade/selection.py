"""Building the first stage: gain model, greedy OR-AND search and training flow.

Gain of a first stage over the baseline, per input::

    gain = n_orig - (n_initial + (1 - f) * n_orig)

where ``n_orig`` is the baseline's cost, ``n_initial`` the average first-stage
cost (preprocessing included) and ``f`` the fraction of inputs the first stage
rejects. A first stage is worth having only when ``gain > 0``.

All search-time measurements use a stratified validation fold of the training
data; the baseline is expected to have been fit on the complementary fold
(see :func:`fit_baseline`).
"""
from __future__ import annotations

import itertools
import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import features, mlp
from .cascade import (
    Hierarchy, Leaf, StageExpr, evaluate, evaluate_baseline, first_stage_full_cost,
    gate_outcomes, rgb_matrix,
)
from .dataset import holdout_split
from .errors import ContractError, SearchSpaceTooLarge
from .features import FeatureConfig
from .mlp import MlpClassifier, TrainConfig

log = logging.getLogger(__name__)

ORACLE_MAX_SPACE = 6


@dataclass(frozen=True)
class GainReport:
    n_orig: float
    n_initial: float
    f: float
    gain: float
    q_baseline: float
    q_hier: float

    @classmethod
    def from_parts(cls, n_orig, n_initial, f, q_baseline, q_hier) -> "GainReport":
        gain = n_orig - (n_initial + (1.0 - f) * n_orig)
        return cls(float(n_orig), float(n_initial), float(f), float(gain),
                   float(q_baseline), float(q_hier))

    @property
    def improves(self) -> bool:
        return self.gain > 0

    @property
    def quality_drop(self) -> float:
        return self.q_baseline - self.q_hier

    def recomputed_gain(self) -> float:
        return self.n_orig - (self.n_initial + (1.0 - self.f) * self.n_orig)

    def to_dict(self) -> dict:
        return {"n_orig": self.n_orig, "n_initial": self.n_initial, "f": self.f,
                "gain": self.gain, "q_baseline": self.q_baseline, "q_hier": self.q_hier}


def measure_gain(h: Hierarchy, eval_set) -> GainReport:
    """Gain bookkeeping of a hierarchy measured by running it on ``eval_set``."""
    metrics = evaluate(h, eval_set)
    base = evaluate_baseline(h.final, eval_set, h.final_threshold)
    return GainReport.from_parts(
        n_orig=h.final.macs_per_inference,
        n_initial=metrics.avg_first_stage_macs,
        f=1.0 - metrics.pass_fraction,
        q_baseline=base.accuracy,
        q_hier=metrics.accuracy,
    )


@dataclass(frozen=True)
class SelectionConfig:
    epsilon: float = 0.02
    k: int = 4
    initial_gain_floor: float = 0.0
    delta: float = 0.4
    search_space: tuple = ()
    validation_fraction: float = 0.2
    seed: int = 0
    grid: int = 8
    leaf_hidden: int = 16
    leaf_train: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=2.0, epochs=60))
    final_threshold: float = 0.5
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        object.__setattr__(self, "search_space", tuple(self.search_space))
        if self.k < 2:
            raise ContractError("k must be at least 2 to form OR pairs")
        if not 0.0 <= self.delta <= 1.0:
            raise ContractError("delta must lie in [0, 1]")


@dataclass(frozen=True)
class CandidateRecord:
    phase: str
    expression: str
    descriptors: tuple
    q_hier: float
    gain: float
    incumbent_gain: float
    quality_ok: bool
    admitted: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "phase": self.phase, "expression": self.expression,
            "descriptors": list(self.descriptors), "q_hier": self.q_hier,
            "gain": self.gain, "incumbent_gain": self.incumbent_gain,
            "quality_ok": self.quality_ok, "admitted": self.admitted, "note": self.note,
        }


def _stable_seed(*parts) -> int:
    return zlib.crc32("|".join(str(p) for p in parts).encode())


def fit_baseline(images, hidden: int, config: TrainConfig, validation_fraction: float = 0.2,
                 seed: int = 0) -> MlpClassifier:
    """Train the full classifier on the fit fold that selection will hold out from."""
    fit, _ = holdout_split(images, validation_fraction, seed)
    X = rgb_matrix(fit)
    y = np.array([im.is_object for im in fit], dtype=np.float64)
    net, _ = mlp.fit(X, y, hidden, config, init_seed=_stable_seed("baseline", config.seed))
    return net


class LeafPool:
    """Validation-fold bookkeeping shared by the greedy search and the oracle.

    Each descriptor's leaf is trained once on the fit fold and its validation
    scores are cached, so every candidate expression is measured from the
    same numbers.
    """

    def __init__(self, baseline: MlpClassifier, d_tr, config: SelectionConfig):
        if not d_tr:
            raise ContractError("training data is empty")
        self.baseline = baseline
        self.config = config
        self.fit, self.val = holdout_split(list(d_tr), config.validation_fraction, config.seed)
        self.y_fit = np.array([im.is_object for im in self.fit], dtype=np.float64)
        self.y_val = np.array([im.is_object for im in self.val], dtype=bool)
        if self.y_val.all() or not self.y_val.any():
            raise ContractError("validation fold needs both labels")
        self.dims = self.fit[0].shape
        val_scores = np.array([baseline.forward(v).score for v in rgb_matrix(self.val)])
        self.final_pred = val_scores >= config.final_threshold
        self.q = float((self.final_pred == self.y_val).mean())
        self.n_orig = baseline.macs_per_inference
        self._codes = None
        self._leaves: dict = {}
        self._scores: dict = {}

    def _bucket_codes(self):
        if self._codes is None:
            cfg = self.config.feature_config
            self._codes = (
                [features.image_bucket_codes(im, cfg) for im in self.fit],
                [features.image_bucket_codes(im, cfg) for im in self.val],
            )
        return self._codes

    def _matrices(self, descriptor):
        cfg, grid = self.config.feature_config, self.config.grid
        if isinstance(descriptor, features.ColorDescriptor):
            codes_fit, codes_val = self._bucket_codes()
        else:
            codes_fit = codes_val = None
        return (features.feature_matrix(self.fit, descriptor, grid, cfg, codes_fit),
                features.feature_matrix(self.val, descriptor, grid, cfg, codes_val))

    def leaf(self, descriptor, hidden: int | None = None) -> Leaf:
        hidden = self.config.leaf_hidden if hidden is None else hidden
        key = (descriptor, hidden)
        if key not in self._leaves:
            X_fit, X_val = self._matrices(descriptor)
            seed = _stable_seed(descriptor.key, hidden, self.config.leaf_train.seed)
            net, _ = mlp.fit(X_fit, self.y_fit, hidden, self.config.leaf_train, init_seed=seed)
            self._leaves[key] = Leaf(descriptor, net)
            self._scores[key] = net.scores(X_val)
        return self._leaves[key]

    def val_scores(self, descriptor, hidden: int | None = None) -> np.ndarray:
        hidden = self.config.leaf_hidden if hidden is None else hidden
        self.leaf(descriptor, hidden)
        return self._scores[(descriptor, hidden)]

    def leaf_accuracy(self, descriptor) -> float:
        pred = self.val_scores(descriptor) >= self.config.delta
        return float((pred == self.y_val).mean())

    def score_table(self, expr: StageExpr) -> dict:
        table = {}
        for leaf in expr.leaves:
            hidden = leaf.classifier.d_hidden
            table[leaf.descriptor] = self.val_scores(leaf.descriptor, hidden)
        return table

    def measure(self, expr: StageExpr, delta: float | None = None) -> GainReport:
        delta = self.config.delta if delta is None else delta
        n = len(self.val)
        if expr.empty:
            passed = np.ones(n, dtype=bool)
            cost = np.zeros(n)
        else:
            passed, pre, first = gate_outcomes(
                expr, self.score_table(expr), delta, self.dims, self.config.feature_config, n=n
            )
            cost = (pre + first).astype(np.float64)
        q_hier = float(((passed & self.final_pred) == self.y_val).mean())
        return GainReport.from_parts(self.n_orig, cost.mean(), 1.0 - passed.mean(), self.q, q_hier)

    def stage_fits(self, expr: StageExpr) -> bool:
        """Whether the first stage stays strictly cheaper than the final classifier."""
        return expr.empty or first_stage_full_cost(expr, self.dims, self.config.feature_config) < self.n_orig

    def quality_ok(self, report: GainReport) -> bool:
        return report.q_baseline - report.q_hier < self.config.epsilon


@dataclass
class SelectionResult:
    expression: StageExpr
    report: GainReport
    audit: list
    pool: LeafPool

    @property
    def gain(self) -> float:
        return self.report.gain


def _rank_key(pool: LeafPool, space: list, descriptor):
    cost = features.preprocessing_cost(descriptor, pool.dims, pool.config.feature_config)
    return (-pool.leaf_accuracy(descriptor), cost, space.index(descriptor))


def select_semantics(baseline: MlpClassifier, space, d_tr, config: SelectionConfig,
                     pool: LeafPool | None = None) -> SelectionResult:
    """Greedy AND admission of single leaves, then repeated top-k OR pairs.

    A candidate is admitted when the accuracy drop stays below ``epsilon`` and
    its gain strictly beats the incumbent's. The pairwise phase re-ranks the
    remaining descriptors after every admission and stops after a full pass
    over the top-k pairs admits nothing.
    """
    space = list(space)
    pool = pool or LeafPool(baseline, d_tr, config)
    audit: list[CandidateRecord] = []
    incumbent = StageExpr()
    best = pool.measure(incumbent)
    incumbent_gain = float(config.initial_gain_floor)
    if not space:
        log.warning("empty search space; first stage stays NULL")
        audit.append(CandidateRecord("init", "NULL", (), best.q_hier, best.gain,
                                     incumbent_gain, True, False, "empty search space"))
        return SelectionResult(incumbent, best, audit, pool)

    def consider(phase, candidate, descriptors) -> bool:
        nonlocal incumbent, incumbent_gain, best
        report = pool.measure(candidate)
        ok = pool.quality_ok(report)
        fits = pool.stage_fits(candidate)
        admit = ok and fits and report.gain > incumbent_gain
        note = "" if fits else "first stage not cheaper than final classifier"
        audit.append(CandidateRecord(
            phase, str(candidate), tuple(d.key for d in descriptors), report.q_hier,
            report.gain, incumbent_gain, ok, admit, note,
        ))
        if admit:
            incumbent, incumbent_gain, best = candidate, report.gain, report
        return admit

    for descriptor in space:
        leaf = pool.leaf(descriptor)
        consider("single", incumbent.and_(StageExpr(((leaf,),))), (descriptor,))

    while True:
        taken = set(incumbent.descriptors)
        remaining = [d for d in space if d not in taken]
        k = min(config.k, len(remaining) - 1)
        if k < 2:
            break
        top = sorted(remaining, key=lambda d: _rank_key(pool, space, d))[:k]
        admitted = False
        for a, b in itertools.combinations(top, 2):
            clause = StageExpr(((pool.leaf(a), pool.leaf(b)),))
            if consider("pair", incumbent.and_(clause), (a, b)):
                admitted = True
                break
        if not admitted:
            break
    return SelectionResult(incumbent, best, audit, pool)


def enumerate_expressions(descriptors):
    """Every AND-of-(single | OR-pair) structure without descriptor reuse."""
    descriptors = list(descriptors)

    def rec(rest):
        if not rest:
            yield []
            return
        head, tail = rest[0], rest[1:]
        for sub in rec(tail):
            yield sub
            yield [(head,)] + sub
        for i, partner in enumerate(tail):
            for sub in rec(tail[:i] + tail[i + 1:]):
                yield [(head, partner)] + sub

    yield from rec(descriptors)


@dataclass
class OracleResult:
    expression: StageExpr
    report: GainReport
    n_candidates: int
    n_feasible: int


def exhaustive_oracle(baseline: MlpClassifier, space, d_tr, config: SelectionConfig,
                      pool: LeafPool | None = None) -> OracleResult:
    """Best-gain expression by brute force over every 2-level structure."""
    space = list(space)
    if len(space) > ORACLE_MAX_SPACE:
        raise SearchSpaceTooLarge(f"oracle enumerates at most {ORACLE_MAX_SPACE} descriptors")
    pool = pool or LeafPool(baseline, d_tr, config)
    best_expr, best_report = None, None
    n_total = n_feasible = 0
    for structure in enumerate_expressions(space):
        n_total += 1
        expr = StageExpr(tuple(tuple(pool.leaf(d) for d in clause) for clause in structure))
        if not pool.stage_fits(expr):
            continue
        report = pool.measure(expr)
        if not (expr.empty or pool.quality_ok(report)):
            continue
        n_feasible += 1
        if best_report is None or report.gain > best_report.gain:
            best_expr, best_report = expr, report
    return OracleResult(best_expr, best_report, n_total, n_feasible)


@dataclass
class TrainedHierarchy:
    hierarchy: Hierarchy
    chosen: str
    gains: dict
    reports: dict
    color: SelectionResult
    texture: SelectionResult
    gate_always_open: bool

    def summary(self) -> dict:
        return {
            "chosen": self.chosen,
            "expression": str(self.hierarchy.first_stage),
            "gains": self.gains,
            "reports": {k: r.to_dict() for k, r in self.reports.items()},
            "gate_always_open": self.gate_always_open,
            "color_expression": str(self.color.expression),
            "texture_expression": str(self.texture.expression),
            "audit": {
                "color": [r.to_dict() for r in self.color.audit],
                "texture": [r.to_dict() for r in self.texture.audit],
            },
        }


def train_hierarchy(baseline: MlpClassifier, d_tr, color_config: SelectionConfig,
                    texture_config: SelectionConfig) -> TrainedHierarchy:
    """Select color and texture stages separately and install the best of
    color, texture and their AND as the first stage."""
    pool = LeafPool(baseline, d_tr, color_config)
    same_split = (texture_config.validation_fraction == color_config.validation_fraction
                  and texture_config.seed == color_config.seed)
    tpool = pool if same_split else LeafPool(baseline, d_tr, texture_config)
    color = select_semantics(baseline, color_config.search_space, d_tr, color_config, pool)
    texture = select_semantics(baseline, texture_config.search_space, d_tr, texture_config, tpool)

    candidates = {}
    if not color.expression.empty:
        candidates["color"] = color.expression
    if not texture.expression.empty:
        candidates["texture"] = texture.expression
    if "color" in candidates and "texture" in candidates:
        combo = color.expression.and_(texture.expression)
        if pool.stage_fits(combo):
            candidates["combo"] = combo

    reports = {name: pool.measure(expr) for name, expr in candidates.items()}
    gains = {name: r.gain for name, r in reports.items()}
    chosen, expr = "none", StageExpr()
    for name in candidates:
        if chosen == "none" or gains[name] > gains[chosen]:
            chosen, expr = name, candidates[name]
    hierarchy = Hierarchy(
        first_stage=expr,
        delta=color_config.delta,
        final=baseline,
        final_threshold=color_config.final_threshold,
        image_shape=pool.dims,
        grid=color_config.grid,
        feature_config=color_config.feature_config,
    )
    return TrainedHierarchy(hierarchy, chosen, gains, reports, color, texture, expr.empty)
