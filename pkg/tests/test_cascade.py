import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcascade import cascade, dataset, features
from semcascade.cascade import Hierarchy, Leaf, StageExpr, classify, eval_expr, evaluate
from semcascade.dataset import DetectionLabel, LabeledImage, SyntheticSpec
from semcascade.errors import ContractError, ShapeError
from semcascade.features import Color, ColorDescriptor
from semcascade.mlp import MlpClassifier

DIMS = (32, 32)
CFG = features.DEFAULT_CONFIG


def _logit(p):
    return math.log(p / (1 - p))


def const_net(d_in, p):
    return MlpClassifier(np.zeros((1, d_in)), np.zeros(1), np.zeros(1), _logit(p))


def color_leaf(color, sharp=40.0, at=0.3):
    """Leaf whose score rises steeply once the color covers ``at`` of the image."""
    w = np.full((1, 64), sharp / 64.0)
    net = MlpClassifier(w, np.array([-sharp * at]), np.array([20.0]), -10.0)
    return Leaf(ColorDescriptor(features.parse_color(color)), net)


def final_net(seed=0):
    """Random but fixed full classifier (score depends on the pixels)."""
    rng = np.random.default_rng(seed)
    return MlpClassifier(rng.normal(0, 0.02, (128, 3072)), rng.normal(0, 0.1, 128),
                         rng.normal(0, 1.0, 128), 0.0)


@pytest.fixture(scope="module")
def images():
    spec = SyntheticSpec(count=60, palette=("red", "green", "blue"), seed=11)
    out = []
    for im in dataset.generate_synthetic(spec):
        out.append(im.with_label(DetectionLabel.OBJECT if im.class_id == 0 else DetectionLabel.CLUTTER))
    return out


@pytest.fixture(scope="module")
def final():
    return final_net()


A, B, C = (ColorDescriptor(c) for c in (Color.RED, Color.GREEN, Color.BLUE))


def _leaf(desc, p=0.5):
    return Leaf(desc, const_net(64, p))


def test_eval_expr_examples():
    expr = StageExpr(((_leaf(A), _leaf(B)), (_leaf(C),)))
    scores = {A: 0.9, B: 0.1, C: 0.8}
    assert eval_expr(expr, scores, 0.5) is True
    assert eval_expr(expr, scores, 0.95) is False
    assert eval_expr(StageExpr(((_leaf(A),),)), {A: 0.4}, 0.4) is True


def test_eval_expr_missing_score():
    with pytest.raises(ContractError):
        eval_expr(StageExpr(((_leaf(A),),)), {B: 1.0}, 0.5)


def test_expression_structure_rules():
    with pytest.raises(ContractError):
        StageExpr(((_leaf(A), _leaf(B), _leaf(C)),))
    with pytest.raises(ContractError):
        StageExpr(((_leaf(A),), (_leaf(A), _leaf(B))))
    assert str(StageExpr(((_leaf(A), _leaf(B)), (_leaf(C),)))) == "(R+G).Bl"
    assert str(StageExpr(((_leaf(A), _leaf(B)),))) == "R+G"
    assert str(StageExpr()) == "NULL"


def test_stage_must_be_cheaper_than_final():
    small_final = const_net(3072, 0.5)  # 3073 MACs, below one color leaf
    with pytest.raises(ContractError):
        Hierarchy(StageExpr(((_leaf(A),),)), 0.5, small_final)


def test_rejected_image_skips_final(images, final):
    h = Hierarchy(StageExpr(((_leaf(A, 0.2),),)), 0.5, final)
    r = classify(h, images[0])
    assert r.label is DetectionLabel.CLUTTER and not r.second_stage_enabled
    assert r.macs_breakdown.second_stage == 0
    assert r.macs_breakdown.preprocessing == 5120
    assert r.macs_breakdown.first_stage == 65
    assert r.macs_total == 5185


def test_passing_image_accounting(images, final):
    h = Hierarchy(StageExpr(((_leaf(A, 0.9),), (_leaf(B, 0.9),))), 0.5, final)
    r = classify(h, images[0])
    assert r.second_stage_enabled
    # one shared HSV pass, two bucket tests and pools, two leaves, the final net
    expected = 3 * 1024 + 2 * 2048 + 2 * 65 + final.macs_per_inference
    assert r.macs_total == expected
    assert r.macs_total == sum((r.macs_breakdown.preprocessing, r.macs_breakdown.first_stage,
                                r.macs_breakdown.second_stage))


def test_and_short_circuit_skips_later_clauses(images, final):
    texture = features.gabor_bank(32)[0]
    tleaf = Leaf(texture, const_net(64, 0.9))
    h = Hierarchy(StageExpr(((tleaf,), (_leaf(A, 0.1),))), 0.5, final)
    r = classify(h, images[0])
    # the cheaper color clause runs first and fails
    assert r.macs_breakdown.preprocessing == 5120 and r.macs_breakdown.first_stage == 65
    full = classify(Hierarchy(h.first_stage, 0.5, final, short_circuit=False), images[0])
    assert full.macs_breakdown.preprocessing == 5120 + features.preprocessing_cost(texture, DIMS)
    assert full.label is r.label


def test_or_short_circuit_stops_at_first_pass(images, final):
    h = Hierarchy(StageExpr(((_leaf(A, 0.9), _leaf(B, 0.9)),)), 0.5, final)
    r = classify(h, images[0])
    assert r.macs_breakdown.first_stage == 65
    assert r.macs_breakdown.preprocessing == 5120


def test_shape_mismatch(final):
    h = Hierarchy(StageExpr(((_leaf(A),),)), 0.5, final)
    with pytest.raises(ShapeError):
        classify(h, LabeledImage(np.zeros((16, 16, 3), dtype=np.uint8), 0))


def test_rejection_means_clutter(images, final):
    h = Hierarchy(StageExpr(((color_leaf("red"),), (color_leaf("green", at=0.01),))), 0.5, final)
    for im in images:
        r = classify(h, im)
        if not r.second_stage_enabled:
            assert r.label is DetectionLabel.CLUTTER and r.macs_breakdown.second_stage == 0


def test_delta_zero_is_baseline(images, final):
    h = Hierarchy(StageExpr(((color_leaf("red"),), (color_leaf("blue"),))), 0.0, final)
    m = evaluate(h, images)
    b = cascade.evaluate_baseline(final, images)
    assert m.accuracy == b.accuracy
    assert m.clutter_pass_fraction == 1.0
    assert m.avg_macs_per_input == b.avg_macs_per_input + h.first_stage_cost
    for im in images:
        assert classify(h, im).label is (DetectionLabel.OBJECT
                                          if final.forward(cascade.rgb_vector(im)).score >= 0.5
                                          else DetectionLabel.CLUTTER)


def test_delta_one_rejects_everything(images, final):
    h = Hierarchy(StageExpr(((_leaf(A, 0.7),),)), 1.0, final)
    m = evaluate(h, images)
    assert m.clutter_pass_fraction == 0.0 and m.object_pass_fraction == 0.0
    assert m.accuracy == dataset.clutter_fraction_of(images)


def test_accounting_identity(images, final):
    h = Hierarchy(StageExpr(((color_leaf("red"), color_leaf("green")),)), 0.5, final)
    results = [classify(h, im) for im in images]
    m = cascade.summarize(images, results)
    first = np.mean([r.macs_breakdown.preprocessing + r.macs_breakdown.first_stage for r in results])
    assert math.isclose(m.avg_macs_per_input,
                        first + m.pass_fraction * final.macs_per_inference, rel_tol=1e-12)


def test_learned_gate_separates_colors(images, final):
    h = Hierarchy(StageExpr(((color_leaf("red"),),)), 0.5, final)
    m = evaluate(h, images)
    assert m.object_pass_fraction == 1.0 and m.clutter_pass_fraction == 0.0


def _leaf_scores(expr, images):
    table = {}
    for leaf in expr.leaves:
        X = features.feature_matrix(images, leaf.descriptor, 8)
        table[leaf.descriptor] = leaf.classifier.scores(X)
    return table


@pytest.mark.parametrize("short_circuit", [True, False])
def test_batch_gate_matches_per_image(images, final, short_circuit):
    texture = features.gabor_bank(32)[5]
    expr = StageExpr(((color_leaf("red"), color_leaf("green")),
                      (Leaf(texture, const_net(64, 0.6)),), (color_leaf("blue", at=0.0),)))
    table = _leaf_scores(expr, images)
    for delta in (0.0, 0.3, 0.5, 0.65, 1.0):
        h = Hierarchy(expr, delta, final, short_circuit=short_circuit)
        passed, pre, first = cascade.gate_outcomes(expr, table, delta, DIMS, CFG, short_circuit)
        for i, im in enumerate(images):
            r = classify(h, im)
            assert passed[i] == r.second_stage_enabled
            assert pre[i] == r.macs_breakdown.preprocessing
            assert first[i] == r.macs_breakdown.first_stage


def test_empty_expression(images, final):
    h = Hierarchy(StageExpr(), 0.5, final)
    r = classify(h, images[0])
    assert r.second_stage_enabled and r.macs_total == final.macs_per_inference
    passed, pre, first = cascade.gate_outcomes(StageExpr(), {}, 0.5, DIMS, CFG, n=3)
    assert passed.all() and not pre.any() and not first.any()
    with pytest.raises(ContractError):
        cascade.gate_outcomes(StageExpr(), {}, 0.5, DIMS, CFG)


def test_single_label_test_set_rejected(images, final):
    h = Hierarchy(StageExpr(), 0.5, final)
    with pytest.raises(ContractError):
        evaluate(h, [im for im in images if im.is_object])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3),
       st.floats(0, 1), st.floats(0, 1))
def test_gate_monotone_in_delta(scores, d1, d2):
    lo, hi = sorted((d1, d2))
    expr = StageExpr(((_leaf(A), _leaf(B)), (_leaf(C),)))
    table = dict(zip((A, B, C), scores))
    assert eval_expr(expr, table, hi) <= eval_expr(expr, table, lo)


def test_per_leaf_delta_override():
    leaf = Leaf(A, const_net(64, 0.5), delta=0.2)
    assert eval_expr(StageExpr(((leaf,),)), {A: 0.3}, 0.9) is True


def test_round_trip_bit_for_bit(images, final):
    texture = features.gabor_bank(32)[2]
    expr = StageExpr(((color_leaf("red"), Leaf(texture, const_net(64, 0.3), delta=0.25)),
                      (color_leaf("blue", at=0.0),)))
    h = Hierarchy(expr, 0.45, final, final_threshold=0.55)
    back = Hierarchy.loads(h.dumps())
    assert str(back.first_stage) == str(h.first_stage)
    for im in images:
        assert classify(back, im) == classify(h, im)
