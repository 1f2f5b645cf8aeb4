import numpy as np
import pytest

from fsboost.boosting import BoostConfig, base_inference, boosted_inference
from fsboost.embedding import uniform_relevance
from fsboost.evaluation import Ablation, VARIANTS, draw_episode, evaluate_fold, evaluate_fold_sweep, infer_episode
from fsboost.metrics import iou


def test_variant_mapping():
    assert Ablation.from_variant("B") == Ablation(False, False)
    assert Ablation.from_variant("B+C1+C2", "average").name == "B+C1+C2 (Average)"
    assert {Ablation.from_variant(v).name for v in VARIANTS} == set(VARIANTS)
    with pytest.raises(ValueError):
        Ablation.from_variant("C3")
    with pytest.raises(ValueError):
        Ablation(kshot_mode="median")


def test_baseline_wiring_matches_direct_pipeline(small_world):
    ds, folds, params = small_world
    res = evaluate_fold(ds, folds[0], params, Ablation.from_variant("B"), episodes=6, seed=2)
    for rec in res.records:
        ep = draw_episode(ds, folds[0], 1, 2, 0, rec.index)
        direct = base_inference(params, ep.support_pairs(), ep.query.features, uniform_relevance(params.d))
        assert rec.iou == iou(direct.binary, ep.query.feature_mask)


def test_joint_k1_equals_one_shot_and_average_k1(small_world):
    ds, folds, params = small_world
    ep = draw_episode(ds, folds[0], 1, 0, 0, 3)
    for rel in (False, True):
        for boost in (False, True):
            joint = infer_episode(params, ep, Ablation(rel, boost, "joint"), BoostConfig(num_experts=4))
            avg = infer_episode(params, ep, Ablation(rel, boost, "average"), BoostConfig(num_experts=4))
            assert joint.fused_probs.tobytes() == avg.fused_probs.tobytes()


def test_same_episodes_across_variants(small_world):
    ds, folds, params = small_world
    a = evaluate_fold(ds, folds[0], params, Ablation.from_variant("B"), episodes=8, seed=5)
    b = evaluate_fold(ds, folds[0], params, Ablation.from_variant("B+C1+C2"), episodes=8, seed=5)
    assert [r.class_id for r in a.records] == [r.class_id for r in b.records]


def test_workers_give_identical_results(small_world):
    ds, folds, params = small_world
    abl = Ablation.from_variant("B+C1+C2")
    one = evaluate_fold(ds, folds[0], params, abl, episodes=6, seed=1)
    two = evaluate_fold(ds, folds[0], params, abl, episodes=6, seed=1, workers=2)
    assert [(r.index, r.tp, r.fp, r.fn) for r in one.records] == [(r.index, r.tp, r.fp, r.fn) for r in two.records]
    assert one.miou == two.miou


def test_sweep_prefixes_match_direct_runs(small_world):
    ds, folds, params = small_world
    sweep = evaluate_fold_sweep(ds, folds[0], params, True, [1, 3], episodes=5, seed=4)
    for n in (1, 3):
        direct = evaluate_fold(ds, folds[0], params, Ablation(True, True), BoostConfig(num_experts=n), episodes=5, seed=4)
        assert [(r.tp, r.fp, r.fn) for r in sweep[n].records] == [(r.tp, r.fp, r.fn) for r in direct.records]
    plain = evaluate_fold(ds, folds[0], params, Ablation(True, False), episodes=5, seed=4)
    assert sweep[1].miou == plain.miou
