"""Scoring validation clips and evaluating the resulting detections."""

import dataclasses

import numpy as np
import pytest

from model.features import ActorBox
from model.params import init_params
from runner.evaluation_runner import EvaluationRunner, predict
from simulators.clip_simulator import DIRECTION_CLASSES, make_dataset


@pytest.fixture
def exact_proposal_clips(small_config):
    """Four val clips (give, receive, give, receive) whose proposals are the ground-truth boxes."""
    _, val = make_dataset(4, 5, (0.0, 1.0), small_config.dataset.world)
    return [
        dataclasses.replace(clip, proposals=[ActorBox(b.x1, b.y1, b.x2, b.y2, 0.9) for b in clip.boxes])
        for clip in val
    ]


def test_untrained_head_scores_every_class_at_one_half(small_config, cache, exact_proposal_clips):
    params = init_params(small_config.head_dims(), seed=0)
    scores = predict(params, [cache.inference(c) for c in exact_proposal_clips])
    for matrix in scores.values():
        assert matrix.shape == (2, params.num_classes)
        assert np.all(matrix == 0.5)


def test_untrained_head_ranks_direction_classes_by_input_order(small_config, cache, exact_proposal_clips, tmp_path):
    params = init_params(small_config.head_dims(), seed=0)
    outcome = EvaluationRunner(small_config, cache).run(params, exact_proposal_clips, tmp_path)

    # tied scores keep clip-then-box order: give hits are T F F T T F F T,
    # receive hits are F T T F F T T F
    give_ap = 0.25 * (1.0 + 0.6 + 0.6 + 0.5)
    receive_ap = 0.25 * (2 / 3 + 2 / 3 + 4 / 7 + 4 / 7)
    assert outcome.result.per_class_ap[0] == pytest.approx(give_ap, abs=1e-12)
    assert outcome.result.per_class_ap[1] == pytest.approx(receive_ap, abs=1e-12)
    assert outcome.direction_map == pytest.approx((give_ap + receive_ap) / 2, abs=1e-12)

    # half of the detections of each direction class are hits, and no ordering scores below that
    for class_id in DIRECTION_CLASSES:
        assert outcome.result.counts[class_id] == 4
        assert outcome.result.per_class_ap[class_id] >= 0.5
    assert (tmp_path / "eval_report.txt").exists()
    assert (tmp_path / "detections.txt").exists()
