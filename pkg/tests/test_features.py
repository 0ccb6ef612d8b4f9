"""Pathway pooling, RoIAlign and proposal filtering."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.errors import ConfigurationError, InvalidBoxError, ShapeError
from core.tensor import Tensor
from model.features import (
    ActorBox, PathwayFeatures, build_context_maps, extract_actor_features, filter_proposals, roi_align,
    spatial_pool, temporal_pool,
)
from model.params import init_linear


def tent_oracle(fmap: np.ndarray, box: ActorBox, out_size: int = 7) -> np.ndarray:
    """Bilinear sampling written as a sum of tent weights over every grid point."""
    height, width, channels = fmap.shape
    x1, y1 = box.x1 * (width - 1), box.y1 * (height - 1)
    x2, y2 = box.x2 * (width - 1), box.y2 * (height - 1)
    out = np.zeros((out_size, out_size, channels))
    for i in range(out_size):
        y = np.clip(y1 + (i + 0.5) / out_size * (y2 - y1), 0.0, height - 1)
        for j in range(out_size):
            x = np.clip(x1 + (j + 0.5) / out_size * (x2 - x1), 0.0, width - 1)
            for gy in range(height):
                wy = max(0.0, 1.0 - abs(y - gy))
                if wy == 0.0:
                    continue
                for gx in range(width):
                    wx = max(0.0, 1.0 - abs(x - gx))
                    out[i, j] += wy * wx * fmap[gy, gx]
    return out


def random_box(rng) -> ActorBox:
    x = np.sort(rng.uniform(0.0, 1.0, size=2))
    y = np.sort(rng.uniform(0.0, 1.0, size=2))
    if x[1] - x[0] < 1e-3 or y[1] - y[0] < 1e-3:
        return ActorBox(0.1, 0.1, 0.9, 0.9)
    return ActorBox(x[0], y[0], x[1], y[1])


@pytest.fixture
def pathways(rng):
    return PathwayFeatures(slow=Tensor(rng.normal(size=(2, 4, 4, 3))), fast=Tensor(rng.normal(size=(8, 4, 4, 2))))


class TestActorBox:

    @pytest.mark.parametrize("coords", [(0.5, 0.1, 0.4, 0.9), (0.1, 0.1, 0.1, 0.9), (-0.1, 0.0, 0.5, 0.5), (0.0, 0.0, 1.2, 0.5)])
    def test_invalid_boxes_raise(self, coords):
        with pytest.raises(InvalidBoxError):
            ActorBox(*coords)

    def test_confidence_must_be_probability(self):
        with pytest.raises(InvalidBoxError):
            ActorBox(0.1, 0.1, 0.5, 0.5, confidence=1.5)


class TestPooling:

    def test_shapes(self, pathways):
        assert temporal_pool(pathways.slow).shape == (4, 4, 3)
        assert spatial_pool(pathways.fast).shape == (8, 2)

    def test_temporal_and_spatial_pooling_commute(self, pathways):
        for f in (pathways.slow, pathways.fast):
            time_first = spatial_pool(Tensor(temporal_pool(f).data[None])).data[0]
            space_first = temporal_pool(spatial_pool(f)).data
            assert_allclose(time_first, space_first, atol=1e-12)

    def test_context_maps_match_composed_ops(self, pathways):
        maps = build_context_maps(pathways)
        expected_concat = np.concatenate([pathways.slow.data.mean(axis=0), pathways.fast.data.mean(axis=0)], axis=-1)
        assert_allclose(maps.pooled_concat.data, expected_concat, atol=1e-12)
        assert_allclose(maps.slow_tokens.data, pathways.slow.data.mean(axis=0).reshape(16, 3), atol=1e-12)
        assert_allclose(maps.fast_tokens.data, pathways.fast.data.mean(axis=(1, 2)), atol=1e-12)
        assert maps.pooled_tokens.shape == (16, 5)

    def test_projection_width_mismatch_raises(self, pathways, rng):
        with pytest.raises(ConfigurationError):
            build_context_maps(pathways, slow_projection=init_linear(rng, 5, 8))

    def test_projected_tokens_have_model_width(self, pathways, rng):
        maps = build_context_maps(pathways, init_linear(rng, 3, 6), init_linear(rng, 2, 6))
        assert maps.slow_tokens.shape == (16, 6)
        assert maps.fast_tokens.shape == (8, 6)

    def test_fast_pathway_must_be_longer(self, rng):
        with pytest.raises(ShapeError):
            PathwayFeatures(slow=Tensor(np.ones((4, 2, 2, 1))), fast=Tensor(np.ones((4, 2, 2, 1))))

    def test_grids_must_agree(self):
        with pytest.raises(ShapeError):
            PathwayFeatures(slow=Tensor(np.ones((1, 2, 2, 1))), fast=Tensor(np.ones((4, 3, 2, 1))))


class TestRoiAlign:

    def test_matches_tent_oracle(self, rng):
        for _ in range(200):
            fmap = rng.normal(size=(5, 6, 2))
            box = random_box(rng)
            assert_allclose(roi_align(Tensor(fmap), box).data, tent_oracle(fmap, box), atol=1e-10)

    def test_constant_map_gives_constant_grid(self):
        out = roi_align(Tensor(np.full((4, 4, 3), 2.5)), ActorBox(0.2, 0.3, 0.7, 0.9)).data
        assert_allclose(out, 2.5, atol=1e-12)

    def test_horizontal_ramp_is_sampled_at_bin_centers(self):
        fmap = np.tile(np.arange(8.0)[None, :, None], (8, 1, 1))
        out = roi_align(Tensor(fmap), ActorBox(0.0, 0.0, 1.0, 1.0)).data
        expected = (np.arange(7) + 0.5) / 7 * 7.0
        assert_allclose(out[0, :, 0], expected, atol=1e-12)

    def test_gradient_flows_back_to_map(self, rng):
        fmap = Tensor(rng.normal(size=(4, 4, 2)), requires_grad=True)
        roi_align(fmap, ActorBox(0.1, 0.1, 0.9, 0.9)).sum().backward()
        assert fmap.grad.shape == (4, 4, 2)
        assert_allclose(fmap.grad.sum(), 49 * 2, atol=1e-9)

    def test_output_stays_within_channel_range(self, rng):
        for _ in range(100):
            fmap = rng.normal(size=(5, 6, 3))
            out = roi_align(Tensor(fmap), random_box(rng)).data
            low, high = fmap.min(axis=(0, 1)), fmap.max(axis=(0, 1))
            assert np.all(out >= low - 1e-12)
            assert np.all(out <= high + 1e-12)

    def test_whole_cell_shift_of_map_and_box_commutes(self, rng):
        height, width, dy, dx = 6, 8, 1, 2
        fmap = rng.normal(size=(height, width, 2))
        shifted = rng.normal(size=(height, width, 2))
        shifted[dy:, dx:] = fmap[:height - dy, :width - dx]
        box = ActorBox(0.1, 0.05, 0.6, 0.7)
        moved = ActorBox(box.x1 + dx / (width - 1), box.y1 + dy / (height - 1), box.x2 + dx / (width - 1), box.y2 + dy / (height - 1))
        assert_allclose(roi_align(Tensor(shifted), moved).data, roi_align(Tensor(fmap), box).data, atol=1e-10)

    def test_single_row_map_samples_that_row(self, rng):
        fmap = rng.normal(size=(1, 6, 2))
        out = roi_align(Tensor(fmap), ActorBox(0.2, 0.3, 0.8, 0.6)).data
        assert out.shape == (7, 7, 2)
        assert_array_equal(out, np.broadcast_to(out[0], out.shape))
        assert np.ptp(out[0, :, 0]) > 0.0

    def test_single_cell_map_broadcasts_the_cell(self, rng):
        fmap = rng.normal(size=(1, 1, 3))
        out = roi_align(Tensor(fmap), ActorBox(0.1, 0.1, 0.4, 0.9)).data
        assert_allclose(out, np.broadcast_to(fmap[0, 0], (7, 7, 3)), atol=1e-12)

    def test_actor_features_have_49_tokens(self, pathways):
        actors = extract_actor_features(pathways, [ActorBox(0.1, 0.1, 0.5, 0.6), ActorBox(0.5, 0.2, 0.9, 0.9)])
        assert [a.tokens.shape for a in actors] == [(49, 5), (49, 5)]
        assert extract_actor_features(pathways, []) == []

    def test_one_column_pathways_still_give_actor_features(self, rng):
        pf = PathwayFeatures(slow=Tensor(rng.normal(size=(2, 5, 1, 3))), fast=Tensor(rng.normal(size=(8, 5, 1, 2))))
        actors = extract_actor_features(pf, [ActorBox(0.1, 0.1, 0.5, 0.6), ActorBox(0.6, 0.2, 0.9, 0.9)])
        assert [a.tokens.shape for a in actors] == [(49, 5), (49, 5)]
        assert not np.array_equal(actors[0].tokens.data, actors[1].tokens.data)

    def test_actor_features_follow_box_order(self, pathways, rng):
        boxes = [random_box(rng) for _ in range(4)]
        order = [2, 0, 3, 1]
        forward = extract_actor_features(pathways, boxes)
        permuted = extract_actor_features(pathways, [boxes[i] for i in order])
        for slot, i in enumerate(order):
            assert_array_equal(permuted[slot].tokens.data, forward[i].tokens.data)

    def test_identical_boxes_give_identical_features(self, pathways):
        box = ActorBox(0.2, 0.25, 0.7, 0.8)
        first, second = extract_actor_features(pathways, [box, ActorBox(box.x1, box.y1, box.x2, box.y2)])
        assert_array_equal(first.tokens.data, second.tokens.data)


class TestFilterProposals:

    def test_threshold_is_strict(self):
        boxes = [ActorBox(0.1, 0.1, 0.5, 0.5, confidence=c) for c in (0.79, 0.8, 0.81)]
        kept = filter_proposals(boxes, 0.8)
        assert [b.confidence for b in kept] == [0.81]

    def test_ground_truth_survives_only_when_requested(self):
        gt = ActorBox(0.1, 0.1, 0.5, 0.5, confidence=0.1, is_ground_truth=True)
        assert filter_proposals([gt], 0.8) == [gt]
        assert filter_proposals([gt], 0.8, keep_ground_truth=False) == []

    def test_threshold_range_is_checked(self):
        with pytest.raises(ConfigurationError):
            filter_proposals([], 1.5)
