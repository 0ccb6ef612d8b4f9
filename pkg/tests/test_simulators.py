"""Synthetic clips, the frozen backbone stand-in and clip dumps."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.errors import ConfigurationError, DatasetError
from core.tensor import Tensor
from model.features import ActorBox
from simulators.backbone_simulator import BackboneConfig, backbone_stub, create_backbone, sampled_frames
from simulators.clip_io import decode_clip, encode_clip, parse_box_line, read_clip, write_clip
from simulators.clip_simulator import CLASS_NAMES, WorldConfig, generate_clip, make_dataset, reflect_about_center


@pytest.fixture
def backbone(world):
    return create_backbone(BackboneConfig(), world.image_size)


class TestClipSimulator:

    def test_same_seed_same_clip(self, world):
        a, b = generate_clip(11, "give", world), generate_clip(11, "give", world)
        assert_array_equal(a.frames.data, b.frames.data)
        assert a.boxes == b.boxes
        assert a.proposals == b.proposals

    def test_twins_share_the_center_frame_only(self, world):
        give, receive = generate_clip(3, "give", world), generate_clip(3, "receive", world)
        c = world.center_frame
        assert_array_equal(give.frames.data[c], receive.frames.data[c])
        assert not np.array_equal(give.frames.data[c + 1], receive.frames.data[c + 1])
        assert not np.array_equal(give.frames.data[c - 1], receive.frames.data[c - 1])

    def test_receive_is_give_reflected_about_center(self, world):
        give, receive = generate_clip(5, "give", world), generate_clip(5, "receive", world)
        reflected = reflect_about_center(give.frames).data
        assert_array_equal(reflected[1:], receive.frames.data[1:])

    def test_first_frames_hold_opposite_endpoints(self, world):
        give, receive = generate_clip(5, "give", world), generate_clip(5, "receive", world)
        assert not np.array_equal(give.frames.data[0], receive.frames.data[0])
        assert_allclose(give.object_track[0], give.scenario.actor_a, atol=1e-9)
        assert_allclose(receive.object_track[0], receive.scenario.actor_b, atol=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("direction", ["give", "receive"])
    def test_track_endpoints_lie_in_the_actor_boxes(self, world, seed, direction):
        clip = generate_clip(seed, direction, world)
        box_a, box_b = clip.boxes
        first, last = clip.object_track[0] / world.image_size, clip.object_track[-1] / world.image_size
        source, target = (box_a, box_b) if direction == "give" else (box_b, box_a)
        for (x, y), box in ((first, source), (last, target)):
            assert box.x1 < x < box.x2
            assert box.y1 < y < box.y2

    def test_twins_share_boxes_and_swap_direction_labels(self, world):
        give, receive = generate_clip(9, "give", world), generate_clip(9, "receive", world)
        assert give.boxes == receive.boxes
        assert give.labels[:, :2].tolist() == [[1, 0], [0, 1]]
        assert receive.labels[:, :2].tolist() == [[0, 1], [1, 0]]
        assert_array_equal(give.labels[:, 2:], receive.labels[:, 2:])

    def test_every_actor_has_one_texture_class(self, world):
        clip = generate_clip(2, "give", world)
        assert clip.labels.shape == (2, len(CLASS_NAMES))
        assert clip.labels[:, 2:].sum(axis=1).tolist() == [1, 1]

    def test_proposals_straddle_the_threshold(self, world):
        clip = generate_clip(4, "give", world)
        confident = [b for b in clip.proposals if b.confidence > 0.8]
        assert len(confident) == 2
        assert len(clip.proposals) == 2 + world.distractor_proposals

    def test_unknown_direction_raises(self, world):
        with pytest.raises(ConfigurationError):
            generate_clip(0, "throw", world)

    @pytest.mark.parametrize("overrides", [{"object_sigma": 0.0}, {"actor_intensity": -0.1}, {"actor_contrast": -0.1}])
    def test_bad_world_config_raises(self, overrides):
        with pytest.raises(ConfigurationError):
            WorldConfig(**overrides)

    @pytest.mark.parametrize("frames", [3, 0])
    def test_world_needs_even_frame_count(self, frames):
        with pytest.raises(ConfigurationError):
            WorldConfig(frames=frames)


class TestMakeDataset:

    def test_split_and_balance(self, world):
        train, val = make_dataset(10, seed=0, config=world)
        assert (len(train), len(val)) == (8, 2)
        assert [c.scenario.direction for c in train].count("give") == 4
        assert [c.scenario.direction for c in val] == ["give", "receive"]

    def test_seeds_are_disjoint_and_ids_unique(self, world):
        train, val = make_dataset(10, seed=0, config=world)
        clips = train + val
        assert len({c.scenario.seed for c in clips}) == 10
        assert len({c.clip_id for c in clips}) == 10

    def test_deterministic(self, world):
        first, _ = make_dataset(4, seed=2, split=(0.5, 0.5), config=world)
        second, _ = make_dataset(4, seed=2, split=(0.5, 0.5), config=world)
        for a, b in zip(first, second):
            assert_array_equal(a.frames.data, b.frames.data)

    def test_empty_dataset(self, world):
        assert make_dataset(0, seed=0, config=world) == ([], [])

    @pytest.mark.parametrize("split", [(0.5, 0.6), (1.2, -0.2), (1.0,)])
    def test_bad_split_raises(self, split, world):
        with pytest.raises(ConfigurationError):
            make_dataset(4, seed=0, split=split, config=world)


class TestBackbone:

    def test_default_desk_pathway_lengths(self, backbone, world):
        pf = backbone_stub(generate_clip(0, "give", world), backbone)
        assert pf.slow.shape == (2, 8, 8, 16)
        assert pf.fast.shape == (8, 8, 8, 4)

    def test_sampling_is_center_aligned(self):
        assert sampled_frames(16, 8).tolist() == [4, 12]
        assert sampled_frames(16, 2).tolist() == [1, 3, 5, 7, 9, 11, 13, 15]

    def test_zero_frames_give_zero_features(self, backbone):
        pf = backbone_stub(Tensor(np.zeros((16, 32, 32, 1))), backbone)
        assert not pf.slow.data.any()
        assert not pf.fast.data.any()

    def test_receive_pathways_are_give_pathways_reversed(self, backbone, world):
        give = backbone_stub(generate_clip(6, "give", world), backbone)
        receive = backbone_stub(generate_clip(6, "receive", world), backbone)
        assert_array_equal(receive.fast.data, give.fast.data[::-1])
        assert_array_equal(receive.slow.data, give.slow.data[::-1])
        assert_allclose(receive.fast.data.mean(axis=0), give.fast.data.mean(axis=0), atol=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_pooled_fast_token_follows_the_object(self, backbone, world, seed):
        give = backbone_stub(generate_clip(seed, "give", world), backbone).fast.data.mean(axis=(1, 2))
        receive = backbone_stub(generate_clip(seed, "receive", world), backbone).fast.data.mean(axis=(1, 2))
        # channel 0 gains rise to the right, channel 1 gains fall
        assert give[-1, 0] - give[0, 0] > 0.1
        assert give[-1, 1] - give[0, 1] < -0.1
        assert receive[-1, 0] - receive[0, 0] < -0.1

    @pytest.mark.parametrize("seed", range(6))
    def test_slow_features_tell_left_actor_from_right(self, backbone, world, seed):
        clip = generate_clip(seed, "give", world)
        pooled = backbone_stub(clip, backbone).slow.data.mean(axis=0)
        patch = backbone.patch_size

        def channel_ratio(center):
            cell = pooled[int(center[1]) // patch, int(center[0]) // patch]
            return cell[0] / cell[1]

        assert channel_ratio(clip.scenario.actor_a) < channel_ratio(clip.scenario.actor_b)

    def test_distinct_clips_give_distinct_features(self, backbone, world):
        features = [backbone_stub(generate_clip(seed, "give", world), backbone) for seed in range(4)]
        for i in range(len(features)):
            for j in range(i + 1, len(features)):
                assert not np.allclose(features[i].slow.data, features[j].slow.data)
                assert not np.allclose(features[i].fast.data, features[j].fast.data)

    def test_creation_is_deterministic(self, world):
        a = create_backbone(BackboneConfig(seed=3), world.image_size)
        b = create_backbone(BackboneConfig(seed=3), world.image_size)
        assert_array_equal(a.slow_projection, b.slow_projection)
        assert_array_equal(a.fast_gain, b.fast_gain)

    def test_frame_count_must_divide_by_strides(self, backbone):
        with pytest.raises(ConfigurationError):
            backbone_stub(Tensor(np.zeros((12, 32, 32, 1))), backbone)

    @pytest.mark.parametrize("overrides", [
        {"slow_stride": 3}, {"fast_stride": 8}, {"gain_spread": 1.0}, {"grid_size": 0}, {"weight_jitter": -0.1},
    ])
    def test_bad_backbone_config_raises(self, overrides):
        with pytest.raises(ConfigurationError):
            BackboneConfig(**overrides)

    def test_image_must_tile_the_grid(self):
        with pytest.raises(ConfigurationError):
            create_backbone(BackboneConfig(grid_size=7), 32)


class TestClipDump:

    def test_file_round_trip(self, tmp_path, world):
        clip = generate_clip(1, "receive", world)
        path = write_clip(tmp_path / "a.clip", clip.clip_id, clip.frames, clip.boxes + clip.proposals)
        dump = read_clip(path)
        assert dump.clip_id == clip.clip_id
        assert_array_equal(dump.frames.data, clip.frames.data)
        assert dump.ground_truth == clip.boxes
        assert dump.proposals == clip.proposals

    def test_bad_magic_raises(self):
        with pytest.raises(DatasetError, match="magic"):
            decode_clip(b"NOPE" + bytes(40))

    def test_truncated_frames_raise(self):
        payload = encode_clip("c", Tensor(np.zeros((2, 4, 4, 1))), [])
        with pytest.raises(DatasetError, match="truncated"):
            decode_clip(payload[:-8])

    def test_mixed_clip_ids_raise(self):
        payload = encode_clip("c", Tensor(np.zeros((1, 2, 2, 1))), [ActorBox(0.1, 0.1, 0.5, 0.5)])
        payload += b"other,0.1,0.1,0.5,0.5,1.0,0\n"
        with pytest.raises(DatasetError, match="mixes"):
            decode_clip(payload)

    @pytest.mark.parametrize("line", [
        "c,0.1,0.1,0.5,0.5,1.0",
        "c,0.1,0.1,0.5,0.5,1.0,2",
        "c,0.6,0.1,0.5,0.5,1.0,0",
        "c,a,0.1,0.5,0.5,1.0,0",
    ])
    def test_malformed_box_lines_raise(self, line):
        with pytest.raises(DatasetError):
            parse_box_line(line)
