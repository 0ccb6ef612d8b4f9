import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from core.errors import CheckpointError
from model.params import init_params, named_parameters
from runner.checkpoint import (
    Checkpoint, decode_checkpoint, encode_checkpoint, load_checkpoint, restore_params, save_checkpoint,
)


@pytest.fixture
def checkpoint(small_config):
    params = init_params(small_config.head_dims(), seed=3)
    velocities = {name: np.full(t.shape, 0.25) for name, t in named_parameters(params)}
    return Checkpoint.capture(small_config, params, velocities, step=7)


def test_save_load_save_is_byte_identical(tmp_path, checkpoint):
    first = save_checkpoint(tmp_path / "a.ckpt", checkpoint)
    second = save_checkpoint(tmp_path / "b.ckpt", load_checkpoint(first))
    assert first.read_bytes() == second.read_bytes()


def test_round_trip_keeps_everything(checkpoint):
    restored = decode_checkpoint(encode_checkpoint(checkpoint))
    assert restored.step == 7
    assert restored.config == checkpoint.config
    assert list(restored.parameters) == list(checkpoint.parameters)
    for name, array in checkpoint.parameters.items():
        assert_array_equal(restored.parameters[name], array)
    assert_array_equal(next(iter(restored.velocities.values())), 0.25)


def test_restore_fills_a_fresh_head(checkpoint, small_config):
    params = restore_params(checkpoint, small_config)
    for name, t in named_parameters(params):
        assert_array_equal(t.data, checkpoint.parameters[name])


def test_restore_rejects_other_wiring(checkpoint, small_config):
    other = dataclasses.replace(small_config, model=dataclasses.replace(small_config.model, variant="baseline"))
    with pytest.raises(CheckpointError):
        restore_params(checkpoint, other)


def test_restore_rejects_missing_and_reshaped_tensors(checkpoint, small_config):
    name = next(iter(checkpoint.parameters))
    reshaped = dataclasses.replace(checkpoint, parameters={**checkpoint.parameters, name: np.zeros((1, 1))})
    with pytest.raises(CheckpointError, match="shape"):
        restore_params(reshaped, small_config)
    missing = dataclasses.replace(checkpoint, parameters={k: v for k, v in checkpoint.parameters.items() if k != name})
    with pytest.raises(CheckpointError, match="missing"):
        restore_params(missing, small_config)


@pytest.mark.parametrize("cut", [4, 20, 100, -1])
def test_truncated_payload_raises(checkpoint, cut):
    with pytest.raises(CheckpointError):
        decode_checkpoint(encode_checkpoint(checkpoint)[:cut])


def test_bad_magic_and_trailing_bytes_raise(checkpoint):
    payload = encode_checkpoint(checkpoint)
    with pytest.raises(CheckpointError, match="magic"):
        decode_checkpoint(b"X" + payload[1:])
    with pytest.raises(CheckpointError, match="trailing"):
        decode_checkpoint(payload + b"\0")


def test_missing_file_raises(tmp_path):
    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "absent.ckpt")
