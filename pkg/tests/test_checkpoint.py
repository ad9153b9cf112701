import numpy as np
import pytest

from longfin.checkpoint import (
    CheckpointError,
    config_from_kv,
    config_to_text,
    load_checkpoint,
    parse_kv,
    read_config,
    save_checkpoint,
    write_config,
)
from longfin.labels import TokenizedExample
from longfin.model import ModelConfig, forward, init_params
from conftest import small_config


@pytest.fixture
def saved(tmp_path):
    cfg = small_config(30)
    params = init_params(cfg, np.random.default_rng(0))
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, params)
    return cfg, params, path


def test_round_trip_is_bit_identical(saved):
    cfg, params, path = saved
    again = load_checkpoint(path)
    assert list(again) == list(params)
    for k in params:
        assert again[k].data.dtype == np.float32 and np.array_equal(again[k].data, params[k].data)
    ex = TokenizedExample([5, 6, 7], np.zeros((3, 4)), [0, 1, 2], [0, 0, 0])
    assert np.array_equal(forward(params, cfg, ex)[0].data, forward(again, cfg, ex)[0].data)


def test_header_layout(saved):
    _, params, path = saved
    raw = path.read_bytes()
    assert raw[:4] == b"LFCK"
    assert int.from_bytes(raw[4:8], "little") == 1 and int.from_bytes(raw[8:12], "little") == len(params)


def test_rejects_bad_magic(saved, tmp_path):
    _, _, path = saved
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(bad)


@pytest.mark.parametrize("cut", [6, 40, -3])
def test_rejects_truncation(saved, tmp_path, cut):
    _, _, path = saved
    short = tmp_path / "short.ckpt"
    short.write_bytes(path.read_bytes()[:cut])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(short)


def test_rejects_trailing_bytes(saved, tmp_path):
    _, _, path = saved
    long = tmp_path / "long.ckpt"
    long.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(long)


def test_scalar_and_empty_tensors(tmp_path):
    from longfin.autograd import Tensor

    params = {"s": Tensor(np.float32(2.5)), "e": Tensor(np.zeros((0, 3)))}
    save_checkpoint(tmp_path / "x", params)
    again = load_checkpoint(tmp_path / "x")
    assert again["s"].data.shape == () and float(again["s"].data) == 2.5
    assert again["e"].shape == (0, 3)


def test_kv_parsing():
    assert parse_kv("# c\n\na = 1\nb=x=y\n") == {"a": "1", "b": "x=y"}
    with pytest.raises(ValueError, match=":2"):
        parse_kv("a=1\nnope")
    with pytest.raises(ValueError, match="duplicate"):
        parse_kv("a=1\na=2")


def test_config_round_trip(tmp_path):
    cfg = ModelConfig(vocab_size=77, detach_biacm=True, dropout_rate=0.25)
    write_config(tmp_path / "c", cfg)
    assert read_config(tmp_path / "c") == cfg
    assert "detach_biacm=true" in config_to_text(cfg)


def test_config_key_errors():
    with pytest.raises(ValueError, match="unknown config key"):
        config_from_kv({"hidden": "3"})
    with pytest.raises(ValueError, match="layers"):
        config_from_kv({"layers": "two"})
    with pytest.raises(ValueError, match="boolean"):
        config_from_kv({"detach_biacm": "maybe"})
    assert config_from_kv({"layers": "2"}).layers == 2
