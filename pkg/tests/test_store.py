import pytest

from pidcoll.errors import StoreFailure
from pidcoll.store import KeyExists, KVStore


def test_put_new_and_get():
    s = KVStore()
    s.put_new("a", "k", b"v")
    assert s.get("a", "k") == b"v" and ("a", "k") in s and ("b", "k") not in s
    with pytest.raises(KeyExists):
        s.put_new("a", "k", b"w")
    s.put("a", "k", b"w")
    assert s.get("a", "k") == b"w" and s.count("a") == 1 and s.keys("a") == ["k"]


def test_log_replays_after_checkpoint(tmp_path):
    path = tmp_path / "log.jsonl"
    s = KVStore(path)
    s.put_new("ns", "x", b"\x00\xffbinary")
    s.put("ns", "y", b"1")
    s.put("ns", "y", b"2")
    s.checkpoint()
    again = KVStore(path)
    assert again.items("ns") == [("x", b"\x00\xffbinary"), ("y", b"2")]


def test_flush_every(tmp_path):
    path = tmp_path / "log.jsonl"
    s = KVStore(path, flush_every=2)
    s.put("n", "a", b"1")
    assert not path.exists()
    s.put("n", "b", b"2")
    assert KVStore(path).count("n") == 2


def test_corrupt_log(tmp_path):
    path = tmp_path / "log.jsonl"
    path.write_text("{not json\n")
    with pytest.raises(StoreFailure):
        KVStore(path)
