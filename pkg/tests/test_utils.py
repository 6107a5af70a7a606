"""Unit tests for shared utilities."""

import doctest
import json
import os

import numpy as np
import pytest

from seisdiff import utils
from seisdiff.exceptions import StorageError
from seisdiff.utils import (
    atomic_write_bytes,
    canonical_json,
    derive_seed,
    energy,
    keyed_rng,
    parse_int_list,
    read_json,
    write_json,
)


def test_doctests():
    failures, _ = doctest.testmod(utils)
    assert failures == 0


class TestKeyedRng:
    def test_same_key_same_stream(self):
        a = keyed_rng(7, 3, 1).standard_normal(16)
        b = keyed_rng(7, 3, 1).standard_normal(16)
        assert np.array_equal(a, b)

    def test_different_keys_differ(self):
        a = keyed_rng(7, 3, 1).standard_normal(16)
        b = keyed_rng(7, 3, 2).standard_normal(16)
        c = keyed_rng(7, 4, 1).standard_normal(16)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_key_order_matters(self):
        assert not np.array_equal(
            keyed_rng(1, 2).standard_normal(4), keyed_rng(2, 1).standard_normal(4)
        )

    def test_negative_key_rejected(self):
        with pytest.raises(ValueError):
            keyed_rng(0, -1)

    def test_independent_of_draw_history(self):
        first = keyed_rng(5, 0)
        first.standard_normal(1000)
        assert np.array_equal(
            keyed_rng(5, 1).standard_normal(3), keyed_rng(5, 1).standard_normal(3)
        )

    def test_derive_seed_is_non_negative_int(self):
        seed = derive_seed(3, 9)
        assert isinstance(seed, int)
        assert 0 <= seed < 2**62
        assert derive_seed(3, 9) != derive_seed(3, 10)


class TestCanonicalJson:
    def test_sorted_and_compact(self):
        assert canonical_json({"b": 1, "a": {"d": 2, "c": 3}}) == '{"a":{"c":3,"d":2},"b":1}'

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})


class TestAtomicWrites:
    def test_creates_parents(self, tmp_path):
        target = tmp_path / "a" / "b" / "file.bin"
        atomic_write_bytes(target, b"abc")
        assert target.read_bytes() == b"abc"

    def test_replaces_existing(self, tmp_path):
        target = tmp_path / "file.bin"
        atomic_write_bytes(target, b"old")
        atomic_write_bytes(target, b"new")
        assert target.read_bytes() == b"new"

    def test_no_temporary_files_left(self, tmp_path):
        atomic_write_bytes(tmp_path / "file.bin", b"x" * 100)
        assert os.listdir(tmp_path) == ["file.bin"]

    def test_failure_raises_storage_error(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        with pytest.raises(StorageError) as exc_info:
            atomic_write_bytes(blocker / "file.bin", b"x")
        assert str(blocker / "file.bin") in str(exc_info.value)

    def test_json_round_trip(self, tmp_path):
        path = write_json(tmp_path / "doc.json", {"z": [1, 2], "a": "text"})
        assert read_json(path) == {"z": [1, 2], "a": "text"}
        assert json.loads(path.read_text())["a"] == "text"
        assert path.read_text().index('"a"') < path.read_text().index('"z"')


class TestHelpers:
    def test_energy_is_float64_sum_of_squares(self):
        x = np.array([[1.0, -2.0], [3.0, 0.5]], dtype=np.float32)
        assert energy(x) == pytest.approx(14.25)

    def test_parse_int_list(self):
        assert parse_int_list("199,100,0") == [199, 100, 0]
        assert parse_int_list(" 5 , 6 ") == [5, 6]
        assert parse_int_list("") == []

    def test_parse_int_list_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_int_list("1,x")
