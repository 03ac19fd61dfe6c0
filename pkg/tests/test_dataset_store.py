import numpy as np
import pytest

from TrajCert.application.models.errors import ArtifactError, InvalidInputError
from TrajCert.infrastructure.data import load_dataset, read_csv, save_dataset, write_csv
from TrajCert.infrastructure.data.dataset_store import MAGIC


def test_saved_dataset_loads_bit_exact(tmp_path, small_dataset):
    path = tmp_path / "data" / "3.tcds"
    save_dataset(small_dataset, path)
    loaded = load_dataset(path)
    for name in ("X", "y", "w_star", "noise"):
        assert np.array_equal(getattr(loaded, name), getattr(small_dataset, name))
    assert loaded.spectrum == small_dataset.spectrum
    assert loaded.source == small_dataset.source
    assert loaded.sigma == small_dataset.sigma


def test_wrong_magic_is_rejected(tmp_path, small_dataset):
    path = tmp_path / "bad.tcds"
    save_dataset(small_dataset, path)
    raw = path.read_bytes()
    path.write_bytes(b"XCERT" + raw[5:])
    with pytest.raises(InvalidInputError):
        load_dataset(path)


def test_truncated_payload_is_rejected(tmp_path, small_dataset):
    path = tmp_path / "short.tcds"
    save_dataset(small_dataset, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(InvalidInputError):
        load_dataset(path)


def test_corrupt_header_is_rejected(tmp_path):
    path = tmp_path / "header.tcds"
    path.write_bytes(MAGIC + b'{"n": 2}\n')
    with pytest.raises(InvalidInputError):
        load_dataset(path)


def test_csv_header_mismatch_and_ragged_rows(tmp_path):
    path = tmp_path / "table.csv"
    write_csv(path, ("a", "b"), [(1, 2.5)])
    assert read_csv(path, ("a", "b")) == [{"a": "1", "b": "2.5"}]
    with pytest.raises(ArtifactError):
        read_csv(path, ("a", "c"))
    with pytest.raises(ArtifactError):
        write_csv(path, ("a", "b"), [(1,)])
    with pytest.raises(ArtifactError):
        read_csv(tmp_path / "absent.csv")
