import json

import numpy as np
import pytest

from bjspec.errors import NonHermitianDiagonal, ValidationError
from bjspec.io import (dumps, load_family, load_halfline, load_model, matrix_from_json,
                       matrix_to_json, model_from_dict, model_to_dict)
from bjspec.model import BoundaryPair, random_model


def test_matrix_entries():
    np.testing.assert_array_equal(matrix_from_json([[1, [0, 2]], [[0, -2], 3.5]]),
                                  [[1, 2j], [-2j, 3.5]])
    np.testing.assert_array_equal(matrix_from_json(4), [[4]])
    with pytest.raises(ValidationError):
        matrix_from_json([[1, 2], [3]])
    with pytest.raises(ValidationError):
        matrix_from_json([["a"]])


def test_model_round_trip(rng):
    m = random_model(2, 3, rng)
    bc = BoundaryPair(np.diag([0.1, 0.2]), np.diag([1j, 0.5j]))
    m2, bc2 = model_from_dict(json.loads(dumps(model_to_dict(m, bc))))
    np.testing.assert_array_equal(m2.V, m.V)
    np.testing.assert_array_equal(m2.T, m.T)
    np.testing.assert_array_equal(bc2.Z, bc.Z)
    assert matrix_to_json(np.eye(1)) == [[[1.0, 0.0]]]


def test_field_errors_name_the_field():
    with pytest.raises(ValidationError, match="'V'"):
        model_from_dict({"L": 1, "N": 1})
    with pytest.raises(ValidationError, match="'N'"):
        model_from_dict({"L": 1, "N": 0, "V": []})
    with pytest.raises(ValidationError, match=r"T\[0\]"):
        model_from_dict({"L": 1, "N": 2, "V": [0, 0], "T": [[[1, 2]]]})
    with pytest.raises(NonHermitianDiagonal):
        model_from_dict({"L": 1, "N": 1, "V": [[[[0, 1]]]]})


def test_read_errors_name_the_path(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ValidationError, match="nope.json"):
        load_model(missing)
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ValidationError, match="bad.json"):
        load_model(bad)


def test_bundled_files(tmp_path):
    from pathlib import Path
    data = Path(__file__).resolve().parents[1] / "data"
    m, bc = load_model(data / "free1.json")
    assert (m.L, m.N) == (1, 1) and not bc.Zhat.any()
    fam = load_family(data / "family2.json")
    assert fam.interval == (-3.0, 3.0) and fam.W.shape == (2, 1, 1)
    semi = load_halfline(data / "halfline.json")
    assert semi.limit_point and semi.truncate(4).N == 4


def test_family_needs_interval(tmp_path):
    p = tmp_path / "f.json"
    p.write_text(json.dumps({"L": 1, "N": 1, "V": [0], "W": [1]}), encoding="utf-8")
    with pytest.raises(ValidationError, match="interval"):
        load_family(p)


def test_dumps_is_deterministic():
    assert dumps({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
