import json
import math

import numpy as np
import pytest

from dynamics import ModelParams, integrate
from errors import ConfigurationError
from ledger import CSV_COLUMNS
from spectral import BOX, GridSpec, StatePair, mode_field, random_field
from storage import (MAGIC, envelope, read_coefficients, read_json, read_ledger_csv, to_jsonable,
                     trajectory_envelope, write_coefficients, write_json, write_ledger_csv)


@pytest.fixture
def record():
    grid = GridSpec(1, 16)
    params = ModelParams(gamma=1.0, alpha=0.1, g=mode_field(grid, (1,)))
    return integrate(StatePair(random_field(grid, 1, slope=-2.0), grid.zeros()), 0.1, 1e-2, 5, params)


class TestJson:
    def test_numpy_and_non_finite_values(self):
        doc = to_jsonable({"a": np.arange(3), "b": np.float64(math.inf), "c": (np.bool_(True), 2.5)})
        assert doc == {"a": [0, 1, 2], "b": None, "c": [True, 2.5]}

    def test_written_documents_carry_the_schema(self, tmp_path):
        path = write_json(tmp_path / "nested" / "r.json", envelope("report", {"x": np.float64(1.5)}))
        doc = read_json(path)
        assert doc["kind"] == "report"
        assert doc["x"] == 1.5

    def test_unknown_schema_is_refused(self, tmp_path):
        path = tmp_path / "old.json"
        path.write_text(json.dumps({"schema_version": 0}))
        with pytest.raises(ConfigurationError):
            read_json(path)

    def test_trajectory_envelope(self, record):
        doc = trajectory_envelope(record)
        assert doc["kind"] == "trajectory"
        assert doc["integrator"]["scheme"] == "etd2rk"
        assert len(doc["ledger"]) == len(doc["times"]) == 3
        assert set(doc["ledger"][0]) == set(CSV_COLUMNS)
        json.dumps(doc)


class TestLedgerCsv:
    def test_columns_and_values(self, tmp_path, record):
        path = write_ledger_csv(tmp_path / "run.csv", record.ledger)
        assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
        np.testing.assert_array_equal(read_ledger_csv(path), record.ledger.table())

    def test_foreign_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigurationError):
            read_ledger_csv(path)


class TestCoefficientDump:
    @pytest.mark.parametrize("grid", [GridSpec(1, 16), GridSpec(2, 8, BOX)])
    def test_dump_restores_the_states(self, tmp_path, grid):
        states = [StatePair(random_field(grid, s), random_field(grid, s + 10)) for s in range(2)]
        path = write_coefficients(tmp_path / "c.bin", states)
        assert path.read_bytes()[:8] == MAGIC
        back_grid, back = read_coefficients(path)
        assert back_grid == grid
        for a, b in zip(states, back):
            np.testing.assert_array_equal(a.u.coeffs, b.u.coeffs)
            np.testing.assert_array_equal(a.v.coeffs, b.v.coeffs)

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a dump at all")
        with pytest.raises(ConfigurationError):
            read_coefficients(path)

    def test_nothing_to_dump(self, tmp_path):
        with pytest.raises(ConfigurationError):
            write_coefficients(tmp_path / "e.bin", [])
