import numpy as np
import pytest

from sccread import (CountHistogram, DataFormatError, FitResult,
                     read_fit_result_json, read_histogram_csv,
                     read_histogram_json, read_table_csv,
                     write_fit_result_json, write_histogram_csv,
                     write_histogram_json, write_table_csv)


@pytest.fixture
def hist():
    return CountHistogram(counts=np.array([120, 3, 0, 7, 1]), t_R=0.0007300000000000001,
                          meta={"power_uW": 5.0, "label": "run 12"})


class TestHistogramCsv:
    def test_round_trip_exact(self, tmp_path, hist):
        p = tmp_path / "h.csv"
        write_histogram_csv(p, hist)
        back = read_histogram_csv(p)
        assert back.t_R == hist.t_R  # bit-exact via repr
        np.testing.assert_array_equal(back.counts, hist.counts)
        assert back.meta["power_uW"] == 5.0
        assert back.meta["label"] == "run 12"

    def test_sparse_rows_tolerated(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("# t_R_s = 0.001\n# n_windows = 11\nn,occurrences\n0,10\n5,1\n")
        back = read_histogram_csv(p)
        assert back.counts.tolist() == [10, 0, 0, 0, 0, 1]

    def test_missing_window_header(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("# n_windows = 3\nn,occurrences\n0,3\n")
        with pytest.raises(DataFormatError) as err:
            read_histogram_csv(p)
        assert "t_R_s" in str(err.value)

    def test_bad_token_reports_position(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("# t_R_s = 0.001\nn,occurrences\n0,10\nx,1\n")
        with pytest.raises(DataFormatError) as err:
            read_histogram_csv(p)
        msg = str(err.value)
        assert str(p) in msg
        assert ":4:" in msg       # offending line
        assert err.value.line == 4
        assert err.value.column == 1

    def test_duplicate_bin_rejected(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("# t_R_s = 0.001\nn,occurrences\n2,4\n2,5\n")
        with pytest.raises(DataFormatError):
            read_histogram_csv(p)

    def test_window_count_mismatch(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("# t_R_s = 0.001\n# n_windows = 99\nn,occurrences\n0,10\n")
        with pytest.raises(DataFormatError):
            read_histogram_csv(p)


class TestHistogramJson:
    def test_round_trip(self, tmp_path, hist):
        p = tmp_path / "h.json"
        write_histogram_json(p, hist)
        back = read_histogram_json(p)
        assert back.t_R == hist.t_R
        np.testing.assert_array_equal(back.counts, hist.counts)
        assert back.meta == hist.meta

    def test_invalid_json_positions(self, tmp_path):
        p = tmp_path / "h.json"
        p.write_text('{"t_R_s": 0.001, "counts": {')
        with pytest.raises(DataFormatError) as err:
            read_histogram_json(p)
        assert err.value.line == 1

    def test_wrong_document_shape(self, tmp_path):
        p = tmp_path / "h.json"
        p.write_text('{"t_R_s": 0.001}')
        with pytest.raises(DataFormatError):
            read_histogram_json(p)


class TestFitResultJson:
    def test_round_trip(self, tmp_path):
        fit = FitResult(parameters={"a": 1.5, "b": np.float64(2.25)},
                        standard_errors={"a": 0.125},
                        converged=True, n_evals=321, log_likelihood=-1234.5,
                        diagnostics={"flag": True, "nested": {"x": [1, 2.5]},
                                     "bad": float("nan")})
        p = tmp_path / "fit.json"
        write_fit_result_json(p, fit)
        back = read_fit_result_json(p)
        assert back.parameters == {"a": 1.5, "b": 2.25}
        assert back.standard_errors == {"a": 0.125}
        assert back.converged is True
        assert back.n_evals == 321
        assert back.log_likelihood == -1234.5
        assert back.diagnostics["flag"] is True
        assert back.diagnostics["nested"] == {"x": [1, 2.5]}

    def test_invalid(self, tmp_path):
        p = tmp_path / "fit.json"
        p.write_text("[1, 2]")
        with pytest.raises(DataFormatError):
            read_fit_result_json(p)


class TestTableCsv:
    def test_round_trip_exact(self, tmp_path):
        cols = {"power_uW": np.array([0.5, 1.0, 2.0]),
                "rate_cps": np.array([0.1 + 0.2, 1e-17, 46200.0])}
        meta = {"source": "sweep", "n": 3}
        p = tmp_path / "t.csv"
        write_table_csv(p, cols, meta)
        back_cols, back_meta = read_table_csv(p, required=("power_uW", "rate_cps"))
        for k in cols:
            np.testing.assert_array_equal(back_cols[k], cols[k])  # bit-exact
        assert back_meta == meta

    def test_missing_required_column(self, tmp_path):
        p = tmp_path / "t.csv"
        write_table_csv(p, {"a": np.array([1.0])})
        with pytest.raises(DataFormatError) as err:
            read_table_csv(p, required=("a", "zz"))
        assert "zz" in str(err.value)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b\n1.0,2.0\n3.0\n")
        with pytest.raises(DataFormatError) as err:
            read_table_csv(p)
        assert err.value.line == 3

    def test_bad_number_positions(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b\n1.0,huh\n")
        with pytest.raises(DataFormatError) as err:
            read_table_csv(p)
        assert err.value.line == 2
        assert err.value.column == 2

    def test_empty_file(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("# only = header\n")
        with pytest.raises(DataFormatError):
            read_table_csv(p)

    def test_header_value_casting(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("# count = 7\n# scale = 2.5\n# tag = blue\na\n1.0\n")
        _, meta = read_table_csv(p)
        assert meta == {"count": 7, "scale": 2.5, "tag": "blue"}
        assert isinstance(meta["count"], int)
