import io
import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridpulse.ingest import (
    GAP,
    ActivityRecord,
    RecordParseError,
    TimeSeries,
    UnimputableSeriesError,
    impute_gaps,
    parse_records,
    series_by_cell,
    to_series,
    write_records,
)

TEN_MIN = 600_000


def ts(values, bw=TEN_MIN, start=0):
    return TimeSeries(1, bw, start, values)


class TestParse:
    def test_table_rows(self):
        res = parse_records(["1,10,57.78", "10,20,44.21"])
        assert res.records == [ActivityRecord(1, 10, 57.78), ActivityRecord(10, 20, 44.21)]
        assert res.errors == []

    def test_empty_stream(self):
        res = parse_records([])
        assert len(res) == 0 and res.errors == [] and res.skipped_empty == 0

    def test_header_skipped(self):
        res = parse_records(["cell_id,timestamp_ms,internet_activity\n", "3,600000,1.5\n"])
        assert res.records == [ActivityRecord(3, 600000, 1.5)]

    @pytest.mark.parametrize("line", ["1,10", "1,10,5,6", "a,10,5", "1,x,5", "1,10,abc", "0,10,1.0", "1,10,-2"])
    def test_strict_error_has_line_number(self, line):
        with pytest.raises(RecordParseError) as err:
            parse_records(["1,0,1.0", line])
        assert err.value.lineno == 2

    def test_lenient_tally(self):
        res = parse_records(["1,0,1.0", "bad", "2,0,nope", "3,0,2.0"], strict=False)
        assert [r.cell_id for r in res] == [1, 3]
        assert [e[0] for e in res.errors] == [2, 3]

    def test_telecom_columns(self):
        lines = [
            "1\t1383260400000\t39\t0.1\t0.2\t0.3\t0.4\t57.78\n",
            "1\t1383260400000\t0\t0.1\t\t\t\t\n",
            "10\t1383261000000\t39\t\t\t\t\t44.21\n",
        ]
        res = parse_records(lines, "telecom_tsv")
        assert res.records == [ActivityRecord(1, 1383260400000, 57.78), ActivityRecord(10, 1383261000000, 44.21)]
        assert res.skipped_empty == 1

    def test_telecom_wrong_columns(self):
        with pytest.raises(RecordParseError):
            parse_records(["1\t2\t3\n"], "telecom_tsv")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            parse_records([], "xml")

    @given(st.lists(st.tuples(st.integers(1, 10_000), st.integers(0, 2**53),
                              st.floats(0, 1e12, allow_nan=False, allow_infinity=False)), max_size=30))
    def test_round_trip(self, rows):
        records = [ActivityRecord(*r) for r in rows]
        buf = io.StringIO()
        write_records(records, buf)
        buf.seek(0)
        assert parse_records(buf).records == records


class TestBinning:
    def test_same_bin_summed(self):
        recs = [ActivityRecord(1, 0, 3.0), ActivityRecord(1, 100, 4.0)]
        s = to_series(recs, 1, TEN_MIN, 0, TEN_MIN)
        assert s.values.tolist() == [7.0]

    def test_hole_marked(self):
        recs = [ActivityRecord(1, 0, 1.0), ActivityRecord(1, 2 * TEN_MIN, 2.0), ActivityRecord(2, TEN_MIN, 9.0)]
        s = to_series(recs, 1, TEN_MIN, 0, 3 * TEN_MIN)
        assert s.values[0] == 1.0 and math.isnan(s.values[1]) and s.values[2] == 2.0
        assert s.n_gaps == 1

    def test_unknown_cell_all_gap(self):
        s = to_series([ActivityRecord(1, 0, 1.0)], 5, TEN_MIN, 0, 2 * TEN_MIN)
        assert s.n_gaps == 2

    def test_two_month_length(self):
        start = datetime(2013, 11, 1, tzinfo=timezone.utc)
        end = datetime(2014, 1, 1, tzinfo=timezone.utc)
        start_ms, end_ms = int(start.timestamp() * 1000), int(end.timestamp() * 1000)
        expected = (end - start) // (datetime(2000, 1, 1, 0, 10) - datetime(2000, 1, 1))
        assert expected == 8784
        s = to_series([], 1, TEN_MIN, start_ms, end_ms)
        assert len(s) == 8784

    @pytest.mark.parametrize("args", [(0, 0, 10), (10, 10, 10), (10, 0, 15)])
    def test_bad_window(self, args):
        with pytest.raises(ValueError):
            to_series([], 1, *args)

    def test_series_by_cell_out_of_window_ignored(self):
        recs = [ActivityRecord(2, -1, 5.0), ActivityRecord(2, 0, 1.0), ActivityRecord(3, 20, 1.0)]
        out = series_by_cell(recs, 10, 0, 20)
        assert list(out) == [2]
        assert out[2].values[0] == 1.0


class TestImpute:
    def test_table_gap(self):
        out = impute_gaps(ts([57.78, GAP, 44.21]))
        assert out.values[0] == 57.78 and out.values[2] == 44.21
        assert out.values[1] == (57.78 + 44.21) / 2
        assert abs(out.values[1] - 50.995) <= math.ulp(50.995)

    def test_leading_gap(self):
        assert impute_gaps(ts([GAP, 5.0])).values.tolist() == [5.0, 5.0]

    def test_trailing_run(self):
        assert impute_gaps(ts([2.0, GAP, GAP])).values.tolist() == [2.0, 2.0, 2.0]

    def test_linear_run(self):
        assert impute_gaps(ts([0.0, GAP, GAP, 3.0])).values.tolist() == [0.0, 1.0, 2.0, 3.0]

    def test_all_gap(self):
        with pytest.raises(UnimputableSeriesError, match="unimputable"):
            impute_gaps(ts([GAP, GAP]))

    def test_metadata_kept(self):
        s = TimeSeries(42, 60_000, 1000, [1.0, GAP])
        out = impute_gaps(s)
        assert (out.cell_ref, out.bin_width_ms, out.start_ms) == (42, 60_000, 1000)

    @settings(max_examples=200)
    @given(st.lists(st.one_of(st.none(), st.floats(0, 1e6, allow_nan=False)), min_size=1, max_size=40)
           .filter(lambda v: any(x is not None for x in v)))
    def test_properties(self, raw):
        values = np.array([GAP if v is None else v for v in raw])
        out = impute_gaps(ts(values))
        observed = ~np.isnan(values)
        assert not np.isnan(out.values).any()
        assert np.array_equal(out.values[observed], values[observed])
        assert np.array_equal(impute_gaps(out).values, out.values)
        assert (out.values >= 0).all()
        for t in range(1, len(values) - 1):
            if np.isnan(values[t]) and observed[t - 1] and observed[t + 1]:
                assert out.values[t] == (values[t - 1] + values[t + 1]) / 2
