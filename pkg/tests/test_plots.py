import pytest

from trajbench.model import BenchRun
from trajbench.plots import SEGMENT_ORDER, emit_plots
from trajbench.report import emit_report
from test_report import make_run, serial_timing


@pytest.fixture(scope="module")
def frozen_report():
    runs = [
        BenchRun("shared_seq", n, 1, make_run(n_workers=n, repeats=3).repeats, 40)
        for n in (1, 2, 4)
    ]
    return emit_report(runs, serial_timing(), machine="fixed")


def test_single_report_yields_three_charts(frozen_report, tmp_path):
    written = emit_plots([frozen_report], tmp_path / "out.svg")
    assert len(written) == 3
    names = [w.rsplit("/", 1)[-1] for w in written]
    assert names == ["out.svg", "out_speedup.svg", "out_ranks.svg"]
    for w in written:
        head = open(w, "rb").read(512)
        assert b"<svg" in head


def test_segment_order_is_fixed(frozen_report):
    keys = [k for k, _ in SEGMENT_ORDER]
    assert keys == [
        "t_comp", "t_io", "t_comm", "t_end_loop", "t_opening_trajectory",
        "t_overhead1", "t_overhead2",
    ]
    detail = frozen_report["points"][0]["rank_detail"][0]
    for k in keys:
        assert k in detail


def test_multi_report_overlay(frozen_report, tmp_path):
    other = dict(frozen_report, strategy="chain")
    written = emit_plots([frozen_report, other], tmp_path / "cmp.svg")
    # shared total + speedup charts, one per-rank chart per report
    assert len(written) == 4


def test_byte_identical_output_across_invocations(frozen_report, tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    first.mkdir()
    second.mkdir()
    wa = emit_plots([frozen_report], first / "chart.svg")
    wb = emit_plots([frozen_report], second / "chart.svg")
    for a, b in zip(wa, wb):
        assert open(a, "rb").read() == open(b, "rb").read()


def test_empty_report_set_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_plots([], tmp_path / "x.svg")
