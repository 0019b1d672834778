"""Figure rendering tests: artifacts in, PNG files out."""
import os

import pytest

from strokeplan.harness import run_benchmark
from strokeplan.report import render_report

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(scope="module")
def bench_dir(params, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("bench"))
    run_benchmark(params=params, policy_names=("random", "expert-hosp"),
                  episodes=6, master_seed=13, out_dir=out, workers=1)
    return out


def _assert_png(path):
    assert os.path.exists(path), path
    with open(path, "rb") as fh:
        head = fh.read(8)
    assert head == PNG_MAGIC, path
    assert os.path.getsize(path) > 1000, path


def test_render_report_full_set(bench_dir, tmp_path):
    out_dir = str(tmp_path / "figs")
    paths = render_report(bench_dir, out_dir)
    names = {os.path.basename(p) for p in paths}
    assert {"returns.png", "returns_split.png",
            "time_to_treatment.png"} <= names
    trace_figs = {n for n in names if n.startswith("trace_")}
    assert trace_figs == {"trace_random_mild.png", "trace_random_severe.png",
                          "trace_expert-hosp_mild.png",
                          "trace_expert-hosp_severe.png"}
    for path in paths:
        _assert_png(path)


def test_render_report_default_out_dir(bench_dir):
    paths = render_report(bench_dir)
    assert all(p.startswith(os.path.join(bench_dir, "figures"))
               for p in paths)
    for path in paths:
        _assert_png(path)


def test_render_report_without_traces(params, tmp_path):
    out = str(tmp_path / "bench")
    run_benchmark(params=params, policy_names=("random",), episodes=4,
                  master_seed=2, out_dir=out, workers=1, write_traces=False)
    paths = render_report(out)
    assert len(paths) == 3


def test_render_report_rejects_non_bench_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        render_report(str(tmp_path))
