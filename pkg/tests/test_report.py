import json

from shardsearch.evalkit import MetricReport
from shardsearch.report import save_eval_report, save_latency_report


def sample_report():
    names = ["Recall@500", "Recall@1000", "MRR", "P@5", "P@10"]
    per_query = {
        "q1": {"Recall@500": 1.0, "Recall@1000": 1.0, "MRR": 1.0, "P@5": 0.2, "P@10": 0.1},
        "q2": {"Recall@500": 0.5, "Recall@1000": 1.0, "MRR": 0.25, "P@5": 0.0, "P@10": 0.1},
    }
    means = {name: sum(v[name] for v in per_query.values()) / 2 for name in names}
    return MetricReport(metric_names=names, per_query=per_query, means=means, query_count=2)


def test_eval_report_files(tmp_path):
    paths = save_eval_report(sample_report(), tmp_path)
    for key in ("json", "table", "tsv", "means_png", "distributions_png"):
        assert paths[key].exists() and paths[key].stat().st_size > 0

    payload = json.loads(paths["json"].read_text())
    assert payload["query_count"] == 2
    assert payload["means"]["MRR"] == 0.625

    tsv_lines = paths["tsv"].read_text().splitlines()
    assert tsv_lines[0].split("\t") == ["query", "Recall@500", "Recall@1000", "MRR", "P@5", "P@10"]
    assert tsv_lines[-1].startswith("MEAN\t")

    table = paths["table"].read_text()
    assert "MEAN" in table and "MRR" in table


def test_eval_report_pngs_are_png(tmp_path):
    paths = save_eval_report(sample_report(), tmp_path)
    assert paths["means_png"].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_latency_report(tmp_path):
    samples = [float(v) for v in range(1, 101)]
    summary = save_latency_report(samples, tmp_path)
    assert summary["p95_ms"] == 95.0
    assert summary["p50_ms"] == 50.0
    assert summary["max_ms"] == 100.0
    paths = summary["paths"]
    assert paths["tsv"].read_text().splitlines()[0] == "sample\tms"
    assert json.loads(paths["json"].read_text())["count"] == 100
    assert paths["png"].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
