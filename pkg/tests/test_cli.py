from __future__ import annotations

import numpy as np

from bench.cli import EXIT_CONFIG, EXIT_EQUIVALENCE, EXIT_IO, EXIT_OK, main

SMALL = ["--shape", "1,1,32,16", "--iters", "1", "--warmup", "0", "--log-level", "WARNING"]


def test_writes_csv_report(tmp_path) -> None:
    out = tmp_path / "report.csv"
    assert main(SMALL + ["--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("impl,mode,dims,")
    assert lines[1].startswith("reference,interleave,16,")


def test_report_to_stdout(capsys) -> None:
    assert main(SMALL + ["--report", "md", "--impls", "rome-gather"]) == EXIT_OK
    assert "| reference |" in capsys.readouterr().out


def test_bad_config_exits_1(capsys) -> None:
    assert main(["--dims", "42,42,44", "--mode", "quarter"]) == EXIT_CONFIG
    assert "quarter" in capsys.readouterr().err


def test_unknown_flag_exits_1() -> None:
    assert main(["--frobnicate"]) == EXIT_CONFIG


def test_failed_check_exits_2_without_report(tmp_path, monkeypatch) -> None:
    monkeypatch.setattr("bench.runner.fused_rome", lambda x, *a, **k: np.full_like(x, 0.5))
    out = tmp_path / "report.csv"
    assert main(SMALL + ["--impls", "rome-fused", "--out", str(out)]) == EXIT_EQUIVALENCE
    assert not out.exists()


def test_unwritable_output_exits_3(tmp_path) -> None:
    out = tmp_path / "no-such-dir" / "report.csv"
    assert main(SMALL + ["--impls", "rome-gather", "--out", str(out)]) == EXIT_IO
