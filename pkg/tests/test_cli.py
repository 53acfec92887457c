from __future__ import annotations

import subprocess
import sys

import pytest

from gpar.cli import _parse_query, _resolve, main
from gpar.errors import ConfigError, DataError
from gpar.kg import TAIL, load_dataset

from conftest import SPORTS_ROWS, write_split


def inverse_rows():
    train, valid, test = [], [], []
    for i in range(20):
        a, b = f"a{i}", f"b{i}"
        train.append((a, "cites", b))
        row = (b, "cited_by", a)
        (train if i < 8 else valid if i < 10 else test).append(row)
    return train, valid, test


@pytest.fixture
def inverse_files(tmp_path):
    train, valid, test = inverse_rows()
    return {
        "train": write_split(tmp_path / "train.tsv", train),
        "valid": write_split(tmp_path / "valid.tsv", valid),
        "test": write_split(tmp_path / "test.tsv", test),
        "dir": tmp_path,
    }


@pytest.fixture
def chain_files(tmp_path):
    train, valid = [], []
    for i in range(10):
        a, m, b = f"a{i}", f"m{i}", f"b{i}"
        train += [(a, "x", m), (m, "y", b)]
        (train if i < 8 else valid).append((a, "r3", b))
    return {
        "train": write_split(tmp_path / "train.tsv", train),
        "valid": write_split(tmp_path / "valid.tsv", valid),
        "dir": tmp_path,
    }


def test_mine_writes_reproducible_rules(inverse_files, capsys):
    out1 = str(inverse_files["dir"] / "rules1.tsv")
    out2 = str(inverse_files["dir"] / "rules2.tsv")
    base = ["mine", "--train", inverse_files["train"], "--measure", "dmap",
            "--L", "1", "--K", "10"]
    assert main(base + ["--out", out1]) == 0
    assert main(base + ["--out", out2, "--threads", "2"]) == 0
    with open(out1, "rb") as a, open(out2, "rb") as b:
        assert a.read() == b.read()
    with open(out1) as fh:
        assert fh.readline() == "#gpar-rules v1 measure=dmap L=1 K=10\n"


def test_mine_clears_checkpoint_on_success(inverse_files):
    ckpt = inverse_files["dir"] / "ckpt"
    out = str(inverse_files["dir"] / "rules.tsv")
    rc = main(["mine", "--train", inverse_files["train"], "--out", out,
               "--L", "1", "--checkpoint-dir", str(ckpt)])
    assert rc == 0
    assert not ckpt.exists()


def test_evaluate_end_to_end(inverse_files, capsys):
    out = str(inverse_files["dir"] / "rules.tsv")
    main(["mine", "--train", inverse_files["train"], "--L", "1", "--out", out])
    capsys.readouterr()

    report = str(inverse_files["dir"] / "report.tsv")
    perrel = str(inverse_files["dir"] / "perrel.tsv")
    args = ["evaluate", "--train", inverse_files["train"],
            "--valid", inverse_files["valid"], "--test", inverse_files["test"],
            "--rules", out, "--out", report, "--per-relation", perrel]
    assert main(args) == 0
    stdout = capsys.readouterr().out
    assert "mrr\t1\n" in stdout
    assert "hits@10\t1\n" in stdout

    report_text = open(report).read()
    assert report_text.startswith("#gpar-report v1\n")
    assert "config.rules_file\t" in report_text
    assert open(perrel).read().count("\n") == 3  # header + 2 direction rows

    metrics_png = inverse_files["dir"] / "report_metrics.png"
    relations_png = inverse_files["dir"] / "report_relations.png"
    assert metrics_png.stat().st_size > 0
    assert relations_png.stat().st_size > 0

    again = str(inverse_files["dir"] / "report2.tsv")
    assert main(args[:-4] + ["--out", again, "--no-figures"]) == 0
    assert open(again).read() == report_text
    assert not (inverse_files["dir"] / "report2_metrics.png").exists()


def test_predict_output(inverse_files, capsys):
    rules = str(inverse_files["dir"] / "rules.tsv")
    main(["mine", "--train", inverse_files["train"], "--L", "1", "--out", rules])
    capsys.readouterr()
    rc = main(["predict", "? cited_by a5", "--train", inverse_files["train"],
               "--rules", rules, "--top", "3"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    first = lines[0].split("\t")
    assert first == ["? cited_by a5", "1", "b5", "1:1"]
    # ranks of the remaining tied entities come from one shared block
    assert lines[1].split("\t")[1] == lines[2].split("\t")[1]


def test_explain_output(inverse_files, capsys):
    rules = str(inverse_files["dir"] / "rules.tsv")
    main(["mine", "--train", inverse_files["train"], "--L", "1", "--out", rules])
    capsys.readouterr()
    rc = main(["explain", "b5 cited_by ?", "a5",
               "--train", inverse_files["train"], "--rules", rules])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "b5 cited_by ?\ta5\trank 1"
    assert out[1].startswith("  rule 1 matched 1x")
    assert "x <-[cites]- y" in out[1]

    rc = main(["explain", "b5 cited_by ?", "a7",
               "--train", inverse_files["train"], "--rules", rules])
    assert rc == 0
    assert "no supporting rules for a7" in capsys.readouterr().out


def test_select_l_picks_two_on_chains(chain_files, capsys):
    out = str(chain_files["dir"] / "selected.tsv")
    figure = str(chain_files["dir"] / "lcurve.png")
    rc = main(["select-l", "--train", chain_files["train"],
               "--valid", chain_files["valid"], "--measure", "dmap",
               "--K", "50", "--out", out, "--figure", figure])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "selected\t2" in stdout
    assert "L=2\tvalidation_mrr\t1\n" in stdout
    with open(out) as fh:
        assert " L=2 " in fh.readline()
    assert (chain_files["dir"] / "lcurve.png").stat().st_size > 0


def test_stats_output(tmp_path, capsys):
    train = write_split(tmp_path / "train.tsv", SPORTS_ROWS + [SPORTS_ROWS[0]])
    rc = main(["stats", "--train", train])
    assert rc == 0
    out = capsys.readouterr().out
    assert "entities\t24" in out
    assert "relations\t4" in out
    assert f"train\t{len(SPORTS_ROWS)}\t(1 duplicates dropped)" in out


def test_usage_errors_exit_1(inverse_files, capsys):
    cases = [
        ["mine", "--train", inverse_files["train"], "--out", "x", "--measure", "map"],
        ["mine", "--train", inverse_files["train"], "--out", "x", "--K", "0"],
        ["mine", "--train", inverse_files["train"], "--out", "x", "--L", "9"],
        ["mine", "--train", inverse_files["train"], "--out", "x", "--threads", "0"],
        ["mine", "--no-such-flag"],
        ["predict", "a5 cited_by", "--train", inverse_files["train"], "--rules", "x"],
        ["predict", "? cited_by ?", "--train", inverse_files["train"], "--rules", "x"],
        ["predict", "a5 cited_by b5", "--train", inverse_files["train"], "--rules", "x"],
    ]
    for argv in cases:
        assert main(argv) == 1, argv
        assert "error:" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, inverse_files, capsys):
    missing = str(tmp_path / "missing.tsv")
    assert main(["stats", "--train", missing]) == 2

    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    assert main(["stats", "--train", str(empty)]) == 2
    assert "empty split" in capsys.readouterr().err

    ragged = tmp_path / "ragged.tsv"
    ragged.write_text("a\tr\n")
    assert main(["stats", "--train", str(ragged)]) == 2

    rules = str(inverse_files["dir"] / "rules.tsv")
    main(["mine", "--train", inverse_files["train"], "--L", "1", "--out", rules])
    rc = main(["predict", "? cited_by b55", "--train", inverse_files["train"],
               "--rules", rules])
    assert rc == 2
    assert "unknown entity 'b55'" in capsys.readouterr().err

    stale = tmp_path / "stale.tsv"
    text = open(rules).read()
    stale.write_text(text.replace("#gpar-rules v1", "#gpar-rules v9"))
    rc = main(["predict", "? cited_by a5", "--train", inverse_files["train"],
               "--rules", str(stale)])
    assert rc == 2
    assert "version 9" in capsys.readouterr().err


def test_resolve_suggests_near_misses():
    table = {"member_of": 0, "manager_of": 1, "nationality": 2}
    assert _resolve("member_of", table, "relation") == 0
    with pytest.raises(DataError, match=r"unknown relation 'member_off' \(similar: member_of"):
        _resolve("member_off", table, "relation")
    with pytest.raises(DataError, match="unknown relation 'zzz'$"):
        _resolve("zzz", table, "relation")


def test_parse_query_shapes(tmp_path):
    train = write_split(tmp_path / "train.tsv", [("a", "r", "b")])
    split = load_dataset(train)
    assert _parse_query("a r ?", split.vocab) == (0, 0, TAIL)
    anchor, relation, direction = _parse_query("? r b", split.vocab)
    assert (relation, direction) == (0, "head")
    with pytest.raises(ConfigError, match="three tokens"):
        _parse_query("a r b ?", split.vocab)
    with pytest.raises(ConfigError, match="exactly one '\\?'"):
        _parse_query("? r ?", split.vocab)


def test_module_entry_point(inverse_files):
    proc = subprocess.run(
        [sys.executable, "-m", "gpar", "stats", "--train", inverse_files["train"]],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "entities\t40" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "gpar", "stats", "--train", "nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
