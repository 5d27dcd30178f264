import pytest

from irispad.errors import ConfigurationError
from irispad.matrix import MatrixSpec, load_matrix_spec, matrix_csv, matrix_text, run_protocol_matrix
from irispad.metrics import apcer, bpcer, hter
from irispad.scores import ScoreRecord, write_scores


def scores(seed, n=20):
    import numpy as np

    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        bona = i % 2 == 0
        s = float(np.clip(rng.normal(0.7 if bona else 0.3, 0.2), 0, 1))
        out.append(ScoreRecord(round(s, 6), "bona_fide" if bona else "attack",
                               "none" if bona else ("printout" if i % 4 == 1 else "textured_lens"),
                               path=f"{i}.png"))
    return out


def test_three_by_two_grid(tmp_path):
    spec = MatrixSpec("x", train=["a", "b", "c"], test=["d", "e"], variants=["apbs"], base_dir=str(tmp_path))
    for k, (v, tr, te) in enumerate(spec.cells()):
        write_scores(scores(k), spec.score_path(v, tr, te))
    report = run_protocol_matrix(spec)
    assert len(report.cells) == 6
    assert report.missing == []
    assert len(matrix_csv(report).strip().splitlines()) == 7


def test_missing_cell_is_absent(tmp_path):
    spec = MatrixSpec("x", train=["a", "b"], test=["a", "b"], variants=["pbs"], exclude_diagonal=True,
                      base_dir=str(tmp_path))
    write_scores(scores(0), spec.score_path("pbs", "a", "b"))
    report = run_protocol_matrix(spec)
    assert report.cells[("pbs", "b", "a")] is None
    assert report.cells[("pbs", "a", "b")] is not None
    assert "absent" in matrix_csv(report)
    assert "absent cells: pbs/b/a" in matrix_text(report)


def test_single_class_cell(tmp_path):
    spec = MatrixSpec("x", train=["a"], test=["a"], variants=["pbs"], layout="intra", base_dir=str(tmp_path))
    write_scores([r for r in scores(1) if r.is_bona_fide], spec.score_path("pbs", "a", "a"))
    rep = run_protocol_matrix(spec).cells[("pbs", "a", "a")]
    assert rep.eer is None and rep.tdr is None
    assert rep.bpcer is not None and rep.apcer is None


def test_intra_hter_composes(tmp_path):
    spec = MatrixSpec("x", train=["a"], test=["a"], variants=["baseline", "apbs"], layout="intra",
                      base_dir=str(tmp_path))
    for k, key in enumerate(spec.cells()):
        write_scores(scores(10 + k), spec.score_path(*key))
    report = run_protocol_matrix(spec)
    for key, rep in report.cells.items():
        recs = scores(10 + list(report.cells).index(key))
        assert rep.hter == hter(apcer(recs), bpcer(recs))
    text = matrix_text(report)
    assert "HTER" in text and "baseline" in text


def test_per_attack_layout(tmp_path):
    spec = MatrixSpec("x", train=["a"], test=["a"], variants=["pbs"], layout="per_attack", base_dir=str(tmp_path))
    write_scores(scores(3), spec.score_path("pbs", "a", "a"))
    text = matrix_text(run_protocol_matrix(spec))
    assert "printout" in text and "textured_lens" in text


def test_spec_file(tmp_path):
    (tmp_path / "m.toml").write_text(
        '[matrix]\nname = "cross"\ntrain = ["vis"]\ntest = ["nir", "vis"]\nexclude_diagonal = true\n'
    )
    spec = load_matrix_spec(tmp_path / "m.toml")
    assert list(spec.cells()) == [(v, "vis", "nir") for v in ("baseline", "pbs", "apbs")]
    assert spec.base_dir == str(tmp_path.resolve())
    (tmp_path / "bad.toml").write_text('[matrix]\ntrain = ["a"]\ntest = ["b"]\nlayout = "diagonal"\n')
    with pytest.raises(ConfigurationError):
        load_matrix_spec(tmp_path / "bad.toml")
