import json
import random

import pytest

from crowdconsensus import (
    AiPredictionSet,
    DanglingReferenceError,
    DataError,
    MissingAuthor,
    ParseError,
    RangeError,
    StrategyConfig,
    UnknownSpecies,
    WriteError,
    build_subsets,
    build_vote_table,
    evaluate,
    run_plantnet,
)
from crowdconsensus.io import (
    DatasetManifest,
    convert_archive,
    load_dataset,
    read_report,
    read_votes,
    write_ai_predictions,
    write_experts,
    write_labels,
    write_report,
    write_table,
)

from conftest import random_instance, table_from_rows


def write(path, text):
    path.write_bytes(text.encode("utf-8"))
    return path


@pytest.fixture
def small(tmp_path):
    write(tmp_path / "votes.csv", "obs_id,user_id,species_id\no1,alice,s1\no1,bob,s1\no2,bob,s2\n")
    write(tmp_path / "observations.csv", "obs_id,author_user_id\no1,alice\no2,bob\n")
    return tmp_path


def test_read_votes(small):
    t = read_votes(small / "votes.csv", small / "observations.csv")
    assert t.dims == (2, 2, 2)
    assert set(t.rows()) == {("o1", "alice", "s1"), ("o1", "bob", "s1"), ("o2", "bob", "s2")}


def test_tokens_stay_strings(tmp_path):
    write(tmp_path / "v.csv", "obs_id,user_id,species_id\n007,01,1.0\n")
    write(tmp_path / "o.csv", "obs_id,author_user_id\n007,01\n")
    t = read_votes(tmp_path / "v.csv", tmp_path / "o.csv")
    assert list(t.rows()) == [("007", "01", "1.0")]


def test_crlf_and_bom(tmp_path):
    write(tmp_path / "v.csv", "\ufeffobs_id,user_id,species_id\r\no1,a,x\r\no1,b,y\r\n")
    write(tmp_path / "o.csv", "obs_id,author_user_id\r\no1,a\r\n")
    t = read_votes(tmp_path / "v.csv", tmp_path / "o.csv")
    assert set(t.rows()) == {("o1", "a", "x"), ("o1", "b", "y")}


def test_bad_header(tmp_path, small):
    write(tmp_path / "v.csv", "obs,user,species\no1,a,x\n")
    with pytest.raises(ParseError) as err:
        read_votes(tmp_path / "v.csv", small / "observations.csv")
    assert err.value.row == 1


def test_malformed_row_reports_line(tmp_path, small):
    write(tmp_path / "v.csv", "obs_id,user_id,species_id\no1,alice,s1\no2,bob\n")
    with pytest.raises(ParseError) as err:
        read_votes(tmp_path / "v.csv", small / "observations.csv")
    assert err.value.row == 3
    write(tmp_path / "v.csv", "obs_id,user_id,species_id\no1,alice,s1\no2,bob,s2,extra\n")
    with pytest.raises(ParseError) as err:
        read_votes(tmp_path / "v.csv", small / "observations.csv")
    assert err.value.row == 3


def test_empty_field(tmp_path, small):
    write(tmp_path / "v.csv", "obs_id,user_id,species_id\no1,alice,s1\no2,,s2\n")
    with pytest.raises(ParseError) as err:
        read_votes(tmp_path / "v.csv", small / "observations.csv")
    assert err.value.row == 3


def test_missing_author(tmp_path, small):
    write(tmp_path / "o.csv", "obs_id,author_user_id\no1,alice\n")
    with pytest.raises(MissingAuthor):
        read_votes(small / "votes.csv", tmp_path / "o.csv")


def test_author_species_column(tmp_path, small):
    write(tmp_path / "o.csv", "obs_id,author_user_id,species_id\no1,alice,\no2,carol,s3\n")
    t = read_votes(small / "votes.csv", tmp_path / "o.csv")
    assert ("o2", "carol", "s3") in set(t.rows())


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_votes(tmp_path / "nope.csv", tmp_path / "nope2.csv")


def test_species_dictionary_and_ai(small):
    write(small / "species.csv", "species_id\ns1\ns2\ns3\n")
    write(small / "ai.csv", "obs_id,species_id,score\no1,s3,0.25\no2,s2,1\n")
    write(small / "experts.csv", "user_id\nbob\n")
    table, ai, experts = load_dataset(DatasetManifest.from_dir(small))
    assert table.n_species == 3
    assert table.token("species", ai.species).tolist() == ["s3", "s2"]
    assert ai.prob.tolist() == [0.25, 1.0]
    assert table.token("user", experts).tolist() == ["bob"]


def test_ai_species_extends_vocabulary(small):
    write(small / "ai.csv", "obs_id,species_id,score\no1,s9,0.5\n")
    table, ai, experts = load_dataset(DatasetManifest.from_dir(small))
    assert table.species_tokens.tolist() == ["s1", "s2", "s9"]
    assert experts is None


def test_unknown_species_in_closed_vocabulary(small):
    write(small / "species.csv", "species_id\ns1\n")
    with pytest.raises(UnknownSpecies):
        load_dataset(DatasetManifest.from_dir(small))


@pytest.mark.parametrize("line,error", [("o1,s1,1.3", RangeError), ("o1,s1,-0.1", RangeError),
                                        ("o1,s1,high", ParseError), ("o9,s1,0.5", DanglingReferenceError)])
def test_ai_file_errors(small, line, error):
    write(small / "ai.csv", f"obs_id,species_id,score\n{line}\n")
    write(small / "species.csv", "species_id\ns1\ns2\n")
    with pytest.raises(error):
        load_dataset(DatasetManifest.from_dir(small))


def test_unknown_expert(small):
    write(small / "experts.csv", "user_id\nzed\n")
    with pytest.raises(DanglingReferenceError):
        load_dataset(DatasetManifest.from_dir(small))


def test_data_errors_share_a_base():
    for cls in (ParseError, RangeError, DanglingReferenceError, MissingAuthor, UnknownSpecies):
        assert issubclass(cls, DataError)


def test_round_trip(tmp_path):
    rng = random.Random(4)
    for _ in range(20):
        rows, author, n_user, K = random_instance(rng)
        t = table_from_rows(rows, author, n_user, K)
        write_table(t, tmp_path / "v.csv", tmp_path / "o.csv")
        back = read_votes(tmp_path / "v.csv", tmp_path / "o.csv")
        # integer tokens come back as strings
        assert sorted(back.rows()) == sorted(tuple(map(str, r)) for r in t.rows())
        assert back.token("user", back.author).tolist() == [str(u) for u in t.token("user", t.author)]


def test_ai_and_experts_round_trip(tmp_path):
    t = build_vote_table([("o1", "a", "x"), ("o2", "b", "y")], [("o1", "a"), ("o2", "b")])
    ai = AiPredictionSet([0, 1], [1, 0], [0.1, 0.7000000000000001])
    write_table(t, tmp_path / "votes.csv", tmp_path / "observations.csv")
    write_ai_predictions(t, ai, tmp_path / "ai.csv")
    write_experts(t, [1], tmp_path / "experts.csv")
    t2, ai2, ex2 = load_dataset(DatasetManifest.from_dir(tmp_path))
    assert ai2.prob.tolist() == ai.prob.tolist()
    assert t2.token("species", ai2.species).tolist() == ["y", "x"]
    assert t2.token("user", ex2).tolist() == ["b"]


def test_report_round_trip(tmp_path, fixture_trace_table):
    t = fixture_trace_table
    r = run_plantnet(t)
    truth, expert, *_ = build_subsets(t, [t.lookup("user")["A"]])
    rep = evaluate(r, truth, expert)
    cfg = StrategyConfig()
    write_report(rep, r, tmp_path / "report.json", config=cfg, table=t)
    doc = read_report(tmp_path / "report.json")
    assert doc["metrics"]["accuracy"] == rep.accuracy
    assert doc["config"]["theta_acc"] == 0.7
    assert doc["n_valid"] == 9 and doc["iterations_run"] == 3
    assert json.loads((tmp_path / "report.json").read_text()) == doc


def test_report_nan_becomes_null(tmp_path, fixture_trace_table):
    t = fixture_trace_table
    r = run_plantnet(t)
    truth, expert, *_ = build_subsets(t, [0])
    ai = AiPredictionSet([0], [0], [0.95])
    write_report(evaluate(r, truth, expert, ai=ai), r, tmp_path / "r.json")
    bins = read_report(tmp_path / "r.json")["metrics"]["reliability"]
    assert bins[0]["accuracy"] is None and bins[9]["count"] == 1


def test_write_errors(tmp_path, fixture_trace_table):
    r = run_plantnet(fixture_trace_table)
    with pytest.raises(WriteError):
        write_report(None, r, tmp_path / "missing" / "r.json")
    with pytest.raises(WriteError):
        write_labels(fixture_trace_table, r, tmp_path / "missing" / "labels.csv")


def test_labels_export(tmp_path, fixture_trace_table):
    t = fixture_trace_table
    r = run_plantnet(t)
    write_labels(t, r, tmp_path / "labels.csv")
    lines = (tmp_path / "labels.csv").read_text().splitlines()
    assert lines[0] == "obs_id,label,confidence,accuracy_ratio,valid"
    assert len(lines) == t.n_obs + 1
    assert lines[1].startswith("obs1,k1,") and lines[1].endswith(",1")


def test_convert_archive(tmp_path):
    write(tmp_path / "raw.csv", "obs,user,sp,is_author\no1,a,x,1\no1,b,y,0\no2,b,y,true\n")
    m = convert_archive(tmp_path / "raw.csv", tmp_path / "out", obs_col="obs", user_col="user",
                        species_col="sp")
    t = read_votes(m.votes_path, m.observations_path)
    assert t.token("user", t.author).tolist() == ["a", "b"]
    assert t.n_votes == 3


def test_convert_archive_requires_authors(tmp_path):
    write(tmp_path / "raw.csv", "obs_id,user_id,species_id,is_author\no1,a,x,0\n")
    with pytest.raises(DataError):
        convert_archive(tmp_path / "raw.csv", tmp_path / "out")
    write(tmp_path / "raw.csv", "obs_id,user_id,species_id\no1,a,x\n")
    with pytest.raises(ParseError):
        convert_archive(tmp_path / "raw.csv", tmp_path / "out")
