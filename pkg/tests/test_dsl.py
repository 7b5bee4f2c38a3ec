import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surrogate_effects.dsl import (
    dumps_covariance,
    format_graph,
    format_sem,
    load_covariance,
    loads_covariance,
    parse_graph,
    save_covariance,
)
from surrogate_effects.exceptions import ParseError
from surrogate_effects.fixtures import FIXTURES
from surrogate_effects.gaussian import LabeledCovariance
from surrogate_effects.sem import implied_covariance, random_dag, random_sem


def parse_error(text):
    with pytest.raises(ParseError) as info:
        parse_graph(text)
    return info.value


class TestParse:
    def test_fixture_a(self):
        doc = parse_graph(FIXTURES["A"].source)
        g = doc.diagram
        assert len(g.vertices) == 6 and len(g.directed) == 6
        assert g.latent == {"Y"}
        assert doc.coefficients[("X", "Y")] == 0.7

    def test_fixture_c_bidirected(self):
        doc = parse_graph(FIXTURES["C"].source)
        assert doc.bidirected_cov == {("X", "Y"): 0.1}

    def test_comments_blank_lines_and_indent(self):
        doc = parse_graph("# header\n\n  observed A B  # two\n  A -> B : -2.5e-1\n")
        assert doc.coefficients[("A", "B")] == -0.25

    def test_bidirected_key_sorted(self):
        doc = parse_graph("observed A B\nB <-> A : 0.2\n")
        assert doc.bidirected_cov == {("A", "B"): 0.2}

    def test_self_loop(self):
        err = parse_error("observed A\nA -> A\n")
        assert err.line == 2 and "self-loop" in str(err)

    def test_cycle_names_both_lines(self):
        err = parse_error("observed X Y\nX -> Y\nY -> X\n")
        assert "line" in str(err) and "2" in str(err) and "3" in str(err)

    def test_undeclared_name_location(self):
        err = parse_error("observed A\nA -> B\n")
        assert (err.line, err.column) == (2, 6)

    def test_duplicate_declaration(self):
        err = parse_error("observed A\nlatent A\n")
        assert err.line == 2 and "already declared" in str(err)

    def test_duplicate_edges(self):
        assert parse_error("observed A B\nA -> B\nA -> B\n").line == 3
        assert parse_error("observed A B\nA <-> B\nB <-> A\n").line == 3

    @pytest.mark.parametrize("num", ["abc", "nan", "inf", "1.2.3"])
    def test_bad_numbers(self, num):
        err = parse_error(f"observed A B\nA -> B : {num}\n")
        assert err.line == 2 and err.column == 10

    def test_garbage_line(self):
        err = parse_error("observed A B\nA => B\n")
        assert err.line == 2

    def test_invalid_name(self):
        assert parse_error("observed 9A\n").line == 1

    def test_empty_declaration(self):
        assert parse_error("latent\n").line == 1

    def test_error_message_has_location(self):
        assert str(parse_error("observed A\nA -> B\n")).startswith("line 2, column 6")


class TestToSem:
    def test_missing_annotation(self):
        doc = parse_graph("observed A B C\nA -> B : 0.5\nB -> C\n")
        with pytest.raises(ParseError) as info:
            doc.to_sem()
        assert info.value.line == 3

    def test_fixture_unit_variances(self):
        cov = implied_covariance(parse_graph(FIXTURES["D"].source).to_sem())
        np.testing.assert_allclose(np.diag(cov.matrix), 1.0, atol=1e-14)


class TestRoundTrip:
    @pytest.mark.parametrize("name", sorted(FIXTURES))
    def test_fixtures(self, name):
        doc = parse_graph(FIXTURES[name].source)
        again = parse_graph(format_graph(doc.diagram, doc.coefficients, doc.bidirected_cov))
        assert again.diagram == doc.diagram
        assert again.coefficients == doc.coefficients
        assert again.bidirected_cov == doc.bidirected_cov

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_graphs(self, seed):
        rng = np.random.default_rng(seed)
        g = random_dag(rng, int(rng.integers(1, 10)), 0.4, latent_frac=0.3, bidirected_prob=0.2)
        assert parse_graph(format_graph(g)).diagram == g

    def test_sem_values_exact(self):
        rng = np.random.default_rng(3)
        g = random_dag(rng, 6, 0.5, bidirected_prob=0.2)
        m = random_sem(g, rng)
        doc = parse_graph(format_sem(m))
        assert doc.coefficients == m.coefficients
        assert doc.bidirected_cov == {e: m.error_cov[e] for e in g.bidirected}


class TestCovarianceDocument:
    def test_lossless(self, observed_cov, tmp_path):
        cov = observed_cov["C"]
        path = tmp_path / "c.json"
        save_covariance(cov, path)
        back = load_covariance(path)
        assert back.labels == cov.labels
        np.testing.assert_array_equal(back.matrix, cov.matrix)

    def test_is_json(self, observed_cov):
        doc = json.loads(dumps_covariance(observed_cov["A"]))
        assert set(doc) == {"labels", "matrix"}

    @pytest.mark.parametrize(
        "text",
        [
            "not json",
            "[]",
            '{"labels": ["a"]}',
            '{"labels": ["a", "a"], "matrix": [[1, 0], [0, 1]]}',
            '{"labels": ["a", "b"], "matrix": [[1, 0]]}',
            '{"labels": ["a", "b"], "matrix": [[1, 0.5], [0.2, 1]]}',
            '{"labels": ["a"], "matrix": [["x"]]}',
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            loads_covariance(text)

    def test_seventeen_digits(self):
        cov = LabeledCovariance(("a", "b"), [[1.0, 0.1 + 0.2], [0.1 + 0.2, 1.0]])
        assert "0.30000000000000004" in dumps_covariance(cov)
