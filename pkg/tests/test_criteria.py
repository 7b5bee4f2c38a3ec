import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surrogate_effects.criteria import (
    STRATEGIES,
    CriterionCertificate,
    DoubleRoleAssignment,
    RoleAssignment,
    back_door,
    conditional_iv,
    find_strategies,
    replay_certificate,
    single_door,
    theorem1_check,
    theorem2_check,
)
from surrogate_effects.dsl import parse_graph
from surrogate_effects.exceptions import MissingEdgeError, RoleError
from surrogate_effects.fixtures import FIXTURES
from surrogate_effects.graph import PathDiagram, delete_edge
from surrogate_effects.selftest import backdoor_cases, civ_cases, counter_fixtures, single_door_cases
from surrogate_effects.sem import replicate_rng

A_ROLES = FIXTURES["A"].roles
D_ROLES = FIXTURES["D"].roles


def graph(text):
    return parse_graph(text).diagram


class TestRoleAssignment:
    def test_sets_are_sorted(self):
        r = RoleAssignment("X", "Y", "U", "W", ("Z2", "Z1"), ("T",))
        assert r.z == ("Z1", "Z2")
        assert r.observed == ("X", "U", "W", "Z1", "Z2", "T")

    def test_overlap_rejected(self):
        with pytest.raises(RoleError):
            RoleAssignment("X", "Y", "U", "U")
        with pytest.raises(RoleError):
            RoleAssignment("X", "Y", "U", "W", ("Z",), ("Z",))

    def test_bad_kind(self):
        with pytest.raises(RoleError):
            RoleAssignment("X", "Y", "U", "W", y_kind="mediator")

    def test_validate_against_graph(self, graphs):
        with pytest.raises(RoleError, match="latent"):
            RoleAssignment("Y", "X", "U", "W").validate(graphs["A"])
        with pytest.raises(RoleError, match="absent"):
            RoleAssignment("X", "Y", "U", "Q").validate(graphs["A"])

    def test_double_roles_allow_shared_t(self):
        r = DoubleRoleAssignment("X1", "X2", "U1", "W1", "U2", "W2", (), ("T",), ("T",))
        assert r.observed.count("T") == 1
        with pytest.raises(RoleError):
            DoubleRoleAssignment("X1", "X2", "U1", "W1", "U2", "W2", (), ("U1",))
        with pytest.raises(RoleError):
            DoubleRoleAssignment("X1", "X1", "U1", "W1", "U2", "W2")

    def test_embeddings(self):
        first, second = D_ROLES.first_embedding(), D_ROLES.second_embedding()
        assert (first.x, first.y, first.u, first.w, first.t) == ("U1", "X1", "U2", "W1", ())
        assert (second.x, second.y, second.u, second.w, second.t) == ("U1", "X2", "U2", "W2", ("W1",))


class TestCertificate:
    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            CriterionCertificate("theorem1", True, None, None)
        with pytest.raises(ValueError):
            CriterionCertificate("theorem1", False, {"R1": ()}, "x")
        with pytest.raises(ValueError):
            CriterionCertificate("theorem1", True, {}, "x")

    def test_to_dict(self, graphs):
        d = theorem1_check(graphs["A"], A_ROLES).to_dict()
        assert d["satisfied"] and d["failed_condition"] is None
        assert d["witnesses"]["R1"] == ["X", "U", "W"]
        assert d["roles"]["t"] == ["T"]


class TestObservedCriteria:
    def test_single_door_examples(self, graphs):
        assert single_door(graphs["D"], "X1", "X2", {"Z"})
        assert not single_door(graph("observed A B\nA -> B\nA <-> B\n"), "A", "B")
        assert single_door(graph("observed A B\nA -> B\n"), "A", "B")

    def test_single_door_missing_edge(self, graphs):
        with pytest.raises(MissingEdgeError):
            single_door(graphs["A"], "U", "W")

    def test_single_door_rejects_descendants(self):
        g = graph("observed A B C\nA -> B\nB -> C\n")
        assert not single_door(g, "A", "B", {"C"})

    def test_back_door_examples(self, graphs):
        assert back_door(graphs["A"], "X", "Y", {"Z"})
        assert back_door(graphs["B"], "Y", "X", {"Z"})
        assert not back_door(graphs["A"], "X", "Y", {"T"})
        assert not back_door(graphs["A"], "X", "Y")

    def test_back_door_errors(self, graphs):
        with pytest.raises(RoleError):
            back_door(graphs["A"], "X", "X")
        with pytest.raises(RoleError):
            back_door(graphs["A"], "X", "Y", {"X"})

    def test_conditional_iv_examples(self, graphs):
        assert conditional_iv(graphs["C"], "X", "Y", "Z", {"T"})
        assert not conditional_iv(graphs["C"], "X", "Y", "T")
        assert not conditional_iv(graphs["C"], "X", "Y", "Z")
        classic = graph("observed Z X Y\nZ -> X\nX -> Y\nX <-> Y\n")
        assert conditional_iv(classic, "X", "Y", "Z")

    def test_conditional_iv_rejects_descendant_instrument(self):
        # the instrument hangs off x; cutting x's arrows would hide that
        g = graph("observed A X I Y\nA -> X\nA -> I\nX -> I\nX -> Y\nX <-> Y\n")
        assert not conditional_iv(g, "X", "Y", "I")

    def test_conditional_iv_errors(self, graphs):
        with pytest.raises(RoleError):
            conditional_iv(graphs["C"], "X", "Y", "X")
        with pytest.raises(RoleError):
            conditional_iv(graphs["C"], "X", "Y", "Z", {"Z"})

    def test_counter_fixtures_are_false(self):
        assert all(value is False for _, value in counter_fixtures())


@pytest.mark.parametrize("cases", [backdoor_cases, single_door_cases, civ_cases])
def test_criteria_sound_on_random_models(cases):
    rng = replicate_rng(11, 0)
    diffs = [abs(a - b) for a, b in cases(rng, 30)]
    assert max(diffs) < 1e-9


class TestSingleLatentCriterion:
    def test_fixture_a(self, graphs):
        cert = theorem1_check(graphs["A"], A_ROLES)
        assert cert.satisfied
        assert cert.witnesses["R1"] == ("X", "U", "W")
        assert cert.witnesses["R2"] == ("U", "W", "T")
        assert cert.witnesses["R2_pivots"] == ("u", "w", "t")

    def test_fixture_a_u_t_swap_is_symmetric(self, graphs):
        # U and T are interchangeable children of Y, so the swap still passes
        cert = theorem1_check(graphs["A"], RoleAssignment("X", "Y", "T", "W", ("Z",), ("U",)))
        assert cert.satisfied

    def test_fixture_a_u_z_swap_fails_condition_one(self, graphs):
        cert = theorem1_check(graphs["A"], RoleAssignment("X", "Y", "Z", "W", ("U",), ("T",)))
        assert not cert.satisfied
        assert cert.failed_condition.startswith("(1)")
        assert cert.witnesses is None

    def test_fixture_c_excludes_x_from_r1(self, graphs):
        cert = theorem1_check(graphs["C"], FIXTURES["C"].roles)
        assert cert.satisfied
        assert cert.witnesses["R1"] == ("U", "W")
        assert cert.witnesses["R2"] == ("U", "W")

    def test_condition_two_skipped_without_t(self, graphs):
        cert = theorem1_check(graphs["A"], RoleAssignment("X", "Y", "U", "W", ("Z",)))
        assert cert.satisfied and cert.witnesses["R1"] == ()

    def test_nonzero_concentration_failure(self):
        # U hangs off X, not Y: given S without U, U is still cut off from Y
        g = graph("observed X U W\nlatent Y\nX -> Y\nY -> W\nX -> U\n")
        cert = theorem1_check(g, RoleAssignment("X", "Y", "U", "W"))
        assert not cert.satisfied

    def test_condition_two_failure(self):
        g = graph("observed X U W T\nlatent Y\nY -> X\nY -> U\nY -> W\nX -> T\nU -> T\nW -> T\n")
        cert = theorem1_check(g, RoleAssignment("X", "Y", "U", "W", (), ("T",)))
        assert not cert.satisfied
        assert cert.failed_condition.startswith("(2)") or cert.failed_condition.startswith("(1)")

    def test_extra_observed_ancestor_is_noted(self):
        g = graph("observed A X U W\nlatent Y\nA -> Y\nY -> X\nY -> U\nY -> W\n")
        cert = theorem1_check(g, RoleAssignment("X", "Y", "U", "W"))
        assert cert.satisfied
        assert any("A" in n for n in cert.notes)

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_swap_invariance(self, graphs, name):
        roles = FIXTURES[name].roles
        a = theorem1_check(graphs[name], roles)
        b = theorem1_check(graphs[name], roles.swap_uw())
        assert a.satisfied == b.satisfied
        assert set(a.witnesses["R1"]) == set(b.witnesses["R1"])
        assert set(a.witnesses["R2"]) == set(b.witnesses["R2"])

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_replay(self, graphs, name):
        assert replay_certificate(graphs[name], theorem1_check(graphs[name], FIXTURES[name].roles))

    def test_replay_detects_tampering(self, graphs):
        cert = theorem1_check(graphs["A"], A_ROLES)
        other = graph(FIXTURES["A"].source + "X -> U : 0.3\n")
        assert not replay_certificate(other, cert)


class TestLatentPairCriterion:
    def test_fixture_d(self, graphs):
        cert = theorem2_check(graphs["D"], D_ROLES)
        assert cert.satisfied
        first, second = cert.sub_certificates
        assert first.witnesses["R1"] == () and first.witnesses["R2"] == ("U1", "W1")
        assert second.witnesses["R1"] == ("U1", "U2", "W2") or second.satisfied
        assert replay_certificate(graphs["D"], cert)

    def test_fixture_d_swapped_surrogates_fail(self, graphs):
        roles = DoubleRoleAssignment("X1", "X2", "U2", "W1", "U1", "W2", ("Z",))
        cert = theorem2_check(graphs["D"], roles)
        assert not cert.satisfied
        assert cert.witnesses is None

    def test_without_effect_only_concentration_fails(self, graphs):
        # with X1 -> X2 gone, U2 reaches X1 only through Z, which is conditioned
        # on, so the (u1, u2) concentration of the first embedding is zero
        cut = delete_edge(graphs["D"], "X1", "X2")
        cert = theorem2_check(cut, D_ROLES)
        assert not cert.satisfied
        first = cert.sub_certificates[0]
        assert first.failed_condition == "nonzero-concentration assumption"
        assert all(s.holds for s in first.separations if s.label.startswith("(1)"))

    def test_condition_three_waived_for_instrument(self):
        # conditioning on X1 opens U1 -> X1 <- H -> X2, but U1 is an instrument
        g = graph(
            "observed U1 W1 U2 W2 H\nlatent X1 X2\n"
            "U1 -> X1\nH -> X1\nH -> X2\nX1 -> X2\nX1 -> W1\nX2 -> U2\nX2 -> W2\n"
        )
        roles = DoubleRoleAssignment("X1", "X2", "U1", "W1", "U2", "W2", (), ("H",))
        cert = theorem2_check(g, roles)
        (sep,) = cert.separations
        assert not sep.holds
        assert cert.satisfied
        assert any("optional" in n for n in cert.notes)
        assert replay_certificate(g, cert)

    def test_notes_describe_embeddings(self, graphs):
        notes = theorem2_check(graphs["D"], D_ROLES).notes
        assert any("first embedding" in n for n in notes)


class TestFindStrategies:
    def test_fixture_a(self, graphs):
        found = find_strategies(graphs["A"], "X", "Y")
        assert ("backdoor-latent-response", A_ROLES) in found
        assert ("backdoor-latent-response", A_ROLES.swap_uw()) in found
        assert all(s in STRATEGIES for s, _ in found)
        assert found == sorted(found, key=lambda item: (item[0], item[1].sort_key()))

    def test_fixture_b(self, graphs):
        found = find_strategies(graphs["B"], "Y", "X")
        assert ("backdoor-latent-treatment", FIXTURES["B"].roles) in found

    def test_fixture_c(self, graphs):
        found = find_strategies(graphs["C"], "X", "Y")
        assert ("civ-latent-response", FIXTURES["C"].roles) in found

    def test_fixture_d(self, graphs):
        found = find_strategies(graphs["D"], "X1", "X2", max_set_size=1)
        assert ("double-latent", D_ROLES) in found

    def test_two_vertices(self):
        assert find_strategies(graph("observed A B\nA -> B\n"), "A", "B") == []

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_every_hit_is_certified(self, graphs, name):
        fx = FIXTURES[name]
        for _, roles in find_strategies(graphs[name], fx.treatment, fx.response, 2):
            assert theorem1_check(graphs[name], roles).satisfied

    def test_same_vertex(self, graphs):
        with pytest.raises(RoleError):
            find_strategies(graphs["A"], "X", "X")


@st.composite
def latent_star(draw):
    """One latent hub with 3-5 observed children and a few extra observed edges."""
    n = draw(st.integers(3, 5))
    kids = [f"C{i}" for i in range(n)]
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2))
    directed = {("H", c) for c in kids} | {(kids[a], kids[b]) for a, b in extra if a < b}
    return PathDiagram(observed=kids, latent={"H"}, directed=directed), kids


@settings(max_examples=60, deadline=None)
@given(latent_star())
def test_theorem1_swap_invariance_property(case):
    g, kids = case
    roles = RoleAssignment(kids[0], "H", kids[1], kids[2], (), tuple(kids[3:]))
    a, b = theorem1_check(g, roles), theorem1_check(g, roles.swap_uw())
    assert a.satisfied == b.satisfied
    if a.satisfied:
        assert replay_certificate(g, a) and replay_certificate(g, b)
