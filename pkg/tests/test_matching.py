"""Similarity scoring and ranking against the knowledge graph."""

from __future__ import annotations

import datetime as dt
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build_scenario_graph, random_graph, random_query, scenario_query
from graphscout.matching import (
    GraphTooLargeError,
    NotAPersonError,
    brute_force_oracle,
    individual_similarity,
    match_result_to_dict,
    neighborhood_similarity,
    rank,
    ranked_results_to_dict,
    recompute_score,
    result_lines,
    result_table,
)
from graphscout.query import IndicatorRequirement, Mode, QueryGraph
from graphscout.store import Edge, EdgeKind, KnowledgeGraph, Node, NodeKind
from graphscout.taxonomy import IndicatorTaxonomy


def query_of(categories, threshold=0.7, mode=Mode.INDIVIDUAL, radius=1,
             country=None, org=None, weights=None) -> QueryGraph:
    weights = weights or [1.0] * len(categories)
    return QueryGraph(
        name="t",
        requirements=tuple(IndicatorRequirement(c, w) for c, w in zip(categories, weights)),
        country_filter=country,
        org_filter=org,
        threshold=threshold,
        mode=mode,
        radius=radius,
    )


class TestIndividualSimilarity:
    def test_full_coverage(self, scenario_graph):
        q = scenario_query()
        assert individual_similarity(scenario_graph, q, "p1").score == 1.0

    def test_no_coverage(self, scenario_graph):
        q = scenario_query()
        assert individual_similarity(scenario_graph, q, "p5").score == 0.0

    def test_three_of_four_exceeds_default_threshold(self, scenario_graph):
        q = scenario_query()
        result = individual_similarity(scenario_graph, q, "p2")
        assert result.score == 0.75
        assert result.score > q.threshold

    def test_country_gate_fails_before_org(self, scenario_graph):
        # p4 is in the wrong country AND lacks the asked-for org: the
        # country gate is the one reported.
        q = query_of(["C1", "C2", "C3", "C4"], country="Freedonia", org="Azure Circle")
        result = individual_similarity(scenario_graph, q, "p4")
        assert result.score == 0.0
        assert result.gate_failure == "country"

    def test_org_gate(self, scenario_graph):
        q = query_of(["C1"], org="Azure Circle")
        result = individual_similarity(scenario_graph, q, "p1")
        assert result.score == 0.0
        assert result.gate_failure == "organization"

    def test_gate_failure_zeroes_full_holder(self, scenario_graph):
        # p4 holds all four categories; the gate still forces 0
        q = scenario_query()
        assert individual_similarity(scenario_graph, q, "p4").score == 0.0

    def test_breakdown_records_matched_by_and_earliest_timestamp(self, scenario_graph):
        q = scenario_query()
        result = individual_similarity(scenario_graph, q, "p2")
        by_cat = {m.category: m for m in result.breakdown}
        assert by_cat["C1"].matched_by == "p2"
        assert by_cat["C1"].timestamp == dt.date(2014, 2, 10)
        assert by_cat["C4"].matched is False
        assert by_cat["C4"].matched_by is None

    def test_untimestamped_edge_matches_with_no_timestamp(self):
        g = KnowledgeGraph()
        g.add_node(Node("p1", NodeKind.PERSON, {"name": "A"}))
        g.add_node(Node("i1", NodeKind.INDICATOR, {"category": "C1"}))
        g.add_edge(Edge("p1", "i1", EdgeKind.HAS_INDICATOR, None))
        result = individual_similarity(g, query_of(["C1"]), "p1")
        assert result.score == 1.0
        assert result.breakdown[0].timestamp is None

    def test_not_a_person(self, scenario_graph):
        with pytest.raises(NotAPersonError):
            individual_similarity(scenario_graph, scenario_query(), "i1")


class TestNeighborhoodSimilarity:
    def test_two_member_group_covers_jointly(self):
        g = KnowledgeGraph(IndicatorTaxonomy(("a", "b", "c", "d")))
        for pid in ("p1", "p2"):
            g.add_node(Node(pid, NodeKind.PERSON, {"name": pid}))
        for i, cat in enumerate(("a", "b", "c", "d"), start=1):
            g.add_node(Node(f"i{i}", NodeKind.INDICATOR, {"category": cat}))
        g.add_edge(Edge("p1", "i1", EdgeKind.HAS_INDICATOR, 100))
        g.add_edge(Edge("p1", "i2", EdgeKind.HAS_INDICATOR, 101))
        g.add_edge(Edge("p2", "i3", EdgeKind.HAS_INDICATOR, 102))
        g.add_edge(Edge("p2", "i4", EdgeKind.HAS_INDICATOR, 103))
        g.add_edge(Edge("p1", "p2", EdgeKind.KNOWS))
        q = query_of(["a", "b", "c", "d"], mode=Mode.NEIGHBORHOOD, radius=1)
        assert neighborhood_similarity(g, q, "p1").score == 1.0

    def test_singleton_equals_individual(self, scenario_graph):
        qn = scenario_query(mode=Mode.NEIGHBORHOOD)
        qi = scenario_query()
        assert (
            neighborhood_similarity(scenario_graph, qn, "p1").score
            == individual_similarity(scenario_graph, qi, "p1").score
        )

    def test_seed_failing_gate_scores_zero(self, scenario_graph):
        q = scenario_query(mode=Mode.NEIGHBORHOOD)
        result = neighborhood_similarity(scenario_graph, q, "p4")
        assert result.score == 0.0
        assert result.gate_failure == "country"

    def test_group_membership_and_shared_credit(self, scenario_graph):
        q = scenario_query(mode=Mode.NEIGHBORHOOD)
        result = neighborhood_similarity(scenario_graph, q, "p3")
        assert result.subject == ("p2", "p3", "p5")
        assert result.score == 0.75
        by_cat = {m.category: m for m in result.breakdown}
        # C1 held by p2 (2014-02-10) and p3 (2014-05-05): credited to the
        # lexicographically least holder, stamped with that holder's earliest edge
        assert by_cat["C1"].matched_by == "p2"
        assert by_cat["C1"].timestamp == dt.date(2014, 2, 10)


class TestRank:
    def test_threshold_zero_lists_every_person_once(self, scenario_graph):
        q = scenario_query(threshold=0.0)
        ranked = rank(scenario_graph, q, threshold=0.0)
        assert [e.seed for e in ranked.entries] == ["p1", "p2", "p3", "p4", "p5"]
        assert [e.score for e in ranked.entries] == [1.0, 0.75, 0.5, 0.0, 0.0]

    def test_scores_sorted_desc_then_seed(self, scenario_graph):
        ranked = rank(scenario_graph, scenario_query(), threshold=0.0)
        keys = [(-e.score, e.seed) for e in ranked.entries]
        assert keys == sorted(keys)

    def test_raising_threshold_yields_prefix(self, scenario_graph):
        q = scenario_query()
        low = rank(scenario_graph, q, threshold=0.5).entries
        high = rank(scenario_graph, q, threshold=0.7).entries
        assert list(high) == list(low)[: len(high)]

    def test_default_threshold_admits_exactly_two(self, scenario_graph):
        ranked = rank(scenario_graph, scenario_query())
        assert [(e.seed, e.score) for e in ranked.entries] == [("p1", 1.0), ("p2", 0.75)]

    def test_neighborhood_dedup_drops_subsumed_groups(self, scenario_graph):
        q = scenario_query(mode=Mode.NEIGHBORHOOD, threshold=0.0)
        ranked = rank(scenario_graph, q, threshold=0.0)
        subjects = [e.subject for e in ranked.entries]
        assert subjects == [("p1",), ("p2", "p3"), ("p2", "p3", "p5"), ("p4",)]
        # seed p5's group {p3,p5} is a subset of the kept {p2,p3,p5}

    def test_empty_graph(self):
        ranked = rank(KnowledgeGraph(), query_of(["C1"]), threshold=0.0)
        assert ranked.entries == ()

    def test_graph_version_recorded(self, scenario_graph):
        ranked = rank(scenario_graph, scenario_query())
        assert ranked.graph_version == scenario_graph.version

    def test_determinism_byte_for_byte(self, scenario_graph):
        q = scenario_query(mode=Mode.NEIGHBORHOOD)
        a = json.dumps(ranked_results_to_dict(rank(scenario_graph, q, 0.0)), sort_keys=True)
        b = json.dumps(ranked_results_to_dict(rank(scenario_graph.copy(), q, 0.0)), sort_keys=True)
        assert a == b


class TestOracle:
    def test_empty_graph(self):
        assert brute_force_oracle(KnowledgeGraph(), query_of(["C1"]), 0.0).entries == ()

    def test_single_match(self):
        g = KnowledgeGraph()
        g.add_node(Node("p1", NodeKind.PERSON, {"name": "A"}))
        g.add_node(Node("i1", NodeKind.INDICATOR, {"category": "C1"}))
        g.add_edge(Edge("p1", "i1", EdgeKind.HAS_INDICATOR, 16000))
        ranked = brute_force_oracle(g, query_of(["C1"]), 0.5)
        assert len(ranked.entries) == 1 and ranked.entries[0].score == 1.0

    def test_person_cap(self):
        g = KnowledgeGraph()
        for i in range(6):
            g.add_node(Node(f"p{i}", NodeKind.PERSON, {"name": str(i)}))
        with pytest.raises(GraphTooLargeError):
            brute_force_oracle(g, query_of(["C1"]), 0.0, cap=5)

    @given(st.integers(0, 10**9))
    @settings(max_examples=40, deadline=None)
    def test_rank_equals_oracle(self, seed):
        rng = random.Random(seed)
        g = random_graph(rng, max_persons=20)
        q = random_query(rng)
        assert rank(g, q, q.threshold) == brute_force_oracle(g, q, q.threshold)


class TestScoreInvariants:
    @given(st.integers(0, 10**9), st.floats(min_value=0.05, max_value=50, allow_nan=False))
    @settings(max_examples=60, deadline=None)
    def test_range_and_weight_rescaling(self, seed, scale):
        rng = random.Random(seed)
        g = random_graph(rng, max_persons=12)
        q = random_query(rng)
        scaled = QueryGraph(
            name=q.name,
            requirements=tuple(
                IndicatorRequirement(r.category, r.weight * scale) for r in q.requirements
            ),
            country_filter=q.country_filter,
            org_filter=q.org_filter,
            threshold=q.threshold,
            mode=q.mode,
            radius=q.radius,
        )
        for person in g.persons():
            base = (individual_similarity if q.mode is Mode.INDIVIDUAL else neighborhood_similarity)(g, q, person)
            assert 0.0 <= base.score <= 1.0
            rescaled = (individual_similarity if q.mode is Mode.INDIVIDUAL else neighborhood_similarity)(g, scaled, person)
            assert rescaled.score == pytest.approx(base.score, abs=1e-12)

    @given(st.integers(0, 10**9))
    @settings(max_examples=60, deadline=None)
    def test_adding_matching_edge_never_decreases_score(self, seed):
        rng = random.Random(seed)
        g = random_graph(rng, max_persons=10)
        q = random_query(rng, mode=Mode.INDIVIDUAL)
        persons = g.persons()
        if not persons:
            return
        person = rng.choice(persons)
        before = individual_similarity(g, q, person).score
        unmet = [m.category for m in individual_similarity(g, q, person).breakdown if not m.matched]
        if not unmet:
            return
        cat = rng.choice(unmet)
        idx = int(cat[1:])
        g.add_edge(Edge(person, f"i{idx}", EdgeKind.HAS_INDICATOR, 16500))
        after = individual_similarity(g, q, person).score
        assert after >= before

    @given(st.integers(0, 10**9))
    @settings(max_examples=60, deadline=None)
    def test_group_dominates_individual_when_gates_absent(self, seed):
        rng = random.Random(seed)
        g = random_graph(rng, max_persons=12)
        base = random_query(rng, mode=Mode.NEIGHBORHOOD)
        q = QueryGraph(
            name=base.name,
            requirements=base.requirements,
            country_filter=None,
            org_filter=None,
            threshold=base.threshold,
            mode=Mode.NEIGHBORHOOD,
            radius=base.radius,
        )
        qi = QueryGraph(
            name=base.name,
            requirements=base.requirements,
            country_filter=None,
            org_filter=None,
            threshold=base.threshold,
            mode=Mode.INDIVIDUAL,
            radius=1,
        )
        for person in g.persons():
            assert (
                neighborhood_similarity(g, q, person).score
                >= individual_similarity(g, qi, person).score
            )


class TestSerialization:
    def test_result_dict_shape(self, scenario_graph):
        result = individual_similarity(scenario_graph, scenario_query(), "p2")
        d = match_result_to_dict(result)
        assert d["subject"] == ["p2"] and d["seed"] == "p2" and d["score"] == 0.75
        assert {m["category"]: m["timestamp"] for m in d["breakdown"]}["C1"] == "2014-02-10"

    def test_recompute_score_round_trip(self, scenario_graph):
        result = individual_similarity(scenario_graph, scenario_query(), "p2")
        assert recompute_score(result) == pytest.approx(result.score)

    def test_text_renderings(self, scenario_graph):
        ranked = rank(scenario_graph, scenario_query(), 0.0)
        lines = result_lines(ranked)
        assert any("p1" in line for line in lines)
        table = result_table(ranked, limit=3)
        assert "p1" in table
