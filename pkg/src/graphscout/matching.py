"""Inexact pattern matching of query graphs against knowledge networks.

A person (or a KNOWS-neighborhood of persons) is scored against a query's
weighted indicator requirements:

    S = sum(w_r for satisfied requirements r) / sum(all w_r)

Country and organization filters act as hard gates: a subject failing a
gate scores 0 regardless of its indicators. Neighborhood scoring uses
group coverage — a requirement counts as satisfied when any member of the
neighborhood holds it.

`brute_force_oracle` re-derives the same contract by plain exhaustive
scans with no shared traversal code, for verification.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass

from .query import Mode, QueryGraph
from .store import Edge, EdgeKind, KnowledgeGraph, NodeKind, days_to_date

DEFAULT_ORACLE_CAP = 200

GATE_COUNTRY = "country"
GATE_ORGANIZATION = "organization"


class MatchError(Exception):
    pass


class NotAPersonError(MatchError):
    pass


class GraphTooLargeError(MatchError):
    pass


@dataclass(frozen=True)
class RequirementMatch:
    """Per-requirement match record inside a result breakdown."""

    category: str
    weight: float
    matched: bool
    matched_by: str | None = None
    timestamp: dt.date | None = None


@dataclass(frozen=True)
class MatchResult:
    subject: tuple[str, ...]  # sorted member ids; a single id in individual mode
    seed: str
    score: float
    breakdown: tuple[RequirementMatch, ...]
    gate_failure: str | None = None


@dataclass(frozen=True)
class RankedResults:
    query: QueryGraph
    graph_version: int
    entries: tuple[MatchResult, ...]


def recompute_score(result: MatchResult) -> float:
    """Score implied by the breakdown; must equal result.score."""
    if result.gate_failure is not None:
        return 0.0
    total = sum(r.weight for r in result.breakdown)
    hit = sum(r.weight for r in result.breakdown if r.matched)
    return hit / total if total else 0.0


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def _require_person(g: KnowledgeGraph, node_id: str) -> None:
    node = g.node(node_id)
    if node.kind is not NodeKind.PERSON:
        raise NotAPersonError(f"{node_id!r} is a {node.kind.value}, not a Person")


def _passes_gates(g: KnowledgeGraph, q: QueryGraph, person: str) -> str | None:
    """None when both gates pass, else the name of the failed gate."""
    if q.country_filter is not None:
        if q.country_filter not in g.linked_names(person, EdgeKind.LOCATED_IN):
            return GATE_COUNTRY
    if q.org_filter is not None:
        if q.org_filter not in g.linked_names(person, EdgeKind.AFFILIATED_WITH):
            return GATE_ORGANIZATION
    return None


def _gated_zero(q: QueryGraph, subject: tuple[str, ...], seed: str, gate: str) -> MatchResult:
    breakdown = tuple(
        RequirementMatch(r.category, r.weight, matched=False) for r in q.requirements
    )
    return MatchResult(subject, seed, 0.0, breakdown, gate_failure=gate)


def _earliest(timestamps: list[int | None]) -> dt.date | None:
    known = [t for t in timestamps if t is not None]
    return days_to_date(min(known)) if known else None


def _coverage(q: QueryGraph, events_by_member: dict[str, dict[str, list[int | None]]]
              ) -> tuple[float, tuple[RequirementMatch, ...]]:
    """Weighted coverage of the requirements by a set of members."""
    members = sorted(events_by_member)
    rows = []
    hit = 0.0
    total = 0.0
    for req in q.requirements:
        total += req.weight
        holders = [m for m in members if req.category in events_by_member[m]]
        if holders:
            by = holders[0]  # lexicographically least matching member
            rows.append(RequirementMatch(
                req.category, req.weight, True, by,
                _earliest(events_by_member[by][req.category])))
            hit += req.weight
        else:
            rows.append(RequirementMatch(req.category, req.weight, False))
    score = hit / total if total else 0.0
    return score, tuple(rows)


def individual_similarity(g: KnowledgeGraph, q: QueryGraph, person: str) -> MatchResult:
    """Weighted requirement coverage of a single person, gated by filters."""
    _require_person(g, person)
    gate = _passes_gates(g, q, person)
    if gate is not None:
        return _gated_zero(q, (person,), person, gate)
    score, rows = _coverage(q, {person: g.indicator_events(person)})
    return MatchResult((person,), person, score, rows)


def neighborhood_similarity(g: KnowledgeGraph, q: QueryGraph, seed: str) -> MatchResult:
    """Group coverage over the seed's KNOWS-neighborhood within q.radius.

    Members failing a context gate are dropped from the group; a seed
    failing a gate zeroes the whole result. A requirement's matched_by is
    the lexicographically least member holding it.
    """
    _require_person(g, seed)
    gate = _passes_gates(g, q, seed)
    if gate is not None:
        return _gated_zero(q, (seed,), seed, gate)
    group = {seed} | g.neighbors(seed, EdgeKind.KNOWS, q.radius)
    members = sorted(m for m in group if _passes_gates(g, q, m) is None)
    score, rows = _coverage(q, {m: g.indicator_events(m) for m in members})
    return MatchResult(tuple(members), seed, score, rows)


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------

def _dedup_subsumed(entries: list[MatchResult]) -> list[MatchResult]:
    """Drop results whose member set is covered by a kept result.

    Input entries must already be sorted by (score desc, seed asc), so
    every kept result scores >= anything after it.
    """
    kept: list[MatchResult] = []
    for entry in entries:
        members = set(entry.subject)
        if any(members <= set(k.subject) for k in kept):
            continue
        kept.append(entry)
    return kept


def rank(g: KnowledgeGraph, q: QueryGraph,
         threshold: float | None = None) -> RankedResults:
    """Score every person (or seed neighborhood) and rank the survivors.

    Results are sorted by (score desc, seed id asc) and filtered at the
    query threshold (or the override). Neighborhood mode additionally
    drops groups subsumed by an equal-or-better kept group.
    """
    cut = q.threshold if threshold is None else threshold
    scored: list[MatchResult] = []
    for person in g.persons():
        if q.mode is Mode.NEIGHBORHOOD:
            result = neighborhood_similarity(g, q, person)
        else:
            result = individual_similarity(g, q, person)
        if result.score >= cut:
            scored.append(result)
    scored.sort(key=lambda r: (-r.score, r.seed))
    if q.mode is Mode.NEIGHBORHOOD:
        scored = _dedup_subsumed(scored)
    return RankedResults(q, g.version, tuple(scored))


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_oracle(g: KnowledgeGraph, q: QueryGraph,
                       threshold: float | None = None,
                       cap: int = DEFAULT_ORACLE_CAP) -> RankedResults:
    """Exhaustive re-evaluation of the matching contract from raw edges.

    Deliberately ignores the graph's adjacency indexes and the scoring
    helpers above: everything is recomputed from node/edge scans so the
    result can verify `rank`. Capped at `cap` persons.
    """
    persons = sorted(n.id for n in g.nodes() if n.kind is NodeKind.PERSON)
    if len(persons) > cap:
        raise GraphTooLargeError(f"{len(persons)} persons exceeds oracle cap {cap}")
    cut = q.threshold if threshold is None else threshold

    edges = list(g.edges())
    names = {n.id: n.attrs.get("name", n.id) for n in g.nodes()}
    category_of = {n.id: n.attrs.get("category", "") for n in g.nodes()
                   if n.kind is NodeKind.INDICATOR}

    held: dict[str, dict[str, list[int | None]]] = {p: {} for p in persons}
    located: dict[str, set[str]] = {p: set() for p in persons}
    affiliated: dict[str, set[str]] = {p: set() for p in persons}
    knows_pairs: list[tuple[str, str]] = []
    for e in edges:
        if e.kind is EdgeKind.HAS_INDICATOR:
            held[e.src].setdefault(category_of[e.dst], []).append(e.ts)
        elif e.kind is EdgeKind.LOCATED_IN:
            located[e.src].add(names[e.dst])
        elif e.kind is EdgeKind.AFFILIATED_WITH:
            affiliated[e.src].add(names[e.dst])
        elif e.kind is EdgeKind.KNOWS:
            knows_pairs.append((e.src, e.dst))

    def gate_of(p: str) -> str | None:
        if q.country_filter is not None and q.country_filter not in located[p]:
            return GATE_COUNTRY
        if q.org_filter is not None and q.org_filter not in affiliated[p]:
            return GATE_ORGANIZATION
        return None

    def reachable(seed: str) -> set[str]:
        group = {seed}
        for _ in range(q.radius):
            grown = set(group)
            for a, b in knows_pairs:
                if a in group:
                    grown.add(b)
                if b in group:
                    grown.add(a)
            if grown == group:
                break
            group = grown
        return group

    def evaluate(member_ids: list[str], seed: str, gate: str | None) -> MatchResult:
        if gate is not None:
            rows = tuple(RequirementMatch(r.category, r.weight, False)
                         for r in q.requirements)
            return MatchResult((seed,), seed, 0.0, rows, gate_failure=gate)
        rows = []
        hit = total = 0.0
        for req in q.requirements:
            total += req.weight
            holders = sorted(m for m in member_ids if req.category in held[m])
            if holders:
                stamps = [t for t in held[holders[0]][req.category] if t is not None]
                when = days_to_date(min(stamps)) if stamps else None
                rows.append(RequirementMatch(req.category, req.weight, True,
                                             holders[0], when))
                hit += req.weight
            else:
                rows.append(RequirementMatch(req.category, req.weight, False))
        score = hit / total if total else 0.0
        return MatchResult(tuple(sorted(member_ids)), seed, score, tuple(rows))

    results: list[MatchResult] = []
    for p in persons:
        if q.mode is Mode.NEIGHBORHOOD:
            gate = gate_of(p)
            if gate is not None:
                result = evaluate([p], p, gate)
            else:
                members = [m for m in reachable(p) if gate_of(m) is None]
                result = evaluate(members, p, None)
        else:
            result = evaluate([p], p, gate_of(p))
        if result.score >= cut:
            results.append(result)

    results.sort(key=lambda r: (-r.score, r.seed))
    if q.mode is Mode.NEIGHBORHOOD:
        deduped: list[MatchResult] = []
        for r in results:
            if not any(set(r.subject) <= set(k.subject) for k in deduped):
                deduped.append(r)
        results = deduped
    return RankedResults(q, g.version, tuple(results))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def match_result_to_dict(result: MatchResult) -> dict:
    return {
        "subject": list(result.subject),
        "seed": result.seed,
        "score": result.score,
        "gate_failure": result.gate_failure,
        "breakdown": [
            {
                "category": r.category,
                "weight": r.weight,
                "matched": r.matched,
                "matched_by": r.matched_by,
                "timestamp": r.timestamp.isoformat() if r.timestamp else None,
            }
            for r in result.breakdown
        ],
    }


def ranked_results_to_dict(ranked: RankedResults) -> dict:
    from .query import print_query  # local import keeps module deps one-way

    return {
        "graph_version": ranked.graph_version,
        "query": {
            "name": ranked.query.name,
            "threshold": ranked.query.threshold,
            "mode": ranked.query.mode.value,
            "radius": ranked.query.radius,
            "dsl": print_query(ranked.query),
        },
        "entries": [match_result_to_dict(r) for r in ranked.entries],
    }


def result_lines(ranked: RankedResults) -> list[str]:
    """One deterministic JSON record per result, scores at 6 decimals."""
    lines = []
    for result in ranked.entries:
        record = match_result_to_dict(result)
        record["score"] = f"{result.score:.6f}"
        lines.append(json.dumps(record, ensure_ascii=False, sort_keys=False))
    return lines


def result_table(ranked: RankedResults, limit: int | None = None) -> str:
    """Fixed-width summary table for terminal review."""
    entries = ranked.entries[:limit] if limit is not None else ranked.entries
    header = f"{'score':>8}  {'seed':<16} {'members':<28} matched"
    rows = [header, "-" * len(header)]
    for r in entries:
        matched = ", ".join(b.category for b in r.breakdown if b.matched) or "-"
        if r.gate_failure:
            matched = f"(gate: {r.gate_failure})"
        rows.append(f"{r.score:>8.4f}  {r.seed:<16} {','.join(r.subject):<28} {matched}")
    return "\n".join(rows)
