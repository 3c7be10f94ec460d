"""Shared fixtures and random-instance generators for the test suite."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from graphscout.query import IndicatorRequirement, Mode, QueryGraph
from graphscout.store import (
    Edge,
    EdgeKind,
    KnowledgeGraph,
    Node,
    NodeKind,
    date_to_days,
    parse_iso_date,
)
from graphscout.taxonomy import IndicatorTaxonomy

FIXTURES = Path(__file__).parent / "fixtures"

FIG3_DSL = (FIXTURES / "query.dsl").read_text(encoding="utf-8")


# -- gradient checking -------------------------------------------------------

def numeric_grad(net, loss_fn, eps: float = 1e-5):
    """Central finite differences of loss_fn over net's flat parameters.

    The step sits near the float64 optimum (~cbrt(machine eps)); smaller
    steps let roundoff dominate and inflate the comparison error.
    """
    import numpy as np

    base = net.get_flat()
    grad = np.zeros_like(base)
    for i in range(base.size):
        probe = base.copy()
        probe[i] = base[i] + eps
        net.set_flat(probe)
        hi = loss_fn()
        probe[i] = base[i] - eps
        net.set_flat(probe)
        lo = loss_fn()
        grad[i] = (hi - lo) / (2 * eps)
    net.set_flat(base)
    return grad


def flatten_grads(gw, gb):
    """Pack per-layer gradients in Mlp.get_flat order: weights, then biases."""
    import numpy as np

    parts = [np.asarray(w).ravel() for w in gw]
    parts += [np.asarray(b).ravel() for b in gb]
    return np.concatenate(parts)


def relative_error(a, b) -> float:
    import numpy as np

    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / scale))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def tax() -> IndicatorTaxonomy:
    return IndicatorTaxonomy.default()


def build_scenario_graph() -> KnowledgeGraph:
    """Hand-built graph: p1 holds 4/4 query categories, p2 3/4, p3 2/4.

    All of p1..p3 satisfy both the country gate (Freedonia) and the
    organization gate (Crimson Syndicate). p4 holds 4/4 but lives in the
    wrong country; p5 holds nothing. KNOWS chain p2-p3-p5.
    """
    g = KnowledgeGraph(IndicatorTaxonomy.default())
    for cid, cat in (("i1", "C1"), ("i2", "C2"), ("i3", "C3"), ("i4", "C4")):
        g.add_node(Node(cid, NodeKind.INDICATOR, {"category": cat}))
    for pid, name in (
        ("p1", "Avery Stone"),
        ("p2", "Brook Hale"),
        ("p3", "Casey Reed"),
        ("p4", "Drew Vale"),
        ("p5", "Ellis Frost"),
    ):
        g.add_node(Node(pid, NodeKind.PERSON, {"name": name}))
    g.add_node(Node("org1", NodeKind.ORGANIZATION, {"name": "Crimson Syndicate"}))
    g.add_node(Node("org2", NodeKind.ORGANIZATION, {"name": "Azure Circle"}))
    g.add_node(Node("co1", NodeKind.COUNTRY, {"name": "Freedonia"}))
    g.add_node(Node("co2", NodeKind.COUNTRY, {"name": "Borduria"}))
    holdings = {
        "p1": [("i1", "2014-03-01"), ("i2", "2014-06-15"), ("i3", "2014-09-20"), ("i4", "2015-01-05")],
        "p2": [("i1", "2014-02-10"), ("i2", "2014-07-01"), ("i3", "2015-02-14")],
        "p3": [("i1", "2014-05-05"), ("i2", "2014-11-11")],
        "p4": [("i1", "2015-03-03"), ("i2", "2015-04-04"), ("i3", "2015-05-05"), ("i4", "2015-06-06")],
    }
    for pid, events in holdings.items():
        for ind, ts in events:
            g.add_edge(Edge(pid, ind, EdgeKind.HAS_INDICATOR, date_to_days(parse_iso_date(ts))))
    for pid in ("p1", "p2", "p3", "p5"):
        g.add_edge(Edge(pid, "co1", EdgeKind.LOCATED_IN, None))
    g.add_edge(Edge("p4", "co2", EdgeKind.LOCATED_IN, None))
    for pid in ("p1", "p2", "p3", "p4", "p5"):
        g.add_edge(Edge(pid, "org1", EdgeKind.AFFILIATED_WITH, None))
    g.add_edge(Edge("p2", "p3", EdgeKind.KNOWS, None))
    g.add_edge(Edge("p3", "p5", EdgeKind.KNOWS, None))
    return g


@pytest.fixture()
def scenario_graph() -> KnowledgeGraph:
    return build_scenario_graph()


def scenario_query(mode: Mode = Mode.INDIVIDUAL, threshold: float = 0.7, radius: int = 1) -> QueryGraph:
    """The four-requirement, both-gates query the scenario graph is built for."""
    return QueryGraph(
        name="trajectory-scan",
        requirements=tuple(IndicatorRequirement(f"C{i}", 1.0) for i in range(1, 5)),
        country_filter="Freedonia",
        org_filter="Crimson Syndicate",
        threshold=threshold,
        mode=mode,
        radius=radius,
    )


# ---------------------------------------------------------------------------
# Random instance generators (shared by property tests and the acceptance run)
# ---------------------------------------------------------------------------

COUNTRY_NAMES = ("Freedonia", "Borduria", "Syldavia")
ORG_NAMES = ("Crimson Syndicate", "Azure Circle", "Obsidian Club")


def random_graph(rng: random.Random, max_persons: int = 50, n_categories: int = 15) -> KnowledgeGraph:
    """A random well-formed knowledge graph for oracle-equivalence testing.

    Includes repeated HAS_INDICATOR events, persons with zero/partial gate
    context, and a random KNOWS topology.
    """
    cats = [f"C{i}" for i in range(1, n_categories + 1)]
    g = KnowledgeGraph(IndicatorTaxonomy(tuple(cats)))
    for i, cat in enumerate(cats, start=1):
        g.add_node(Node(f"i{i}", NodeKind.INDICATOR, {"category": cat}))
    for i, name in enumerate(COUNTRY_NAMES, start=1):
        g.add_node(Node(f"co{i}", NodeKind.COUNTRY, {"name": name}))
    for i, name in enumerate(ORG_NAMES, start=1):
        g.add_node(Node(f"org{i}", NodeKind.ORGANIZATION, {"name": name}))
    n_persons = rng.randint(1, max_persons)
    person_ids = [f"p{i}" for i in range(1, n_persons + 1)]
    for pid in person_ids:
        g.add_node(Node(pid, NodeKind.PERSON, {"name": f"Person {pid}"}))
        for _ in range(rng.randint(0, 6)):
            ind = f"i{rng.randint(1, n_categories)}"
            ts = None if rng.random() < 0.2 else rng.randint(16000, 17000)
            g.add_edge(Edge(pid, ind, EdgeKind.HAS_INDICATOR, ts))
        for i in range(1, len(COUNTRY_NAMES) + 1):
            if rng.random() < 0.4:
                g.add_edge(Edge(pid, f"co{i}", EdgeKind.LOCATED_IN, None))
        for i in range(1, len(ORG_NAMES) + 1):
            if rng.random() < 0.4:
                g.add_edge(Edge(pid, f"org{i}", EdgeKind.AFFILIATED_WITH, None))
    for _ in range(int(1.5 * n_persons)):
        a, b = rng.choice(person_ids), rng.choice(person_ids)
        if a != b:
            g.add_edge(Edge(a, b, EdgeKind.KNOWS, None))
    return g


def random_query(rng: random.Random, n_categories: int = 15, mode: Mode | None = None) -> QueryGraph:
    """A random query over the same category/name space as random_graph."""
    n_req = rng.randint(1, 5)
    cats = rng.sample([f"C{i}" for i in range(1, n_categories + 1)], n_req)
    reqs = tuple(IndicatorRequirement(c, round(rng.uniform(0.1, 3.0), 2)) for c in cats)
    country = rng.choice((None, None, *COUNTRY_NAMES, "Atlantis"))
    org = rng.choice((None, None, *ORG_NAMES, "Phantom League"))
    if mode is None:
        mode = rng.choice((Mode.INDIVIDUAL, Mode.NEIGHBORHOOD))
    radius = 1 if mode is Mode.INDIVIDUAL else rng.randint(1, 3)
    return QueryGraph(
        name=f"rq{rng.randint(0, 999)}",
        requirements=reqs,
        country_filter=country,
        org_filter=org,
        threshold=round(rng.random(), 2),
        mode=mode,
        radius=radius,
    )
