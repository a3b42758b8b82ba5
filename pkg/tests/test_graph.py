"""Graph construction from directory and email events."""

from __future__ import annotations

import random
from datetime import datetime

import numpy as np
import pytest

from insiderank.features import ATTRIBUTE_NAMES
from insiderank.graph import (
    AttributedGraph,
    build_graph,
    degree_profile,
    load_graph,
    write_edges_csv,
)
from insiderank.features import write_nodes_csv
from insiderank.ingest import EmailPayload, LogEvent, OrgDirectory, RejectReport, UserRecord


def _directory():
    def rec(uid, name, sup=None):
        return UserRecord(uid, name, f"{uid.lower()}@dtaa.com", "R", "F", "D", "T", sup)

    return OrgDirectory(
        {
            "UA": rec("UA", "Ann Apple"),
            "UB": rec("UB", "Bo Berry", "UA"),
            "UC": rec("UC", "Cy Cedar"),
        }
    )


def _email(sender, to=(), cc=(), bcc=(), eid="e", user="UB"):
    return LogEvent(
        eid,
        datetime(2010, 1, 4, 10, 0),
        user,
        "PC-1",
        "email",
        EmailPayload(sender, tuple(to), tuple(cc), tuple(bcc), 100, 0),
    )


def _attrs(n, d=3):
    return np.zeros((n, d)), [f"a{i}" for i in range(d)]


def test_hierarchy_and_email_edges():
    directory = _directory()
    attrs, names = _attrs(3)
    events = [_email("ub@dtaa.com", to=("uc@dtaa.com",))]
    g = build_graph(directory, events, attrs, names)
    assert g.user_ids == ("UA", "UB", "UC")
    named = {tuple(sorted((g.user_ids[u], g.user_ids[v]))) for u, v in g.edges}
    assert named == {("UA", "UB"), ("UB", "UC")}


def test_self_email_adds_no_edge():
    directory = _directory()
    attrs, names = _attrs(3)
    g = build_graph(directory, [_email("ub@dtaa.com", to=("ub@dtaa.com",))], attrs, names)
    named = {tuple(sorted((g.user_ids[u], g.user_ids[v]))) for u, v in g.edges}
    assert named == {("UA", "UB")}  # hierarchy only


def test_external_recipients_create_nothing():
    directory = _directory()
    attrs, names = _attrs(3)
    g = build_graph(
        directory,
        [_email("ub@dtaa.com", to=("friend@gmail.com",), cc=("spam@evil.org",))],
        attrs,
        names,
    )
    assert g.n_vertices == 3  # vertices are directory users only, all of them
    named = {tuple(sorted((g.user_ids[u], g.user_ids[v]))) for u, v in g.edges}
    assert named == {("UA", "UB")}


def test_unresolvable_internal_address_rejects_whole_email():
    directory = _directory()
    attrs, names = _attrs(3)
    rejects = RejectReport()
    events = [
        _email("ub@dtaa.com", to=("uc@dtaa.com", "ghost@dtaa.com"), eid="bad"),
        _email("ub@dtaa.com", to=("ua@dtaa.com",), eid="good"),
    ]
    g = build_graph(directory, events, attrs, names, rejects=rejects)
    named = {tuple(sorted((g.user_ids[u], g.user_ids[v]))) for u, v in g.edges}
    # The UC edge from the first email must not appear: that email is skipped.
    assert named == {("UA", "UB")}
    assert len(rejects) == 1
    assert "ghost@dtaa.com" in rejects.rows[0][2]


def test_external_sender_builds_no_edges_and_no_reject():
    directory = _directory()
    attrs, names = _attrs(3)
    rejects = RejectReport()
    g = build_graph(
        directory,
        [_email("outside@partner.com", to=("ua@dtaa.com", "uc@dtaa.com"))],
        attrs,
        names,
        rejects=rejects,
    )
    named = {tuple(sorted((g.user_ids[u], g.user_ids[v]))) for u, v in g.edges}
    assert named == {("UA", "UB")}
    assert len(rejects) == 0


def test_subdomain_addresses_count_as_internal():
    directory = _directory()
    attrs, names = _attrs(3)
    rejects = RejectReport()
    build_graph(
        directory,
        [_email("ub@dtaa.com", to=("nobody@mail.dtaa.com",))],
        attrs,
        names,
        rejects=rejects,
    )
    assert len(rejects) == 1  # internal-domain address, but no such user


def test_duplicate_links_collapse():
    directory = _directory()
    attrs, names = _attrs(3)
    events = [
        _email("ub@dtaa.com", to=("uc@dtaa.com",), cc=("uc@dtaa.com",), bcc=("uc@dtaa.com",)),
        _email("uc@dtaa.com", to=("ub@dtaa.com",), user="UC"),
    ]
    g = build_graph(directory, events, attrs, names)
    assert g.n_edges == 2  # {UA,UB} and {UB,UC} exactly once


def test_event_order_does_not_change_the_graph():
    directory = _directory()
    attrs, names = _attrs(3)
    events = [
        _email("ub@dtaa.com", to=("uc@dtaa.com",), eid="1"),
        _email("ua@dtaa.com", to=("ub@dtaa.com", "uc@dtaa.com"), eid="2", user="UA"),
        _email("uc@dtaa.com", to=("ua@dtaa.com",), eid="3", user="UC"),
    ]
    g1 = build_graph(directory, events, attrs, names)
    rng = random.Random(5)
    for _ in range(5):
        shuffled = events[:]
        rng.shuffle(shuffled)
        g2 = build_graph(directory, shuffled, attrs, names)
        assert g2.edges == g1.edges


def test_constructor_rejects_self_loops_and_bad_shapes():
    with pytest.raises(ValueError):
        AttributedGraph(["a", "b"], [(0, 0)], np.zeros((2, 1)), ["x"])
    with pytest.raises(ValueError):
        AttributedGraph(["a", "b"], [(0, 1)], np.zeros((3, 1)), ["x"])
    with pytest.raises(ValueError):
        AttributedGraph(["a", "a"], [], np.zeros((2, 1)), ["x"])
    with pytest.raises(ValueError):
        AttributedGraph(["a", "b"], [(0, 2)], np.zeros((2, 1)), ["x"])


def test_handshake_lemma_on_random_graphs():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(2, 25))
        p = float(rng.uniform(0.05, 0.7))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        g = AttributedGraph([f"U{i:03d}" for i in range(n)], edges, np.zeros((n, 2)), ["a", "b"])
        assert int(g.degrees().sum()) == 2 * g.n_edges
        m = g.adjacency_matrix()
        assert np.array_equal(m, m.T)
        assert not m.diagonal().any()


def test_degree_profile():
    g = AttributedGraph(["a", "b", "c"], [(0, 1), (1, 2)], np.zeros((3, 1)), ["x"])
    profile = degree_profile(g)
    assert profile["n_vertices"] == 3
    assert profile["n_edges"] == 2
    assert profile["degree_max"] == 2
    assert profile["degree_min"] == 1


def test_edges_csv_round_trip_and_ordering(tmp_path):
    directory = _directory()
    attrs, names = _attrs(3)
    events = [_email("ub@dtaa.com", to=("uc@dtaa.com",))]
    g = build_graph(directory, events, attrs, names)

    nodes_path = tmp_path / "nodes.norm.csv"
    edges_path = tmp_path / "edges.csv"
    write_nodes_csv(nodes_path, list(g.user_ids), g.attributes, names)
    write_edges_csv(edges_path, g)

    text = edges_path.read_text().splitlines()
    assert text[0] == "src,dst"
    for line in text[1:]:
        src, dst = line.split(",")
        assert src < dst  # lexicographic orientation

    g2 = load_graph(nodes_path, edges_path)
    assert g2.user_ids == g.user_ids
    assert g2.edges == g.edges
    assert np.array_equal(g2.attributes, g.attributes)
