import json
from importlib import resources

import jsonschema
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pidcoll.errors import CycleDetected, MalformedPid, MalformedRecord
from pidcoll.model import (
    NON_MEMBERSHIP,
    NodeKind,
    ObjectGraph,
    ObjectNode,
    Pid,
    ProvenanceBlock,
    ProvenanceEdge,
    Relation,
    reachable,
    topological_order,
    validate_graph,
)


def P(s):
    return Pid("20.5000", s)


def graph(nodes, edges, roots=()):
    return ObjectGraph(
        tuple(ObjectNode(P(n), k, t) for n, k, t in nodes),
        tuple(ProvenanceEdge(P(a), Relation.parse(r), P(b)) for a, r, b in edges),
        tuple(P(r) for r in roots),
    )


C, M = NodeKind.COLLECTION, NodeKind.MEMBER


def test_pid_forms():
    p = Pid.parse("hdl:20.5000/abc")
    assert p == Pid.parse("20.5000/abc") == Pid("20.5000", "abc")
    assert p.ref == "hdl:20.5000/abc"
    assert str(p) == "20.5000/abc"
    for bad in ("", "noslash", "/x", "20.5000/", "hdl:", "a b/c"):
        with pytest.raises(MalformedPid):
            Pid.parse(bad)


def test_relation_aliases():
    assert Relation.parse("wasDerviedFrom") is Relation.WAS_DERIVED_FROM
    assert Relation.parse("wasQutoedFrom") is Relation.WAS_QUOTED_FROM
    assert Relation.parse("hasMember") is Relation.HAD_MEMBER
    assert len(NON_MEMBERSHIP) == 6 and Relation.HAD_MEMBER not in NON_MEMBERSHIP
    with pytest.raises(ValueError):
        Relation.parse("wasInformedBy")


refs = st.text(alphabet="abcdef0123", min_size=1, max_size=6).map(lambda s: f"hdl:20.5000/{s}")
blocks = st.dictionaries(st.sampled_from(list(Relation)), st.lists(refs, max_size=3, unique=True))


@given(blocks)
def test_provenance_block_round_trip(mapping):
    b = ProvenanceBlock.of(mapping)
    assert ProvenanceBlock.from_wire(json.loads(json.dumps(b.to_wire()))) == b
    # empties are dropped, so an all-empty mapping is the empty block
    assert b.is_empty == (not any(mapping.values()))
    assert sorted(b.targets()) == sorted((r, t) for r, ts in mapping.items() for t in ts)
    schema = json.loads(resources.files("pidcoll").joinpath("data/provenance_block.schema.json").read_text())
    jsonschema.validate(b.to_wire(), schema)


def test_provenance_block_rejects_bad_wire():
    with pytest.raises(MalformedRecord):
        ProvenanceBlock.from_wire({"wasDerivedFrom": "x"})
    with pytest.raises(MalformedRecord):
        ProvenanceBlock.from_wire([])
    with pytest.raises(MalformedRecord):
        ProvenanceBlock.of({"wasDerivedFrom": ["hdl:1/a", "hdl:1/a"]})


def test_empty_graph_valid():
    assert validate_graph(ObjectGraph((), (), ())).ok


def test_two_nodes_respecting_timeliness():
    g = graph([("a", M, 1), ("b", M, 0)], [("a", "wasRevisionOf", "b")])
    assert validate_graph(g).ok


def test_violations_reported():
    g = graph(
        [("a", M, 0), ("b", M, 1), ("c", C, 2)],
        [("a", "wasDerivedFrom", "b"), ("b", "wasDerivedFrom", "a"), ("a", "hadMember", "b"),
         ("c", "alternateOf", "zz"), ("c", "alternateOf", "c")],
        roots=["nope"],
    )
    r = validate_graph(g)
    kinds = {v.kind for v in r.violations}
    assert {"cycle", "timeliness", "membership-endpoint", "dangling", "self-loop", "dangling-root"} <= kinds


def test_topological_order_targets_first():
    g = graph([("a", M, 2), ("b", M, 1), ("c", M, 0)], [("a", "wasDerivedFrom", "b"), ("b", "wasDerivedFrom", "c")])
    assert topological_order(g) == [P("c"), P("b"), P("a")]
    cyc = graph([("a", M, 0), ("b", M, 0)], [("a", "wasDerivedFrom", "b"), ("b", "wasDerivedFrom", "a")])
    with pytest.raises(CycleDetected):
        topological_order(cyc)


def test_reachable_and_json_round_trip():
    g = graph([("a", C, 3), ("b", M, 1), ("x", M, 0)], [("a", "hadMember", "b")], roots=["a"])
    assert reachable(g) == {P("a"), P("b")}
    again = ObjectGraph.loads(g.dumps())
    assert again == g
    schema = json.loads(resources.files("pidcoll").joinpath("data/graph.schema.json").read_text())
    jsonschema.validate(g.to_json(), schema)
