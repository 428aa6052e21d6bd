import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pidcoll.errors import InvalidParams
from pidcoll.graphgen import Case, GenParams, generate
from pidcoll.model import NodeKind, Relation, validate_graph

from oracle import reachable_nodes


def test_deterministic_for_equal_params():
    p = GenParams(Case.G4, 30, seed=7)
    assert generate(p) == generate(p)
    assert generate(p) != generate(p.with_(seed=8))


def test_g1_is_a_chain_of_collections():
    g = generate(GenParams(Case.G1, 10, members_per_collection=4))
    assert len(g.collections) == 10 and len(g.members) == 40
    backbone = g.backbone_edges
    assert len(backbone) == 9
    assert all(g.node(e.src).kind is NodeKind.COLLECTION and g.node(e.dst).kind is NodeKind.COLLECTION for e in backbone)
    assert len(g.roots) == 1
    assert reachable_nodes(g) == {n.pid for n in g.nodes}


@pytest.mark.parametrize("case", [Case.G2, Case.G3])
def test_collection_backbone_between_collections(case):
    g = generate(GenParams(case, 40, seed=3))
    for e in g.backbone_edges:
        if g.node(e.src).kind is NodeKind.COLLECTION:
            assert g.node(e.dst).kind is NodeKind.COLLECTION
    members_with_backbone = {e.src for e in g.backbone_edges if g.node(e.src).kind is NodeKind.MEMBER}
    if case is Case.G2:
        assert not members_with_backbone
    else:
        assert members_with_backbone
        assert all(g.node(e.dst).kind is NodeKind.MEMBER for e in g.backbone_edges if e.src in members_with_backbone)


def test_g4_mixes_levels_and_avoids_own_members():
    g = generate(GenParams(Case.G4, 60, seed=5))
    kinds = {(g.node(e.src).kind, g.node(e.dst).kind) for e in g.backbone_edges}
    assert (NodeKind.COLLECTION, NodeKind.MEMBER) in kinds and (NodeKind.MEMBER, NodeKind.COLLECTION) in kinds
    for c in g.collections:
        own = set(g.members_of(c.pid))
        assert not any(e.dst in own for e in g.backbone_of(c.pid))


def test_out_degree_bounded():
    g = generate(GenParams(Case.G4, 80, max_backbone_out_degree=2, edge_density=0.5, seed=1))
    for n in g.nodes:
        assert len(g.backbone_of(n.pid)) <= 2


def test_roots_have_no_incoming_edges():
    g = generate(GenParams(Case.G2, 50, seed=2, num_roots=None))
    targets = {e.dst for e in g.edges}
    assert g.roots and not set(g.roots) & targets
    assert all(g.node(r).kind is NodeKind.COLLECTION for r in g.roots)


@pytest.mark.parametrize("bad", [
    dict(num_collections=0), dict(members_per_collection=0), dict(max_backbone_out_degree=0),
    dict(edge_density=0.0), dict(edge_density=1.5), dict(num_roots=0), dict(tag="a b"), dict(seed=2**64),
])
def test_invalid_params(bad):
    args = dict(case=Case.G1, num_collections=5) | bad
    with pytest.raises(InvalidParams):
        GenParams(**args)


def test_case_parse():
    assert Case.parse("g3") is Case.G3
    with pytest.raises(ValueError):
        Case.parse("g9")


params = st.builds(
    GenParams,
    case=st.sampled_from(list(Case)),
    num_collections=st.integers(1, 25),
    members_per_collection=st.integers(1, 5),
    max_backbone_out_degree=st.integers(1, 5),
    edge_density=st.floats(0.01, 1.0),
    seed=st.integers(0, 2**32),
)


@settings(max_examples=60)
@given(params)
def test_generated_graphs_are_valid(p):
    g = generate(p)
    assert validate_graph(g).ok
    for e in g.membership_edges:
        assert g.node(e.src).kind is NodeKind.COLLECTION and g.node(e.dst).kind is NodeKind.MEMBER
    assert sum(1 for e in g.edges if e.relation is Relation.HAD_MEMBER) == p.num_collections * p.members_per_collection
