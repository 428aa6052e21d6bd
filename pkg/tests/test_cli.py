import json

from pidcoll.cli import main
from pidcoll.collection_service import CollectionService
from pidcoll.model import ObjectGraph
from pidcoll.registry import PidRegistry
from pidcoll.server import ServiceThread, collection_handler, registry_handler

from oracle import reachable_edges


def test_generate_deposit_resolve(tmp_path):
    graph = tmp_path / "g.json"
    assert main(["generate", "--case", "g3", "--collections", "6", "--members", "2", "--seed", "42",
                 "--out", str(graph)]) == 0
    g = ObjectGraph.loads(graph.read_text())
    assert len(g.nodes) == 18
    with ServiceThread(registry_handler(PidRegistry())) as reg, \
            ServiceThread(collection_handler(CollectionService())) as coll:
        rep = tmp_path / "deposit.csv"
        assert main(["deposit", "--graph", str(graph), "--strategy", "i2", "--registry", reg.url,
                     "--collections", coll.url, "--report", str(rep), "--plan-out", str(tmp_path / "p.json")]) == 0
        assert len(rep.read_text().splitlines()) == 1 + 18 + 6 + 12
        trace, edges = tmp_path / "trace.csv", tmp_path / "edges.json"
        assert main(["resolve", "--root", g.roots[0].ref, "--registry", reg.url, "--collections", coll.url,
                     "--trace", str(trace), "--edges", str(edges)]) == 0
        got = json.loads(edges.read_text())
        assert len(got["edges"]) == len(reachable_edges(g)) and got["dangling"] == []
        assert trace.read_text().startswith("seq,kind,target,client_us,server_us,bytes\n")
        # a second deposit of the same graph collides
        assert main(["deposit", "--graph", str(graph), "--strategy", "i2", "--registry", reg.url,
                     "--collections", coll.url, "--report", str(rep)]) == 2


def test_bench_run(tmp_path):
    cfg = tmp_path / "b.yaml"
    cfg.write_text("cases: [G1, G4]\nstrategies: [I1, I3]\nscale: {C: 6, M: 2}\nseeds: [3]\n")
    out = tmp_path / "report"
    assert main(["bench", "run", "--config", str(cfg), "--mode", "sim", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert {"deposit.csv", "server_resolve.csv", "client_resolve.csv", "communication.csv", "summary.md"} <= set(names)


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "b.yaml"
    cfg.write_text("cases: [G7]\n")
    assert main(["bench", "run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
