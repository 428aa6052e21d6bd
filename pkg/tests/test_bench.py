import pytest

from pidcoll.bench import (
    CSV_FILES,
    TABLE_COLUMNS,
    BenchConfig,
    BenchReport,
    compute_communication,
    emit_report,
    parse_markdown_tables,
    read_csv_tables,
    run_matrix,
)
from pidcoll.clients import RESOLVE_KINDS
from pidcoll.clients import RequestKind as K
from pidcoll.costmodel import Calibration, CostModel, CostSampler, KindCost
from pidcoll.errors import ConfigInvalid
from pidcoll.resolver import RequestTrace


def trace(kind, client, server, seq=0):
    return RequestTrace(seq, kind, "t", client, server, 0)


def test_communication_basic():
    stats = compute_communication([trace(K.HANDLE, 5000, 4000)])
    assert stats.mean_us[K.HANDLE] == 1000 and stats.mean_us[K.MEMBERS] is None


def test_negative_communication_excluded_and_counted():
    stats = compute_communication([trace(K.MEMBER, 10, 20), trace(K.MEMBER, 30, 10, 1)])
    assert stats.negative[K.MEMBER] == 1 and stats.counted[K.MEMBER] == 1
    assert stats.mean_us[K.MEMBER] == 20


def test_cost_model_validation():
    with pytest.raises(ConfigInvalid):
        KindCost(1.0, 1.0)
    with pytest.raises(ConfigInvalid):
        KindCost(-1.0)
    KindCost(0.0, 0.0, 2.0, 0.5)


def test_sampler_never_negative_comm_and_seeded():
    model = Calibration.load().model_for("G3", "I2")
    a, b = CostSampler(model, 4), CostSampler(model, 4)
    draws = [a.draw(k) for k in RESOLVE_KINDS for _ in range(200)]
    assert draws == [b.draw(k) for k in RESOLVE_KINDS for _ in range(200)]
    assert all(c >= s >= 0 for s, c in draws)


def small(**kw):
    base = dict(collections=8, members=3, seeds=(1,))
    base.update(kw)
    return BenchConfig(**base)


def test_twelve_cells_at_c50():
    report = run_matrix(BenchConfig(collections=50))
    assert len(report.cells) == 12
    assert len(report.tables()["totals"]) == 12


def test_zero_cost_model_gives_zero_totals(tmp_path):
    path = tmp_path / "zero.yaml"
    path.write_text("resolve: {%s}\ndefaults: {server: {}, comm: {}}\n" % ", ".join(
        f"{c}: {{I1: {{}}, I2: {{}}, I3: {{}}}}" for c in ("G1", "G2", "G3", "G4")))
    report = run_matrix(small(cost_model=str(path)))
    for c in report.cells:
        assert c.total_server_us == c.total_client_us == c.total_comm_us == 0


def test_accounting_identity():
    report = run_matrix(small(seeds=(1, 2)))
    for c in report.cells:
        n = sum(c.volumes.values())
        # means are rounded to 1e-3 us per kind
        assert abs(c.total_client_us - (c.total_server_us + c.total_comm_us)) <= 0.002 * n
        assert c.total_server_us == pytest.approx(sum(c.volumes[k] * (c.server_mean[k] or 0) for k in RESOLVE_KINDS))


def test_table4_communication_calibration():
    report = run_matrix(BenchConfig(cases=["G1"], strategies=["I1"], collections=200))
    comm = report.cell("G1", "I1").comm.mean_us
    assert comm[K.HANDLE] == pytest.approx(1560, rel=0.05)
    assert comm[K.MEMBERS] == pytest.approx(4090, rel=0.05)


def test_simulation_is_deterministic():
    a, b = run_matrix(small()), run_matrix(small())
    assert a.tables() == b.tables()


def test_emit_round_trip(tmp_path):
    report = run_matrix(small())
    emit_report(report, tmp_path)
    assert read_csv_tables(tmp_path) == report.tables()
    md = parse_markdown_tables((tmp_path / "summary.md").read_text())
    assert md == report.tables()


def test_deposit_table_shape(tmp_path):
    report = run_matrix(small(strategies=["I1"]))
    rows = report.tables()["deposit"]
    assert [r[2] for r in rows[:3]] == ["pid", "collection", "member"]
    assert {(r[0], r[2]): r[3] for r in rows}[("G1", "member")] == 24
    emit_report(report, tmp_path)
    text = (tmp_path / "summary.md").read_text()
    assert "| object | G1 | G2 | G3 | G4 |" in text


def test_empty_report_is_header_only(tmp_path):
    emit_report(BenchReport(), tmp_path)
    for name, filename in CSV_FILES.items():
        assert (tmp_path / filename).read_text() == ",".join(TABLE_COLUMNS[name]) + "\n"
    assert parse_markdown_tables((tmp_path / "summary.md").read_text()) == {n: [] for n in TABLE_COLUMNS}


def test_config_loading(tmp_path):
    path = tmp_path / "b.yaml"
    path.write_text("cases: [g1, g3]\nstrategies: [i2]\nscale: {C: 12, M: 2}\nseeds: [5]\n"
                    "per_case: {G3: {edge_density: 0.2}}\n")
    cfg = BenchConfig.load(path, mode="sim")
    assert cfg.collections == 12 and cfg.members == 2 and len(cfg.cases) == 2
    assert cfg.gen_params(cfg.cases[1], 5).edge_density == 0.2
    path.write_text("bogus: 1\n")
    with pytest.raises(ConfigInvalid):
        BenchConfig.load(path)
    with pytest.raises(ConfigInvalid):
        BenchConfig(mode="real", parallel=True)
    with pytest.raises(ConfigInvalid):
        BenchConfig(registry_url="http://x")
    with pytest.raises(ConfigInvalid):
        BenchConfig.load(tmp_path / "missing.yaml")


def test_real_mode_small_matrix():
    report = run_matrix(small(mode="real", collections=4, stage_delays="none"))
    assert len(report.cells) == 12
    for c in report.cells:
        assert c.comm.negative == {k: 0 for k in RESOLVE_KINDS}
