import json

import numpy as np
import pytest

exergm = pytest.importorskip("exergm")


def test_formula_round_trip():
    assert exergm.parse_formula("edges+mutual") == "edges + mutual"
    assert exergm.term_names("edges + mutual") == ["edges", "mutual"]


def test_formula_error_carries_position():
    with pytest.raises(exergm.FormulaError) as info:
        exergm.parse_formula("edges + bogus")
    assert info.value.position == 8


def test_graph_adjacency():
    a = np.array([[0, 1, 0], [1, 0, 0], [0, 1, 0]])
    g = exergm.Graph.from_adjacency(a, directed=True)
    assert g.tie_count() == 3
    assert g.has_tie(2, 1) and not g.has_tie(1, 2)
    assert (g.adjacency() == a).all()
    assert exergm.statistics("edges + mutual", g) == pytest.approx([3, 1])


def test_support_table_counts_every_graph():
    t = exergm.support_table("edges + mutual", 3)
    assert t.total_weight == 2 ** 6
    assert t.q.shape[1] == 2
    assert sum(t.weights) == pytest.approx(64)


def test_fit_matches_logit():
    g = exergm.Graph.from_edges(4, True, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)])
    res = exergm.fit([exergm.Network("a", g)], "edges")
    assert res.status == "00"
    assert res.theta[0] == pytest.approx(0.0, abs=1e-7)
    assert res.vcov[0, 0] == pytest.approx(1 / 3, rel=1e-6)
    back = exergm.FitResult.from_json(res.to_json())
    assert back.to_json() == res.to_json()


def test_pooled_likelihood_agrees_with_fit():
    nets = exergm.simulate([-0.5, 1.0], "edges + mutual", 4, count=8, seed=3)
    data = exergm.PooledData(nets, "edges + mutual")
    res = exergm.fit(nets, "edges + mutual")
    assert data.loglik(res.theta) == pytest.approx(res.loglik)
    assert np.abs(data.gradient(res.theta)).max() < 1e-5


def test_nested_lr_test_and_gof():
    nets = exergm.regenerate_fivenets(11)
    small = exergm.fit(nets, "edges")
    big = exergm.fit(nets, "edges + nodematch(gender)")
    lr = exergm.lr_test(small, big)
    assert lr["df"] == 1 and 0.0 <= lr["p_value"] <= 1.0
    rows = exergm.gof(big, nets)
    assert len(rows) == len(nets) * 2
    assert all(r["lower"] <= r["upper"] for r in rows)


def test_bootstrap_is_seeded():
    nets = exergm.simulate([-0.3], "edges", 4, count=6, seed=5)
    a = exergm.bootstrap(nets, "edges", replicates=50, seed=9)
    b = exergm.bootstrap(nets, "edges", replicates=50, seed=9)
    assert np.array_equal(a["vcov"], b["vcov"])


def test_small_sim_study(tmp_path):
    cfg = json.dumps({"preset": "type_one", "replications": 3, "sample_sizes": [5]})
    out = exergm.sim_study(cfg, tmp_path / "ck.jsonl")
    assert len(out["records"]) == 3
    assert out["kept"] + 0 <= 3
