import math

import pytest

import rdimpute


def test_generate_and_classify():
    d = rdimpute.generate_trial("setting1", 3)
    assert len(d) == 400
    assert d.visit_weeks == [12, 24, 36, 48]
    labels = d.scenarios()
    assert set(labels) <= {"S1", "S2", "S3", "S4_51", "S52"}
    assert d.violations() == []


def test_csv_round_trip_and_analyze():
    d = rdimpute.generate_trial("setting2", 5)
    back = rdimpute.read_dataset_csv(d.to_csv())
    assert back.to_csv() == d.to_csv()
    a = rdimpute.analyze(d, methods=["B", "C"], m=5, seed=1)
    b = rdimpute.analyze(back, methods=["B", "C"], m=5, seed=1)
    assert [r["method"] for r in a] == ["B", "C"]
    assert a[0]["difference"]["estimate"] == b[0]["difference"]["estimate"]
    diff = a[1]["difference"]
    assert diff["lower"] < diff["estimate"] < diff["upper"]


def test_bad_csv_raises():
    text = "id,arm,baseline,y12,y48,disc_week,withdraw_week,withdraw_type\n1,7,8,1,1,,,\n"
    with pytest.raises(ValueError, match="row 2"):
        rdimpute.read_dataset_csv(text)


def test_pool_rubin():
    p = rdimpute.pool_rubin([1.0, 2.0], [0.5, 0.5])
    assert p["estimate"] == 1.5
    assert p["total"] == 1.25
    assert rdimpute.conditional_disc_probability(0.8, 0.6) == pytest.approx(0.25)


def test_params_and_simulate():
    p = rdimpute.preset_params("setting2")
    assert p.alpha1 == 0.0
    p.n_per_arm = 60
    out = rdimpute.simulate(p, replicates=2, m=3, truth_datasets=10, methods=["A", "D"])
    assert {r["method"] for r in out["rows"]} == {"A", "D"}
    assert math.isfinite(out["truth"]["difference"])
    p.kappa = -1.0
    with pytest.raises(ValueError):
        p.validate()
    with pytest.raises(ValueError):
        rdimpute.preset_params("setting3")
