import math

import pytest

from hetsbm.classify import TrainConfig
from hetsbm.errors import ConfigError, InfeasibleModel
from hetsbm.hsbm import pattern_family_a
from hetsbm.sweep import CSV_COLUMNS, SweepSpec, collapse_layer, default_params, run_sweep

FAST = TrainConfig(epochs=40)


def small_spec(**kw):
    base = dict(kind="pattern_a", grid=(0.1, 0.25), seeds=(0, 1),
                base=default_params(n=300), train=FAST)
    base.update(kw)
    return SweepSpec(**base)


def test_csv_columns_and_determinism(tmp_path):
    a = run_sweep(small_spec(out=str(tmp_path / "a.csv")))
    b = run_sweep(small_spec(workers=2))
    assert (tmp_path / "a.csv").read_text() == b.to_csv()
    lines = b.to_csv().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 5
    assert [(r.param, r.seed) for r in a.rows] == [(0.1, 0), (0.1, 1), (0.25, 0), (0.25, 1)]


def test_row_contents():
    res = run_sweep(small_spec(grid=(0.25,), seeds=(0,)))
    r = res.rows[0]
    assert 0 <= r.acc_mlp <= 100 and 0 <= r.acc_gcn <= 100
    assert r.verdict == "good" and len(r.pearson_x) == 10
    assert math.isclose(r.min_gain, 1.8162, rel_tol=1e-3)


def test_infeasible_grid_point_named():
    base = default_params(n=300, dbar=250.0)
    with pytest.raises(InfeasibleModel, match="pattern_a=0.3"):
        run_sweep(small_spec(grid=(0.1, 0.3), base=base))


def test_degree_and_noise_kinds():
    res = run_sweep(small_spec(kind="degree", grid=(10,), seeds=(0,)))
    assert res.rows[0].sweep_kind == "degree"
    res = run_sweep(small_spec(kind="noise", grid=(0.004,), seeds=(0,)))
    assert res.rows[0].min_gain > 0


def test_layers_kind():
    spec = small_spec(kind="layers", grid=(1, 2, 3), seeds=(0,), precisions=("single", "double"),
                      base=default_params(pattern_family_a(0.25), n=300))
    res = run_sweep(spec)
    kinds = sorted({r.sweep_kind for r in res.rows})
    assert kinds == ["layers[double]", "layers[single]"]
    assert all(r.avg_std is not None for r in res.rows)
    assert set(res.collapse_layers()) == {"single", "double"}


def test_collapse_layer():
    assert collapse_layer([1, 2, 3, 4], [90, 85, 69, 20]) == 3
    assert collapse_layer([1, 2, 3], [50, 60, 45]) is None
    assert collapse_layer([1, 2, 3], [50, 80, 59.9]) == 3


def test_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec(kind="nope")
    with pytest.raises(ConfigError):
        SweepSpec(kind="layers", grid=(0.5,))
    with pytest.raises(ConfigError):
        SweepSpec.from_json({"kind": "degree", "bogus": 1})
    spec = SweepSpec.from_json({"kind": "degree", "base": {"n": 200, "mhat": "a=0.25"},
                                "train": {"epochs": 10}}, seeds=[3])
    assert spec.base.n == 200 and spec.train.epochs == 10 and spec.seeds == (3,)
