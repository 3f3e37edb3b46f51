import numpy as np
import pytest

from sparsediff.dynamics import integrate_coupled
from sparsediff.graph import sample_w_graph
from sparsediff.io import (csv_text, downsampled_rows, load_trajectories, read_columnar, read_csv, save_density,
                           save_trajectories, strip_timestamp, write_columnar, write_csv, write_plot_data)
from sparsediff.mckv import solve_mckv
from sparsediff.model import kuramoto


def test_columnar_round_trip(tmp_path):
    cols = {"a": np.arange(6.0).reshape(2, 3), "b": np.array([np.pi]), "c": np.zeros((0, 4))}
    write_columnar(tmp_path / "x.bin", "test", cols, {"k": 1})
    kind, meta, back = read_columnar(tmp_path / "x.bin")
    assert kind == "test" and meta == {"k": 1}
    for k in cols:
        assert np.array_equal(back[k], cols[k])
    data = (tmp_path / "x.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(data + b"\0")
    with pytest.raises(ValueError):
        read_columnar(tmp_path / "bad.bin")
    (tmp_path / "bad2.bin").write_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(ValueError):
        read_columnar(tmp_path / "bad2.bin")


def test_trajectory_container(tmp_path):
    m = kuramoto(1.0)
    s = sample_w_graph(20, 0.3, m.W, m.sample_media(0, 20), 0)
    pair = integrate_coupled(m, s, 0.05, 1e-3, 0)
    save_trajectories(tmp_path / "t.bin", pair)
    back = load_trajectories(tmp_path / "t.bin")
    assert np.array_equal(back.theta_sparse, pair.theta_sparse)
    assert np.array_equal(back.media, pair.media)
    assert back.dt == pair.dt and back.seed == pair.seed
    rows = downsampled_rows(pair, every=10, particles=3)
    assert len(rows) == 6 * 3
    assert rows[-1]["sparse"] == pair.theta_sparse[2, 50]


def test_density_container(tmp_path):
    flow = solve_mckv(kuramoto(0.5, initial=0.2), grid_points=32, T=0.1)
    save_density(tmp_path / "d.bin", flow)
    kind, meta, cols = read_columnar(tmp_path / "d.bin")
    assert kind == "density" and meta["periodic"] is True
    assert np.array_equal(cols["q"], flow.q)


def test_csv_is_deterministic_apart_from_timestamp(tmp_path):
    rows = [{"a": 0.1, "b": True, "c": 3}, {"a": 1 / 3, "b": False, "c": 4}]
    write_csv(tmp_path / "1.csv", rows, ["a", "b", "c"])
    write_csv(tmp_path / "2.csv", rows, ["a", "b", "c"])
    t1, t2 = (tmp_path / "1.csv").read_text(), (tmp_path / "2.csv").read_text()
    assert t1.startswith("# generated ")
    assert strip_timestamp(t1) == strip_timestamp(t2) == csv_text(rows, ["a", "b", "c"])
    back = read_csv(tmp_path / "1.csv")
    assert float(back[1]["a"]) == 1 / 3
    assert back[0]["b"] == "1"


def test_plot_data(tmp_path):
    write_plot_data(tmp_path / "p.dat", [1, 2], [0.5, 0.25], "x y")
    lines = (tmp_path / "p.dat").read_text().splitlines()
    assert lines == ["# x y", "1.0 0.5", "2.0 0.25"]
