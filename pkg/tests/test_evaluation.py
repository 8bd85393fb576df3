import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavpower.agents import ClosestPolicy, FullPowerPolicy
from uavpower.config import get_scenario
from uavpower.env import PowerControlEnv, evaluate_outage
from uavpower.evaluation import (NoRunsError, _csv_text, empirical_cdf, fmt, read_episode_csv,
                                 report, run_episode, trace_filename, write_cdf_csv,
                                 write_episode_csv, write_trace_csv)


@pytest.fixture(scope="module")
def single_traces():
    sc = get_scenario("single_uav")
    return {p.name: run_episode(p, PowerControlEnv(sc), seed=3)
            for p in (ClosestPolicy(), FullPowerPolicy())}


def test_ecdf_small():
    t = empirical_cdf([3.0, 1.0, 2.0])["all"]
    assert t.values.tolist() == [1.0, 2.0, 3.0]
    assert np.allclose(t.cdf, [1 / 3, 2 / 3, 1.0])


def test_ecdf_all_equal():
    t = empirical_cdf([0.5] * 7)["all"]
    assert t.values.tolist() == [0.5]
    assert t.cdf.tolist() == [1.0]


def test_ecdf_ks_uniform(rng):
    n = 100_000
    t = empirical_cdf(rng.random(n))["all"]
    # Two-sided D_n also checks the left limits i/n - 1/n.
    d = max(np.max(np.abs(t.cdf - t.values)), np.max(np.abs(t.cdf - 1 / n - t.values)))
    # Asymptotic 1% critical value of the Kolmogorov distribution.
    assert d <= 1.6276 / math.sqrt(n)


def test_ecdf_split_by_zone():
    tables = empirical_cdf([1, 2, 3, 4], [True, False, True, False])
    assert tables["inside"].values.tolist() == [1.0, 3.0]
    assert tables["outside"].values.tolist() == [2.0, 4.0]
    assert set(empirical_cdf([1, 2], [True, True])) == {"inside"}


def test_ecdf_empty():
    with pytest.raises(ValueError):
        empirical_cdf([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
@settings(max_examples=100, deadline=None)
def test_ecdf_is_distribution(xs):
    t = empirical_cdf(xs)["all"]
    assert np.all(np.diff(t.values) > 0)
    assert np.all(np.diff(t.cdf) > 0)
    assert t.cdf[-1] == 1.0
    assert t.cdf[0] >= 1 / len(xs)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_fmt_round_trip(xs):
    for x in xs:
        assert float(fmt(x)) == x


def test_fmt_types():
    assert fmt(True) == "1"
    assert fmt(np.int64(4)) == "4"
    assert fmt("COMP") == "COMP"
    assert fmt(0.1) == "0.1"


def test_run_episode_fields(single_traces):
    tr = single_traces["Closest"]
    assert len(tr) == 1500
    assert tr.epsilon.shape == (1500, 1)
    assert np.all((tr.epsilon >= 0) & (tr.epsilon <= 1))
    assert np.all(tr.power_fraction == 1 / 6)
    assert np.all(single_traces["COMP"].power_fraction == 1.0)


def test_run_episode_deterministic():
    sc = get_scenario("multi_uav", episode_length=40)
    a = run_episode(ClosestPolicy(), PowerControlEnv(sc), 5)
    b = run_episode(ClosestPolicy(), PowerControlEnv(sc), 5)
    assert np.array_equal(a.epsilon, b.epsilon)
    assert np.array_equal(a.positions, b.positions)


def test_run_episode_shape_mismatch():
    sc = get_scenario("single_uav_short")
    with pytest.raises(ValueError, match="shape"):
        run_episode(lambda env, obs: np.zeros(3), PowerControlEnv(sc), 0)


def test_trace_csv_lines_and_columns(single_traces, tmp_path):
    path = tmp_path / "outage.csv"
    write_trace_csv(single_traces, path, "outage")
    lines = path.read_text().splitlines()
    assert len(lines) == 1501
    # SAC is missing, so its column is omitted.
    assert lines[0] == "t,Closest,COMP"
    t, closest, comp = lines[1].split(",")
    assert t == "0"
    assert float(closest) == single_traces["Closest"].epsilon[0, 0]


def test_trace_csv_power(single_traces, tmp_path):
    path = tmp_path / "power.csv"
    write_trace_csv(single_traces, path, "power")
    rows = [r.split(",") for r in path.read_text().splitlines()[1:]]
    assert {float(r[1]) for r in rows} == {1 / 6}
    assert {float(r[2]) for r in rows} == {1.0}


def test_trace_csv_errors(single_traces, tmp_path):
    with pytest.raises(ValueError):
        write_trace_csv({}, tmp_path / "x.csv")
    with pytest.raises(ValueError, match="quantity"):
        write_trace_csv(single_traces, tmp_path / "x.csv", "reward")
    sc = get_scenario("single_uav_short")
    short = run_episode(ClosestPolicy(), PowerControlEnv(sc), 0)
    with pytest.raises(ValueError, match="time axes"):
        write_trace_csv({"Closest": short, "COMP": single_traces["COMP"]}, tmp_path / "x.csv")


def test_trace_csv_byte_identical(tmp_path):
    sc = get_scenario("single_uav_short")
    paths = []
    for run in range(2):
        traces = {p.name: run_episode(p, PowerControlEnv(sc), 11)
                  for p in (ClosestPolicy(), FullPowerPolicy())}
        paths.append(tmp_path / f"run{run}.csv")
        write_trace_csv(traces, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_episode_csv_round_trip(tmp_path):
    sc = get_scenario("multi_uav", episode_length=30)
    tr = run_episode(ClosestPolicy(), PowerControlEnv(sc), 2)
    path = tmp_path / "ep.csv"
    write_episode_csv(tr, path)
    cols = read_episode_csv(path)
    n, k = 3, 19
    assert np.array_equal(cols["epsilon"].reshape(30, n), tr.epsilon)
    assert np.array_equal(cols["x"].reshape(30, n), tr.positions[..., 0])
    assert np.array_equal(cols["reward"][::n], tr.reward)
    alloc = np.stack([cols[f"p_{j}"] for j in range(k)], axis=1).reshape(30, n, k)
    assert np.array_equal(alloc, tr.alloc)


def test_episode_csv_recomputes_outage(tmp_path):
    sc = get_scenario("multi_uav", episode_length=25)
    tr = run_episode(FullPowerPolicy(), PowerControlEnv(sc), 4)
    write_episode_csv(tr, tmp_path / "ep.csv")
    cols = read_episode_csv(tmp_path / "ep.csv")
    k = sc.k_bs
    bs = sc.bs_array()
    for r in range(len(cols["t"])):
        pos = np.array([[cols["x"][r], cols["y"][r], cols["z"][r]]])
        los = np.array([[cols[f"los_{j}"][r] for j in range(k)]], dtype=bool)
        alloc = np.array([[cols[f"p_{j}"][r] for j in range(k)]])
        eps = evaluate_outage(alloc, pos, los, bs, sc)[0]
        assert eps == pytest.approx(cols["epsilon"][r], rel=1e-12, abs=0)


def test_cdf_csv(tmp_path):
    tables = empirical_cdf([1e-3, 1e-5, 1e-3], [False, True, False])
    write_cdf_csv(tables, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "zone,log10_outage,cdf"
    assert lines[1:] == ["inside,-5.0,1.0", "outside,-3.0,1.0"]
    write_cdf_csv(tables, tmp_path / "v.csv", log10=False)
    assert (tmp_path / "v.csv").read_text().splitlines()[0] == "zone,value,cdf"


def test_csv_text_quotes():
    assert _csv_text(["a"], [["x,y"]]) == 'a\n"x,y"\n'


def test_report_baselines(tmp_path):
    sc = get_scenario("multi_uav", episode_length=200)
    for policy in (ClosestPolicy(), FullPowerPolicy()):
        for seed in (0, 1):
            tr = run_episode(policy, PowerControlEnv(sc), seed)
            write_episode_csv(tr, tmp_path / trace_filename(tr.policy, seed))
    summary = report(tmp_path)
    for zone, e in summary["Closest"].items():
        assert e["mean_power_fraction"] == pytest.approx(1 / 19, rel=1e-12)
        assert round(e["mean_power_fraction"], 4) == 0.0526
    for e in summary["COMP"].values():
        assert e["violation_rate"] == 0.0
        assert e["mean_power_fraction"] == 1.0
    assert summary["COMP"]["all"]["steps"] == 2 * 200 * 3
    assert (tmp_path / "summary.json").exists()
    assert (tmp_path / "summary.csv").read_text().startswith("policy,zone,steps")


def test_report_empty(tmp_path):
    with pytest.raises(NoRunsError, match="no runs found"):
        report(tmp_path)
    with pytest.raises(NoRunsError):
        report(tmp_path / "missing")
