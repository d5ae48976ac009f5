import math

import numpy as np
import pytest
from scipy import stats

import oracles
from conftest import random_cascade
from opacity.cascade import SIConfig, ThresholdAssignment, run_si_pull, run_threshold_cascade
from opacity.estimation import InsufficientDataError
from opacity.graph import generate_plc
from opacity.measurement import Status, ThresholdInterval, build_intervals
from opacity.eventlog import (
    DegenerateDataError,
    LogInvariantError,
    LogParseError,
    PkCurve,
    analyze_behavior,
    build_behavior_intervals,
    build_log,
    burstiness_gini,
    classify_reinforcement,
    correlations,
    gini,
    ingest_log,
    pearson,
    pk_curves,
    precise_rates_by_exposure,
    summary_json,
    trace_to_log,
    write_curves_csv,
    write_log,
)

DAY = 86400


def write_files(root, edges="actor_a,actor_b\n", updates="actor,timestamp\n", adoptions="actor,behavior,timestamp\n"):
    root.mkdir(parents=True, exist_ok=True)
    (root / "edges.csv").write_text(edges)
    (root / "updates.csv").write_text(updates)
    (root / "adoptions.csv").write_text(adoptions)
    return root


@pytest.fixture
def triad_log():
    # everyone posts at t=1, then i (0) adopts, j (1), k (2)
    return build_log(
        [(0, 1), (0, 2), (1, 2)],
        {0: [1, 3], 1: [1, 4], 2: [1, 5]},
        {"g": {0: 3, 1: 4, 2: 5}},
    )


def curve(variant, pairs):
    return PkCurve(variant, {k: (1, 1, p) for k, p in pairs.items()})


class TestIngest:
    def test_empty(self, tmp_path):
        log = ingest_log(write_files(tmp_path / "log"))
        assert log.actors == () and log.behaviors == []

    def test_header_only_and_blank_files(self, tmp_path):
        root = write_files(tmp_path / "log", edges="", updates="", adoptions="")
        assert ingest_log(root).actors == ()

    def test_triad_file(self, tmp_path, triad_log):
        root = write_files(
            tmp_path / "log",
            "actor_a,actor_b\n0,1\n0,2\n1,2\n",
            "actor,timestamp\n0,1\n0,3\n1,1\n1,4\n2,1\n2,5\n",
            "actor,behavior,timestamp\n0,g,3\n1,g,4\n2,g,5\n",
        )
        assert ingest_log(root) == triad_log

    def test_parse_error_line_number(self, tmp_path):
        root = write_files(tmp_path / "log", updates="actor,timestamp\n0,1\n0,x\n")
        with pytest.raises(LogParseError) as exc:
            ingest_log(root)
        assert exc.value.lineno == 3 and "updates.csv:3" in str(exc.value)

    def test_wrong_width(self, tmp_path):
        root = write_files(tmp_path / "log", adoptions="actor,behavior,timestamp\n0,g\n")
        with pytest.raises(LogParseError) as exc:
            ingest_log(root)
        assert exc.value.lineno == 2

    def test_missing_file(self, tmp_path):
        (tmp_path / "log").mkdir()
        with pytest.raises(OSError):
            ingest_log(tmp_path / "log")

    def test_non_monotone_updates(self, tmp_path):
        root = write_files(tmp_path / "log", updates="actor,timestamp\n7,5\n7,5\n")
        with pytest.raises(LogInvariantError) as exc:
            ingest_log(root)
        assert exc.value.actor == 7

    def test_adoption_off_update(self):
        with pytest.raises(LogInvariantError, match="actor 3"):
            build_log([], {3: [1, 2]}, {"g": {3: 5}})

    def test_self_loop(self):
        with pytest.raises(LogInvariantError):
            build_log([(1, 1)], {}, {})

    def test_repeated_adoption_keeps_earliest(self, tmp_path):
        root = write_files(
            tmp_path / "log",
            updates="actor,timestamp\n0,1\n0,2\n0,3\n",
            adoptions="actor,behavior,timestamp\n0,g,3\n0,g,2\n0,g,3\n",
        )
        assert ingest_log(root).adoptions == {"g": {0: 2}}

    def test_contact_graph_symmetric(self, triad_log):
        assert triad_log.neighbors(0) == {1, 2}
        assert all(u in triad_log.neighbors(v) for u, v in triad_log.edges)

    def test_write_round_trip(self, tmp_path, triad_log):
        write_log(triad_log, tmp_path / "out")
        assert ingest_log(tmp_path / "out") == triad_log


class TestIntervals:
    def test_triad_schedule(self, triad_log):
        res = build_behavior_intervals(triad_log, "g")
        assert res.intervals[0] == ThresholdInterval(0, 0.0, 0.0, Status.INNOVATOR)
        assert res.intervals[1] == ThresholdInterval(1, 0.0, 1.0, Status.PRECISE)
        assert res.intervals[2] == ThresholdInterval(2, 0.0, 2.0, Status.IMPRECISE)
        assert res.t_star == {0: 0, 1: 1, 2: 2}

    def test_four_before_two_inside(self):
        nbrs = list(range(1, 7))
        times = [1, 2, 3, 4, 12, 15]
        log = build_log(
            [(0, j) for j in nbrs],
            {0: [10, 20]} | {j: [t] for j, t in zip(nbrs, times)},
            {"g": {0: 20} | dict(zip(nbrs, times))},
        )
        res = build_behavior_intervals(log, "g")
        assert res.intervals[0] == ThresholdInterval(0, 4.0, 6.0, Status.IMPRECISE)
        assert res.t_star[0] == 2

    def test_scan_skips_empty_gaps(self):
        # gaps (10,20] and (20,30] are empty, so the bracketing gap is (5,10]
        log = build_log([(0, 1)], {0: [5, 10, 20, 30], 1: [7]}, {"g": {0: 30, 1: 7}})
        res = build_behavior_intervals(log, "g")
        assert res.intervals[0] == ThresholdInterval(0, 0.0, 1.0, Status.PRECISE)

    def test_neighbors_after_adoption_make_innovator(self):
        log = build_log([(0, 1), (0, 2)], {0: [1], 1: [5], 2: [6]}, {"g": {0: 1, 1: 5, 2: 6}})
        assert build_behavior_intervals(log, "g").intervals[0].status is Status.INNOVATOR

    def test_no_prior_update_unbounded(self):
        log = build_log([(0, 1), (0, 2)], {0: [9], 1: [1], 2: [2]}, {"g": {0: 9, 1: 1, 2: 2}})
        res = build_behavior_intervals(log, "g")
        iv = res.intervals[0]
        assert iv.lower is None and iv.upper == 2.0 and iv.status is Status.IMPRECISE
        assert res.t_star[0] is None

    def test_unknown_behavior(self, triad_log):
        with pytest.raises(KeyError):
            build_behavior_intervals(triad_log, "h")

    def test_t_star_one_iff_precise(self):
        g = generate_plc(300, 3, 0.5, seed=4)
        trace, _ = run_si_pull(g, SIConfig(0.3, "pull"), [0, 1], seed=4)
        res = build_behavior_intervals(trace_to_log(trace, g), "g")
        for v, iv in res.intervals.items():
            assert (res.t_star[v] == 1) == (iv.status is Status.PRECISE)


@pytest.mark.parametrize("i", range(100))
def test_round_trip_matches_measurement(i):
    g, trace = random_cascade(i)
    direct = {v: iv for v, iv in build_intervals(trace).items() if v in trace.final_active}
    via_log = build_behavior_intervals(trace_to_log(trace, g, time_scale=7), "g").intervals
    assert via_log == direct


def test_round_trip_through_files(tmp_path):
    g, trace = random_cascade(5)
    log = trace_to_log(trace, g, time_scale=60)
    write_log(log, tmp_path / "log")
    again = ingest_log(tmp_path / "log")
    assert build_behavior_intervals(again, "g").intervals == build_behavior_intervals(log, "g").intervals


def test_fractional_traces_not_exported():
    g = generate_plc(50, 2, 0.3, seed=0)
    h = ThresholdAssignment("fractional", {v: 0.3 for v in g.nodes}, seed_nodes={0})
    with pytest.raises(ValueError):
        trace_to_log(run_threshold_cascade(g, h, 0), g)


class TestRates:
    def test_all_width_one(self):
        ivs = {v: ThresholdInterval(v, float(v % 3), float(v % 3 + 1), Status.PRECISE) for v in range(9)}
        table = precise_rates_by_exposure(ivs)
        assert all(r == 1.0 for _, _, r in table["levels"].values())
        assert table["all"] == (9, 9, 1.0)

    def test_mixed(self):
        ivs = {v: ThresholdInterval(v, 1.0, 2.0, Status.PRECISE) for v in range(3)}
        ivs[3] = ThresholdInterval(3, 0.0, 2.0, Status.IMPRECISE)
        ivs[4] = ThresholdInterval(4, 0.0, 0.0, Status.INNOVATOR)
        table = precise_rates_by_exposure(ivs)
        assert table["levels"] == {2: (3, 4, 0.75)}

    def test_max_k(self):
        ivs = {0: ThresholdInterval(0, 0.0, 1.0, Status.PRECISE), 1: ThresholdInterval(1, 3.0, 9.0, Status.IMPRECISE)}
        assert list(precise_rates_by_exposure(ivs, max_k=5)["levels"]) == [1]

    def test_dense_cascade_rates_fall(self):
        pooled = {}
        for seed in range(5):
            g = generate_plc(1000, 3, 0.2, seed=seed)
            trace, _ = run_si_pull(g, SIConfig(0.2, "pull"), [0, 1, 2], seed=seed)
            ivs = build_behavior_intervals(trace_to_log(trace, g), "g").intervals
            pooled.update({(seed, v): iv for v, iv in ivs.items()})
        rates = precise_rates_by_exposure(pooled, max_k=3)["levels"]
        r = [rates[k][2] for k in (1, 2, 3)]
        assert r[0] > r[1] > r[2]


class TestCurves:
    def test_wide_intervals_split_mass(self, triad_log):
        res = build_behavior_intervals(triad_log, "g")
        up = pk_curves(triad_log, "g", "upper", res)
        lo = pk_curves(triad_log, "g", "lower", res)
        assert up.points[2][0] == 1 and lo.points[0][0] == 3
        assert sum(a for a, _, _ in up.points.values()) == sum(a for a, _, _ in lo.points.values()) == 3

    def test_all_interval_zero_two(self):
        # actor 2 and actor 3 each see two adoptions land in one gap
        edges = [(0, 2), (1, 2), (0, 3), (1, 3)]
        log = build_log(edges, {0: [2], 1: [3], 2: [1, 5], 3: [1, 6]}, {"g": {0: 2, 1: 3, 2: 5, 3: 6}})
        res = build_behavior_intervals(log, "g")
        assert {res.intervals[v] for v in (2, 3)} == {
            ThresholdInterval(2, 0.0, 2.0, Status.IMPRECISE), ThresholdInterval(3, 0.0, 2.0, Status.IMPRECISE)}
        up = pk_curves(log, "g", "upper", res)
        lo = pk_curves(log, "g", "lower", res)
        assert up.points[2][0] == 2 and up.points.get(0, (0,))[0] == 2
        assert lo.points[0][0] == 4 and 2 not in lo.points

    def test_precise_only_with_offset(self):
        # when every interval is [k-1, k], the offset lower curve equals the upper one
        log = build_log([(0, 1), (1, 2)], {0: [1], 1: [0, 2], 2: [1, 3]}, {"g": {0: 1, 1: 2, 2: 3}})
        res = build_behavior_intervals(log, "g")
        assert all(iv.status is not Status.IMPRECISE for iv in res.intervals.values())
        assert pk_curves(log, "g", "upper", res).points == pk_curves(log, "g", "lower", res, lower_offset=1).points

    def test_bad_variant(self, triad_log):
        with pytest.raises(ValueError):
            pk_curves(triad_log, "g", "middle")

    def test_simulated_invariants(self):
        g = generate_plc(400, 3, 0.5, seed=2)
        trace, _ = run_si_pull(g, SIConfig(0.3, "pull"), [0, 5], seed=2)
        log = trace_to_log(trace, g)
        totals = []
        for variant in ("upper", "lower"):
            c = pk_curves(log, "g", variant)
            dens = [c.points[k][1] for k in sorted(c.points)]
            assert dens == sorted(dens, reverse=True)
            assert all(0 <= p <= 1 and a <= d for a, d, p in c.points.values())
            totals.append(sum(a for a, _, _ in c.points.values()))
        assert totals[0] == totals[1] == len(log.adoptions["g"])


class TestClassify:
    def test_uncertain(self):
        assert classify_reinforcement(curve("upper", {1: 0.1, 2: 0.15}), curve("lower", {1: 0.12, 2: 0.08})) == "reinforcement-uncertain"

    def test_supported(self):
        assert classify_reinforcement(curve("upper", {1: 0.1, 2: 0.15}), curve("lower", {1: 0.05, 2: 0.07})) == "reinforcement-supported"

    def test_decreasing_both(self):
        assert classify_reinforcement(curve("upper", {1: 0.1, 2: 0.08}), curve("lower", {1: 0.05, 2: 0.03})) == "decreasing-both"

    def test_lower_only(self):
        assert classify_reinforcement(curve("upper", {1: 0.1, 2: 0.08}), curve("lower", {1: 0.05, 2: 0.07})) == "lower-only-increasing"

    def test_missing_points(self):
        with pytest.raises(InsufficientDataError):
            classify_reinforcement(curve("upper", {1: 0.1}), curve("lower", {1: 0.1, 2: 0.2}))


class TestGini:
    def test_uniform(self):
        assert gini([10] * 5) == 0.0

    def test_single_day_of_five(self):
        assert gini([50, 0, 0, 0, 0]) == pytest.approx(0.8)

    def test_matches_pairwise_form(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            xs = rng.integers(0, 20, size=rng.integers(1, 15)).tolist()
            assert gini(xs) == pytest.approx(oracles.gini_pairs(xs))

    def test_burstiness_buckets(self):
        adopt = {a: a // 10 * DAY * 4 for a in range(20)}  # day 0 and day 4
        log = build_log([], {a: [t] for a, t in adopt.items()}, {"g": adopt})
        assert burstiness_gini(log, "g") == pytest.approx(oracles.gini_pairs([10, 0, 0, 0, 10]))

    def test_burstiness_uniform_and_single_day(self):
        adopt = {a: (a % 5) * DAY + a for a in range(50)}
        log = build_log([], {a: [t] for a, t in adopt.items()}, {"g": adopt})
        assert burstiness_gini(log, "g") == 0.0
        one = build_log([], {0: [5], 1: [9]}, {"g": {0: 5, 1: 9}})
        assert burstiness_gini(one, "g") == 0.0

    def test_burstiness_offset(self):
        adopt = {0: DAY - 10, 1: DAY - 5, 2: DAY + 10}
        log = build_log([], {a: [t] for a, t in adopt.items()}, {"g": adopt})
        assert burstiness_gini(log, "g") == pytest.approx(1 / 6)
        assert burstiness_gini(log, "g", offset_seconds=20) == 0.0

    def test_no_adoptions(self):
        with pytest.raises(DegenerateDataError):
            burstiness_gini(build_log([], {}, {"g": {}}), "g")


class TestPearson:
    def test_perfect(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        assert pearson(xs, [2 * x + 1 for x in xs])[0] == pytest.approx(1.0)
        assert pearson(xs, [-x for x in xs])[0] == pytest.approx(-1.0)

    def test_hand_value(self):
        assert pearson([1, 2, 3, 4], [2, 1, 4, 3])[0] == pytest.approx(0.6)

    def test_matches_scipy(self):
        rng = np.random.default_rng(3)
        for n in (3, 5, 30):
            x = rng.standard_normal(n)
            y = x + rng.standard_normal(n)
            r, p = pearson(x.tolist(), y.tolist())
            ref = stats.pearsonr(x, y)
            assert r == pytest.approx(ref[0]) and p == pytest.approx(ref[1])

    def test_degenerate(self):
        with pytest.raises(DegenerateDataError):
            pearson([1, 1, 1], [1, 2, 3])
        with pytest.raises(InsufficientDataError):
            pearson([1, 2], [1, 2])


class TestAnalysis:
    def test_triad_summary(self, triad_log):
        s = analyze_behavior(triad_log, "g")
        assert (s["adopters"], s["innovators"], s["precise"], s["imprecise"]) == (3, 1, 1, 1)
        assert s["clustering"] == 1.0
        js = summary_json(s)
        assert "intervals" not in js and js["p_upper"]["2"] == pytest.approx(s["upper"].p(2))

    def test_correlations_need_three(self, triad_log):
        s = analyze_behavior(triad_log, "g")
        out = correlations([s, s])
        assert out["gini"]["r"] is None

    def test_curves_csv(self, triad_log, tmp_path):
        s = analyze_behavior(triad_log, "g")
        write_curves_csv([("g", s["upper"]), ("g", s["lower"])], tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "behavior,variant,k,adopted,ever_exposed,p"
        assert len(lines) == 1 + len(s["upper"].points) + len(s["lower"].points)
        assert all(0 <= float(line.split(",")[-1]) <= 1 for line in lines[1:])

    def test_nan_free_rates(self, triad_log):
        s = analyze_behavior(triad_log, "g")
        assert not math.isnan(s["precise_rate_all"])
