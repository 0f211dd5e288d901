import math

import numpy as np
import pytest

from cbsep_lab.electrical import resistance_profile
from cbsep_lab.graph import Graph, make_family
from cbsep_lab.rwstats import (
    WalkSpec,
    cover_quantile_exact,
    cover_survival_exact,
    cover_time_quantile,
    cover_times_mc,
    expected_meeting_time,
    lazy_mixing_time,
    lazy_transition_matrix,
    meeting_time_mc,
)

import oracles


def with_chord(G, u, v):
    return Graph(G.n, tuple(sorted(set(G.edges) | {(min(u, v), max(u, v))})))


# ------------------------------------------------------------ lazy mixing


def test_complete2_lazy_walk_mixes_in_one_step():
    # P = [[1/2, 1/2], [1/2, 1/2]]: TV is 1/2 at t = 0 and exactly 0 from t = 1
    G = make_family("complete", 2)
    assert np.allclose(lazy_transition_matrix(G), 0.5)
    assert lazy_mixing_time(G) == 1
    assert oracles.lazy_tmix_iterate(2, G.edges) == 1


@pytest.mark.parametrize("spec", [("cycle", 8), ("path", 6), ("torus", 4, 2), ("bary_tree", 2, 3),
                                  ("hypercube", 4), ("random_regular", 14, 3, 2)],
                         ids=lambda s: ":".join(map(str, s)))
def test_lazy_mixing_against_iteration(spec):
    G = make_family(*spec)
    assert lazy_mixing_time(G) == oracles.lazy_tmix_iterate(G.n, G.edges)


def test_cycle8_lazy_mixing_value():
    assert lazy_mixing_time(make_family("cycle", 8)) == 6


def test_lazy_mixing_threshold_monotone_and_trivial():
    G = make_family("cycle", 9)
    ts = [lazy_mixing_time(G, th) for th in (0.4, 0.25, 0.1, 0.01)]
    assert ts == sorted(ts)
    assert lazy_mixing_time(make_family("path", 1)) == 0
    assert lazy_mixing_time(G, 1.0) == 0


@pytest.mark.parametrize("spec", [("cycle", 7), ("hypercube", 3), ("torus", 3, 2), ("complete", 5)])
def test_vertex_transitive_same_distance_from_every_start(spec):
    G = make_family(*spec)
    P = lazy_transition_matrix(G)
    pi = np.full(G.n, 1.0 / G.n)
    M = np.eye(G.n)
    for _ in range(12):
        tv = 0.5 * np.abs(M - pi).sum(axis=1)
        assert np.ptp(tv) < 1e-12
        M = M @ P


def test_walk_spec_kinds():
    G = make_family("cycle", 4)
    assert WalkSpec("discrete_lazy", G).kind == "discrete_lazy"
    with pytest.raises(ValueError):
        WalkSpec("lazy", G)


# ------------------------------------------------------------ meeting time


def test_meeting_time_complete2():
    mt = expected_meeting_time(make_family("complete", 2))
    assert mt.method == "exact"
    assert mt.value == pytest.approx(0.25, abs=1e-12)
    assert expected_meeting_time(make_family("path", 1)).value == 0.0


def test_meeting_time_cycle6_against_pair_chain():
    G = make_family("cycle", 6)
    assert expected_meeting_time(G).value == pytest.approx(1.4583333333333337, rel=1e-12)
    assert expected_meeting_time(G).value == pytest.approx(oracles.meeting_dense(6, G.edges), rel=1e-12)


@pytest.mark.parametrize("spec", [("path", 5), ("torus", 3, 2), ("bary_tree", 2, 2), ("random_regular", 12, 3, 4)],
                         ids=lambda s: ":".join(map(str, s)))
def test_meeting_time_against_oracle(spec):
    G = make_family(*spec)
    assert expected_meeting_time(G).value == pytest.approx(oracles.meeting_dense(G.n, G.edges), rel=1e-10)


@pytest.mark.parametrize("spec", [("cycle", 6), ("hypercube", 3), ("path", 8), ("torus", 5, 2),
                                  ("random_regular", 50, 3, 1)],
                         ids=lambda s: ":".join(map(str, s)))
def test_meeting_time_mc_within_three_se(spec):
    G = make_family(*spec)
    exact = expected_meeting_time(G).value
    mc = meeting_time_mc(G, samples=3000, seed=12)
    assert mc.method == "mc" and mc.stderr > 0
    assert abs(mc.value - exact) < 3 * mc.stderr


def test_meeting_time_falls_back_to_mc(monkeypatch):
    from cbsep_lab import rwstats
    monkeypatch.setattr(rwstats, "MEETING_EXACT_CAP", 4)
    mt = rwstats.expected_meeting_time(make_family("cycle", 6), mc_samples=2000, seed=3)
    assert mt.method == "mc"
    assert abs(mt.value - 1.4583333333333337) < 3 * mt.stderr


@pytest.mark.parametrize("n", range(5, 13))
def test_chord_does_not_slow_meeting(n):
    G = make_family("cycle", n)
    assert expected_meeting_time(with_chord(G, 0, n // 2)).value <= expected_meeting_time(G).value


@pytest.mark.parametrize("family,sizes", [
    ("cycle", [(8,), (16,), (32,)]), ("torus", [(3, 2), (5, 2), (7, 2)]),
    ("hypercube", [(3,), (5,), (7,)]), ("complete", [(4,), (8,), (16,)]),
])
def test_meeting_time_over_n_max_resistance_in_band(family, sizes):
    for args in sizes:
        G = make_family(family, *args)
        r = expected_meeting_time(G).value / (G.n * resistance_profile(G).Rbar_max)
        assert 0.1 <= r <= 10


# ------------------------------------------------------------ cover time


@pytest.mark.parametrize("spec,start", [(("path", 3), 0), (("cycle", 4), 1), (("bary_tree", 2, 1), 0),
                                        (("complete", 4), 2)])
def test_discrete_cover_survival_against_path_sum(spec, start):
    G = make_family(*spec)
    steps = np.arange(0, 9)
    S = cover_survival_exact(G, steps)
    for t in steps:
        assert S[start, t] == pytest.approx(oracles.cover_survival_paths(G.n, G.edges, start, int(t)), abs=1e-12)


def test_continuous_cover_complete2_is_exponential():
    grid = np.array([0.0, 0.5, 1.0, 2.0])
    S = cover_survival_exact(make_family("complete", 2), grid, kind="continuous")
    assert np.allclose(S, np.exp(-grid)[None, :], atol=1e-12)


def test_continuous_cover_exact_against_mc():
    G = make_family("cycle", 5)
    grid = np.array([1.0, 3.0, 6.0])
    S = cover_survival_exact(G, grid, kind="continuous")
    T = cover_times_mc(G, 0, 4000, np.random.default_rng(5), kind="continuous")
    emp = (T[:, None] > grid[None, :]).mean(axis=0)
    tol = 4 * np.sqrt(S[0] * (1 - S[0]) / 4000) + 1e-3
    assert np.all(np.abs(emp - S[0]) <= tol)


def test_cover_quantile_small_cases():
    assert cover_quantile_exact(make_family("path", 1)) == 0
    assert cover_quantile_exact(make_family("complete", 2)) == 1
    # path(3) from the middle: 1, 0, 1 is forced, then the far end w.p. 1/2 every two steps,
    # so P(cover > t) = 1, 1, 1, 1/2, 1/2, 1/4 for t = 0..5; the end starts are faster
    assert cover_quantile_exact(make_family("path", 3)) == 5
    assert cover_survival_exact(make_family("path", 3), range(6))[1].tolist() == [1, 1, 1, 0.5, 0.5, 0.25]
    cq = cover_time_quantile(make_family("path", 1), 100, seed=0)
    assert cq.value == 0.0


def test_cover_quantile_complete2_continuous_is_one():
    cq = cover_time_quantile(make_family("complete", 2), samples=4000, seed=8, kind="continuous")
    assert cq.lower <= 1.0 <= cq.upper
    assert cq.value == pytest.approx(1.0, rel=0.08)


@pytest.mark.parametrize("spec", [("cycle", 6), ("torus", 3, 2), ("bary_tree", 2, 2)])
def test_cover_quantile_exact_inside_mc_band(spec):
    G = make_family(*spec)
    exact = cover_quantile_exact(G)
    cq = cover_time_quantile(G, samples=3000, seed=2)
    assert cq.lower <= exact <= cq.upper
    assert np.all(cq.per_start_lower <= cq.per_start) and np.all(cq.per_start <= cq.per_start_upper)


def test_cover_quantile_torus4_band():
    cq = cover_time_quantile(make_family("torus", 4, 2), samples=500, seed=1)
    assert cq.lower <= cq.value <= cq.upper
    assert 16 <= cq.lower and cq.upper < 200
    assert np.ptp(cq.per_start) <= cq.upper - cq.lower


def test_cover_argument_errors():
    G = make_family("cycle", 4)
    with pytest.raises(ValueError):
        cover_time_quantile(G, samples=50, seed=0)
    with pytest.raises(ValueError):
        cover_times_mc(G, 0, 10, np.random.default_rng(0), kind="lazy")
    with pytest.raises(ValueError):
        cover_survival_exact(make_family("cycle", 13), [1.0])
    assert math.isfinite(cover_quantile_exact(make_family("cycle", 12)))
