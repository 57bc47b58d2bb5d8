import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from armlab import mc
from armlab.arm import z_value
from armlab.config import Configuration, TrackedConfiguration, draw_states, sample, stream
from armlab.explore import (CompiledExplorer, PartialReader, Unrevealed, check_flip_invariance,
                            explore, replay, revealment_profile)
from armlab.lattice import Box, Lattice, norm, ring

from conftest import two_columns
import reference as ref

lattices = st.sampled_from(["square", "triangular"])


def deep(trace, n):
    return {v for v in trace.visited if norm(v) <= n - 1}


@pytest.mark.parametrize("lattice", ["square", "triangular"])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_all_closed(lattice, n):
    tr = explore(Configuration.filled(2 * n, 0, lattice=lattice), n)
    assert tr.z == 0
    assert tr.visited == set(ring(2 * n))
    assert not deep(tr, n)


@pytest.mark.parametrize("lattice", ["square", "triangular"])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_all_open(lattice, n):
    tr = explore(Configuration.filled(2 * n, 1, lattice=lattice), n)
    assert tr.z == 1 and not deep(tr, n)


def test_two_columns():
    omega = two_columns()
    tr = explore(omega, 1)
    assert tr.z_from_exploration == 2 == z_value(omega, 1)


def test_explore_requires_cover():
    with pytest.raises(ValueError):
        explore(Configuration.filled(3, 1), 2)


@given(st.integers(0, 10 ** 6), lattices, st.integers(1, 5), st.floats(0.35, 0.7))
def test_z_matches_union_find(seed, lattice, n, p):
    omega = sample(Box(2 * n), p, seed, lattice)
    assert explore(omega, n).z == z_value(omega, n)


@pytest.mark.parametrize("lattice", ["square", "triangular"])
def test_z_matches_on_every_inner_configuration(lattice):
    # B_1 enumerated exhaustively inside random outer rings of B_2
    rng = np.random.default_rng(3)
    box = Box(2)
    inner = [box.index(v) for v in Box(1).sites()]
    for _ in range(4):
        outer = rng.integers(0, 2, box.size).astype(np.uint8)
        for code in range(512):
            s = outer.copy()
            s[inner] = [(code >> i) & 1 for i in range(9)]
            omega = Configuration.from_states(box, s, 0.5, lattice)
            assert explore(omega, 1).z == z_value(omega, 1)


@pytest.mark.parametrize("lattice", [Lattice.SQUARE, Lattice.TRIANGULAR])
@pytest.mark.parametrize("n, nb", [(1, 2), (2, 4), (3, 7), (4, 8)])
def test_compiled_port_reveals_identically(lattice, n, nb):
    ex = CompiledExplorer(lattice, nb, n)
    box = Box(nb)
    for i in range(200):
        s = draw_states(stream(2, i), nb, 0.5)
        omega = Configuration.from_states(box, s, 0.5, lattice)
        tr = explore(omega, n)
        z, seq = ex.run(s)
        assert z == tr.z
        assert [box.site(j) for j in seq] == [v for v, _ in tr.reveals]


def test_flip_invariance_all_open():
    assert check_flip_invariance(Configuration.filled(4, 1), 2)


def test_flip_invariance_two_columns_center():
    omega = two_columns()
    assert z_value(omega.flip((0, 0)), 1) != z_value(omega, 1)
    assert explore(omega, 1).y((0, 0)) == explore(omega.flip((0, 0)), 1).y((0, 0))
    assert check_flip_invariance(omega, 1)


@pytest.mark.parametrize("lattice", ["square", "triangular"])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_flip_invariance_random(lattice, n):
    count = 200 if n < 4 else 1000
    if n < 4:
        for i in range(count):
            assert check_flip_invariance(sample(Box(2 * n), 0.5, i, lattice), n)
        return
    # larger boxes through the compiled port, which reveals identically
    lat = Lattice.parse(lattice)
    ex = CompiledExplorer(lat, 2 * n, n)
    box = Box(2 * n)
    inner = [box.index(v) for m in range(n) for v in ring(m)]
    for i in range(count):
        s = draw_states(stream(8, i), 2 * n, 0.5)
        _, seq = ex.run(s)
        seen = set(seq.tolist())
        for j in inner:
            t = s.copy()
            t[j] ^= 1
            _, seq2 = ex.run(t)
            assert (j in seen) == (j in set(seq2.tolist()))


@given(st.integers(0, 10 ** 6), lattices, st.integers(1, 4))
def test_trace_invariants(seed, lattice, n):
    omega = sample(Box(2 * n), 0.5, seed, lattice)
    tr = explore(omega, n)
    sites = [v for v, _ in tr.reveals]
    assert len(sites) == len(set(sites)) and set(sites) == tr.visited
    assert all(s == omega.state(v) for v, s in tr.reveals)
    for path in tr.interfaces:
        edges = [frozenset(e) for e in zip(path, path[1:])]
        assert len(edges) == len(set(edges))
    assert replay(omega, tr)


@given(st.integers(0, 10 ** 6), lattices, st.integers(1, 4))
def test_deep_visits_have_two_arms(seed, lattice, n):
    omega = sample(Box(2 * n), 0.5, seed, lattice)
    lat = omega.lattice
    for v in deep(explore(omega, n), n):
        opens = [tuple(u) for u in ref_neighbors(v, lat, 1)]
        closes = [tuple(u) for u in ref_neighbors(v, lat, 0)]
        assert ref.reaches(omega, opens, 1, 2 * n, avoid=tuple(v))
        assert ref.reaches(omega, closes, 0, 2 * n, avoid=tuple(v))


def ref_neighbors(v, lat, color):
    return [(v[0] + dx, v[1] + dy) for dx, dy in lat.adjacency(color).offsets]


def test_dump_lists_reveals():
    omega = Configuration.filled(2, 0)
    tr = explore(omega, 1)
    lines = tr.dump().splitlines()
    assert len(lines) == 16 and lines[0] == "(2,-2,0)"


def test_exploration_only_reads_through_the_reader():
    omega = sample(Box(4), 0.5, 7)
    tracked = TrackedConfiguration(omega)
    tr = explore(tracked, 2)
    assert tracked.accessed_sites() == tr.visited


def test_partial_reader_stops_at_first_unknown_site():
    omega = sample(Box(4), 0.5, 11)
    tr = explore(omega, 2)
    first = dict(tr.reveals[:5])
    reader = PartialReader(omega.lattice, 4, first)
    with pytest.raises(Unrevealed) as exc:
        explore(reader, 2)
    assert exc.value.site == tr.reveals[5][0]


def test_profile_zero_for_all_open():
    prof = revealment_profile([Configuration.filled(6, 1)] * 3, 3)
    assert prof.count == 3 and not prof.mean.any()


def test_profile_requires_samples():
    with pytest.raises(ValueError):
        revealment_profile([], 2)


@pytest.mark.parametrize("lattice, turns", [("square", 1), ("triangular", 2)])
def test_profile_is_rotation_symmetric(lattice, turns):
    # the law is invariant under a quarter turn (square) or half turn (triangular)
    n = 3
    prof = revealment_profile((sample(Box(2 * n), 0.5, i, lattice) for i in range(3000)), n)
    for m in range(n):
        for v in ring(m):
            w = v
            for _ in range(turns):
                w = (-w[1], w[0])
            i, j = (v[1] + n - 1, v[0] + n - 1), (w[1] + n - 1, w[0] + n - 1)
            se = math.hypot(prof.stderr[i], prof.stderr[j])
            assert abs(prof.mean[i] - prof.mean[j]) <= 3 * se + 1e-12


def test_deep_revealment_tracks_two_arm_probability():
    # c(n) = max_j E[Y_j] / pi_2(n) measured over scales: no growth beyond 3 sigma
    lattice = "triangular"
    ns, ratios, errs = [2, 4, 8], [], []
    pi2 = mc.estimate_pi_scales([2], [n for n in ns], 4000, lattice, 0.5, seed=5)
    for n in ns:
        prof = revealment_profile((sample(Box(2 * n), 0.5, 10_000 + i, lattice)
                                   for i in range(1500)), n)
        k = np.unravel_index(np.argmax(prof.mean), prof.mean.shape)
        e = pi2[(2, n)]
        r = prof.mean[k] / e.mean
        ratios.append(r)
        errs.append(r * math.hypot(prof.stderr[k] / prof.mean[k], e.stderr / e.mean))
        assert prof.mean[k] <= 1.0
    tr = mc.trend(ns, ratios, errs, log_values=True)
    assert not tr.increasing
