import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from armlab.arm import (ORACLE_MAX_RADIUS, ArmSpec, arm_event, arm_event_oracle, check_k,
                        four_arm_at_site, four_arm_from_counts, is_pivotal, pivotal_sites,
                        z_value)
from armlab.cluster import CLOSED, OPEN, annulus_crossing_count
from armlab.config import Configuration, sample
from armlab.lattice import Box, neighbors, ring

from conftest import two_columns
import reference as ref

lattices = st.sampled_from(["square", "triangular"])


def test_spec_defaults_and_colors():
    assert [ArmSpec(k, 3).n1 for k in (1, 2, 4)] == [0, 1, 1]
    assert ArmSpec(4, 3).colors == (OPEN, CLOSED, OPEN, CLOSED)
    assert ArmSpec(1, 3).colors == (OPEN,)
    with pytest.raises(ValueError):
        ArmSpec(2, 1, 1)


@pytest.mark.parametrize("k", [0, 3, 5, 9])
def test_unsupported_k_rejected(k):
    with pytest.raises(ValueError, match="k must be 1, 2, or 4"):
        check_k(k)
    with pytest.raises(ValueError):
        ArmSpec(k, 3)


@pytest.mark.parametrize("lattice", ["square", "triangular"])
def test_all_open_annulus(lattice):
    omega = Configuration.filled(3, 1, lattice=lattice)
    assert arm_event(omega, ArmSpec(1, 3))
    assert not arm_event(omega, ArmSpec(2, 3))
    assert not arm_event(omega, ArmSpec(4, 3))


@pytest.mark.parametrize("lattice", ["square", "triangular"])
def test_all_closed_has_no_one_arm(lattice):
    omega = Configuration.filled(3, 0, lattice=lattice)
    assert not arm_event(omega, ArmSpec(1, 3))
    assert not arm_event_oracle(omega, ArmSpec(1, 3))


def test_two_columns_have_four_arms():
    omega = two_columns()
    assert arm_event(omega, ArmSpec(4, 2))
    assert arm_event_oracle(omega, ArmSpec(4, 2))


def test_oracle_all_open_one_arm():
    assert arm_event_oracle(Configuration.filled(2, 1), ArmSpec(1, 2))


def test_oracle_radius_guard():
    n = ORACLE_MAX_RADIUS + 1
    with pytest.raises(ValueError):
        arm_event_oracle(Configuration.filled(n, 1), ArmSpec(1, n))


@pytest.mark.parametrize("lattice", ["square", "triangular"])
def test_one_arm_agrees_with_oracle_on_all_of_b1(lattice):
    for code in range(512):
        omega = Configuration.from_states(Box(1), [(code >> i) & 1 for i in range(9)], 0.5,
                                          lattice)
        spec = ArmSpec(1, 1)
        assert arm_event(omega, spec) == arm_event_oracle(omega, spec)


@pytest.mark.parametrize("lattice", ["square", "triangular"])
@pytest.mark.parametrize("k, n2", [(2, 3), (4, 3), (4, 4)])
def test_arm_event_agrees_with_oracle_sampled(lattice, k, n2):
    spec = ArmSpec(k, n2)
    for i in range(300):
        omega = sample(Box(n2), 0.5, 1000 + i, lattice)
        assert arm_event(omega, spec) == arm_event_oracle(omega, spec)


def test_four_arm_rule_from_counts():
    assert four_arm_from_counts(2, 0) and four_arm_from_counts(1, 2)
    assert not four_arm_from_counts(1, 1)
    assert four_arm_from_counts(np.array([0, 2]), np.array([1, 1])).tolist() == [False, True]


@given(st.integers(0, 10 ** 6), lattices, st.integers(2, 4))
def test_opening_a_site_keeps_one_arm_and_never_adds_a_closed_crossing(seed, lattice, n):
    omega = sample(Box(n), 0.5, seed, lattice)
    arm1 = arm_event(omega, ArmSpec(1, n))
    closed = annulus_crossing_count(omega, 1, n, CLOSED) >= 1
    for v in omega.box.sites():
        if omega.is_open(v):
            continue
        up = omega.flip(v)
        if arm1:
            assert arm_event(up, ArmSpec(1, n))
        if not closed:
            assert annulus_crossing_count(up, 1, n, CLOSED) == 0


def test_single_open_column_center_is_pivotal():
    omega = Configuration.from_function(2, lambda v: v[0] == 0)
    assert z_value(omega, 1) == 1
    assert z_value(omega.flip((0, 0)), 1) == 2
    assert is_pivotal(omega, (0, 0), 1)
    # independent recount
    assert ref.crossing_count(omega.flip((0, 0)), 1, 2) == 2


def test_all_open_and_all_closed_have_no_pivotal_sites():
    for n in (2, 3):
        full = Configuration.filled(2 * n, 1)
        empty = Configuration.filled(2 * n, 0)
        inner = [v for m in range(n) for v in ring(m)]
        assert all(not is_pivotal(full, v, n) for v in inner)
        assert all(not is_pivotal(empty, v, n) for v in inner)
        assert pivotal_sites(full, n) == set() == pivotal_sites(empty, n)


def test_pivotal_rejects_sites_outside_inner_box():
    with pytest.raises(ValueError):
        is_pivotal(Configuration.filled(4, 1), (2, 0), 2)


@given(st.integers(0, 10 ** 6), lattices)
def test_pivotal_sites_match_flip_and_recount(seed, lattice):
    omega = sample(Box(4), 0.5, seed, lattice)
    want = {v for m in range(2) for v in ring(m)
            if ref.crossing_count(omega.flip(v), 2, 4) != ref.crossing_count(omega, 2, 4)}
    assert pivotal_sites(omega, 2) == want


@pytest.mark.parametrize("lattice", ["square", "triangular"])
def test_four_arms_to_three_n_imply_pivotal(lattice):
    n = 2
    inner = [v for m in range(n) for v in ring(m)]
    hits = 0
    for i in range(1000):
        omega = sample(Box(4 * n), 0.5, 50_000 + i, lattice)
        piv = pivotal_sites(omega, n)
        for v in inner:
            if four_arm_at_site(omega, v, 3 * n):
                hits += 1
                assert v in piv
    assert hits > 0


@pytest.mark.parametrize("lattice", ["square", "triangular"])
def test_site_four_arms_at_two_n_is_pivotality_at_origin(lattice):
    for n in (1, 2):
        for i in range(300):
            omega = sample(Box(2 * n), 0.5, i, lattice)
            assert four_arm_at_site(omega, (0, 0), 2 * n) == is_pivotal(omega, (0, 0), n)


def test_four_arm_at_site_all_open_is_false():
    assert not four_arm_at_site(Configuration.filled(4, 1), (1, -1), 3)


@pytest.mark.parametrize("c", [(0, 0), (1, -2), (-2, 1)])
def test_translated_two_columns_have_site_four_arms(c):
    omega = two_columns(n=4, c=c)
    assert four_arm_at_site(omega, c, 2)
    assert arm_event_oracle(omega, ArmSpec(4, 2), center=c)
    assert arm_event(omega, ArmSpec(4, 2), center=c)


@given(st.integers(0, 10 ** 6), lattices)
def test_site_four_arms_match_two_reaching_neighbors(seed, lattice):
    # independent reading: two open neighbors whose clusters avoid v and stay separate
    omega = sample(Box(3), 0.5, seed, lattice)
    v, r = (0, 0), 3
    adj = ref.adjacency_name(lattice, 1)
    sites = [s for s in ref.color_sites(omega, 1) if s != v]
    comps = ref.components(sites, adj)
    nbrs = {tuple(u) for u in neighbors(v, omega.lattice.open_adjacency)}
    good = [c for c in comps if c & nbrs and any(max(abs(a), abs(b)) == r for a, b in c)]
    assert four_arm_at_site(omega, v, r) == (len(good) >= 2)
