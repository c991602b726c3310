import itertools

import pytest

from locwp.combinat import (
    blocks_from_signs,
    composition_to_signs,
    compositions,
    compositions_star,
    enumerate_chains,
    is_chain,
    is_valid_sign_sequence,
    sign_sequences,
)
from locwp.depgraph import build_from_edge_list, build_mdependent_lattice


def _brute_compositions(t):
    out = []
    for cuts in itertools.product((0, 1), repeat=t - 1):
        parts, run = [], 1
        for c in cuts:
            if c:
                parts.append(run)
                run = 1
            else:
                run += 1
        out.append(tuple(parts + [run]))
    return sorted(out)


@pytest.mark.parametrize("t", range(1, 9))
def test_compositions_match_bruteforce(t):
    assert sorted(compositions(t)) == _brute_compositions(t)
    assert len(compositions(t)) == 2 ** (t - 1)


@pytest.mark.parametrize("t", range(2, 10))
def test_star_count_and_bijection(t):
    star = compositions_star(t)
    assert star == [c for c in compositions(t) if min(c[:-1], default=2) >= 2]
    if t >= 3:
        # C*(k+2) and M_{1,k+2} are in bijection
        assert sorted(composition_to_signs(c) for c in star) == sorted(sign_sequences(t - 2))
        for c in star:
            assert blocks_from_signs(composition_to_signs(c)) == c


def test_sign_sequences_small():
    assert sorted(sign_sequences(1)) == [(0, -1, -2), (0, -1, 2)]
    assert len(sign_sequences(2)) == 3
    for t in sign_sequences(4):
        assert is_valid_sign_sequence(t)
        assert all(min(a, b) < 0 for a, b in zip(t, t[1:]))
    assert not is_valid_sign_sequence((1, -1))


def test_chains_on_path():
    g = build_from_edge_list([(0, 1)])
    chains = list(enumerate_chains(g, 3))
    assert len(chains) == 8
    g3 = build_from_edge_list([(0, 1), (1, 2)])
    assert len(list(enumerate_chains(g3, 2))) == 7
    assert all(is_chain(g3, c) for c in enumerate_chains(g3, 3))


def test_chains_respect_sign_sequence():
    g = build_mdependent_lattice(range(5), 1)
    t = (0, -1, 2)
    for c in enumerate_chains(g, 3, t):
        assert c[1] in g.neighborhood_set(c[:1])
        assert c[2] in g.neighborhood_set(c[:2])
    # t_j = 0 leaves nothing to choose
    assert list(enumerate_chains(g, 2, (0, 0))) == []
