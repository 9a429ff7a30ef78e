import numpy as np
import pytest

from nfsec import bcd, ports
from nfsec.errors import ConfigurationError, NumericalError

from conftest import random_whitened_pair


def test_row_energies_formula():
    w = np.array([[1.0, 2.0], [0.0, 0.0], [3.0, 0.0]], dtype=complex)
    v = np.array([0.0, 2.0, 4.0], dtype=complex)
    want = np.sqrt([5.0, 4.0, 25.0])
    assert np.allclose(ports.row_energies(w, v), want)


def test_batch_schedule_halves_the_surplus():
    sizes = []
    s = 64
    while s > 16:
        d = ports.batch_size(s, 16)
        sizes.append(d)
        s -= d
    assert sizes == [24, 12, 6, 3, 1, 1, 1]
    assert ports.batch_size(16, 16) == 0
    assert ports.batch_size(12, 16) == 0
    assert ports.batch_size(17, 16) == 1


def test_prune_breaks_ties_toward_smaller_index():
    kept, dropped = ports.prune_support([3, 5, 9], [1.0, 1.0, 2.0], 1)
    assert dropped.tolist() == [3]
    assert kept.tolist() == [5, 9]
    kept, dropped = ports.prune_support([3, 5, 9], [1.0, 1.0, 2.0], 0)
    assert dropped.size == 0 and kept.tolist() == [3, 5, 9]
    with pytest.raises(ConfigurationError):
        ports.prune_support([3, 5], [1.0, 1.0], 2)


def test_uniform_support_spreads_evenly():
    assert ports.uniform_support(64, 16).tolist() == [
        0, 4, 8, 13, 17, 21, 25, 29, 34, 38, 42, 46, 50, 55, 59, 63]
    assert ports.uniform_support(8, 3).tolist() == [0, 4, 7]
    assert ports.uniform_support(9, 1).tolist() == [4]
    with pytest.raises(ConfigurationError):
        ports.uniform_support(4, 5)


def test_selection_matrix_extracts_columns():
    rng = np.random.default_rng(50)
    h = rng.standard_normal((3, 7)) + 1j * rng.standard_normal((3, 7))
    p = ports.selection_matrix([1, 4, 6], 7)
    assert p.shape == (7, 3)
    assert np.array_equal(h @ p, h[:, [1, 4, 6]])
    with pytest.raises(ConfigurationError):
        ports.selection_matrix([0, 7], 7)
    with pytest.raises(ConfigurationError):
        ports.selection_matrix([2, 2], 7)


def test_select_ports_returns_valid_support():
    rng = np.random.default_rng(51)
    h_bob, h_eve = random_whitened_pair(rng, 2, 2, 10)
    res = ports.select_ports(h_bob, h_eve, 4, 1.0, 1, rng,
                             ports.SelectionOptions(refit_iters=10,
                                                    final_iters=30))
    assert len(res.support) == 4
    assert list(res.support) == sorted(res.support)
    assert all(0 <= i < 10 for i in res.support)
    total = (np.sum(np.abs(res.state.w) ** 2)
             + np.sum(np.abs(res.state.v) ** 2))
    assert total <= 1.0 * (1 + 1e-9)
    # stage supports shrink and chain consistently
    sizes = [len(s.support) for s in res.stages]
    assert sizes == sorted(sizes, reverse=True)
    assert res.state.support == res.support


def test_select_ports_validates_sizes():
    rng = np.random.default_rng(52)
    h_bob, h_eve = random_whitened_pair(rng, 2, 2, 6)
    with pytest.raises(ConfigurationError):
        ports.select_ports(h_bob, h_eve, 7, 1.0, 1, rng)
    with pytest.raises(ConfigurationError):
        ports.select_ports(h_bob, h_eve, 2, 1.0, 3, rng)


def test_select_ports_drops_dead_port():
    # one rail position sees (almost) no channel at either receiver:
    # its refit rows collapse and the scheduler must prune it
    rng = np.random.default_rng(53)
    h_bob, h_eve = random_whitened_pair(rng, 2, 2, 8)
    dead = 5
    h_bob[:, dead] *= 1e-9
    h_eve[:, dead] *= 1e-9
    res = ports.select_ports(h_bob, h_eve, 3, 1.0, 1, rng)
    assert dead not in res.support


def test_select_ports_survives_refit_failure(monkeypatch):
    rng = np.random.default_rng(54)
    h_bob, h_eve = random_whitened_pair(rng, 2, 2, 9)
    opts = ports.SelectionOptions(refit_iters=7, final_iters=25)
    real = bcd.bcd_optimize

    def flaky(*args, **kwargs):
        if kwargs.get("options") and kwargs["options"].max_iters == 7:
            raise NumericalError("synthetic stage failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(bcd, "bcd_optimize", flaky)
    res = ports.select_ports(h_bob, h_eve, 3, 1.0, 1, rng, opts)
    assert len(res.support) == 3
    assert all(s.refit_failed for s in res.stages)


def test_hybrid_scores_need_chain_count():
    rng = np.random.default_rng(55)
    h_bob, h_eve = random_whitened_pair(rng, 2, 2, 8)
    with pytest.raises(ConfigurationError):
        ports.select_ports(
            h_bob, h_eve, 3, 1.0, 1, rng,
            ports.SelectionOptions(score_source="hybrid"))
    res = ports.select_ports(
        h_bob, h_eve, 3, 1.0, 1, rng,
        ports.SelectionOptions(score_source="hybrid", num_rf_chains=2,
                               refit_iters=8, final_iters=20))
    assert len(res.support) == 3
    with pytest.raises(ConfigurationError):
        ports.select_ports(
            h_bob, h_eve, 3, 1.0, 1, rng,
            ports.SelectionOptions(score_source="analog"))
