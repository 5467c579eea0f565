"""Generated benchmark graph: determinism, structural realism, and the
CSV round trip."""

import numpy as np
import pytest

from tempora.datasets import (SurrogateConfig, generate_interaction_network,
                              write_edge_csv)
from tempora.graph import chronological_split, load_edge_list, \
    waiting_time_stats


def small_cfg(**overrides):
    base = dict(num_nodes=40, num_edges=3000, span_seconds=1e6, seed=3)
    base.update(overrides)
    return SurrogateConfig(**base)


class TestGeneration:
    def test_shapes_and_value_ranges(self):
        g = generate_interaction_network(small_cfg())
        assert g.num_edges == 3000 and g.num_nodes == 40
        assert g.src.min() >= 1 and g.dst.max() <= 40
        assert np.all(g.src != g.dst)
        assert np.all(np.diff(g.t) >= 0)
        assert g.t.min() >= 0 and g.t.max() <= 1e6
        assert np.all(g.t == np.floor(g.t))   # whole seconds
        assert g.d_V == 0 and g.d_E == 0

    def test_seed_determinism(self):
        a = generate_interaction_network(small_cfg())
        b = generate_interaction_network(small_cfg())
        np.testing.assert_array_equal(a.src, b.src)
        np.testing.assert_array_equal(a.dst, b.dst)
        np.testing.assert_array_equal(a.t, b.t)
        c = generate_interaction_network(small_cfg(seed=4))
        assert not np.array_equal(a.src, c.src)

    def test_repeat_structure(self):
        """A majority of events revisit pairs seen before, like a real
        messaging trace."""
        g = generate_interaction_network(SurrogateConfig(seed=0))
        unique = len(set(zip(g.src.tolist(), g.dst.tolist())))
        assert 0.25 < unique / g.num_edges < 0.45

    def test_heavy_tailed_activity(self):
        g = generate_interaction_network(SurrogateConfig(seed=0))
        deg = np.bincount(np.concatenate([g.src, g.dst]))[1:]
        top = np.sort(deg)[-len(deg) // 20:]
        assert top.sum() > 0.3 * deg.sum()   # top 5% carry >30% of events
        assert deg.max() > 20 * np.median(deg)

    def test_waiting_times_stretch_late_in_the_window(self):
        """Decaying activity makes the time since a node's previous event
        grow across the chronological splits."""
        g = generate_interaction_network(SurrogateConfig(seed=0))
        stats = waiting_time_stats(g, chronological_split(g))
        train = stats["train"]["source"]["median"]
        test = stats["test"]["source"]["median"]
        assert test > 2.0 * train

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SurrogateConfig(num_nodes=1)
        with pytest.raises(ValueError):
            SurrogateConfig(repeat_prob=1.0)
        with pytest.raises(ValueError):
            SurrogateConfig(span_seconds=0.0)


class TestCsvRoundTrip:
    def test_written_file_loads_back_identically(self, tmp_path):
        g = generate_interaction_network(small_cfg())
        # every node appears, so the loader's dense relabeling is identity
        assert len(np.union1d(g.src, g.dst)) == g.num_nodes
        path = tmp_path / "edges.csv"
        write_edge_csv(g, path)
        loaded = load_edge_list(path)
        np.testing.assert_array_equal(loaded.src, g.src)
        np.testing.assert_array_equal(loaded.dst, g.dst)
        np.testing.assert_array_equal(loaded.t, g.t)
        assert loaded.num_nodes == g.num_nodes
