"""Long-range overlay, the typed quotient, and their correspondence."""

import dataclasses

import numpy as np
import pytest
from scipy import stats

from percograph import (
    build_geometry,
    build_macro_graph,
    overlay_long_range,
    sample_percolation,
    verify_correspondence,
)
from percograph.errors import DomainError
from percograph.merged import _sample_distinct_pairs
from percograph.rng import generator


def _base(d=1, N=100, p=0.4, seed=7, boundary="torus"):
    return sample_percolation(build_geometry(d, N, boundary), p, seed)


def test_zero_density_is_identity():
    base = _base()
    merged = overlay_long_range(base, 0.0, 3)
    assert merged.n_long_edges == 0
    assert np.array_equal(merged.labels, base.labels)
    assert merged.n_components == base.n_clusters


def test_component_identities():
    base = _base(p=0.5, seed=1)
    merged = overlay_long_range(base, 1.2, 9)
    n = base.geometry.n_vertices
    assert int(merged.component_sizes.sum()) == n
    assert merged.largest >= int(base.cluster_sizes.max())
    assert merged.n_components <= base.n_clusters
    desc = merged.sizes_desc()
    assert desc[0] == merged.largest
    assert np.all(np.diff(desc) <= 0)
    if merged.n_components >= 2:
        assert merged.second_largest == int(desc[1])


def test_long_edges_are_distinct_ordered_pairs():
    base = _base(N=300, p=0.3, seed=4)
    merged = overlay_long_range(base, 2.0, 11)
    n = base.geometry.n_vertices
    assert merged.n_long_edges > 0
    assert np.all(merged.long_u < merged.long_v)
    assert np.all((merged.long_u >= 0) & (merged.long_v < n))
    keys = merged.long_u * n + merged.long_v
    assert np.unique(keys).size == keys.size


def test_long_edge_count_mean():
    base = _base(N=200, p=0.3, seed=0)
    n = base.geometry.n_vertices
    c = 1.5
    counts = np.array([overlay_long_range(base, c, s).n_long_edges
                       for s in range(60)], dtype=float)
    mean = (n - 1) * c / 2.0
    se = np.sqrt(mean * (1 - c / n) / counts.size)
    assert abs(counts.mean() - mean) < 4 * se


def test_long_edge_count_distribution():
    # goodness of fit of the edge count against Binomial(n(n-1)/2, c/n)
    base = _base(N=50, p=0.2, seed=2)
    n = base.geometry.n_vertices
    c = 1.0
    n_pairs = n * (n - 1) // 2
    counts = np.array([overlay_long_range(base, c, s).n_long_edges
                       for s in range(200)])
    law = stats.binom(n_pairs, c / n)
    edges = np.append(law.ppf([0.0, 0.2, 0.4, 0.6, 0.8]).astype(int), n_pairs + 1)
    observed = np.histogram(counts, bins=edges)[0]
    expected = counts.size * np.array(
        [law.cdf(edges[i + 1] - 1) - law.cdf(edges[i] - 1)
         for i in range(len(edges) - 1)])
    assert np.all(expected > 5)
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    pval = float(stats.chi2.sf(chi2, df=len(observed) - 1))
    assert pval > 0.01


def test_pair_marginal_uniform():
    # each specific pair appears with probability ~ c/n
    rng_checks = 400
    base = _base(N=10, p=0.0, seed=5)
    n = base.geometry.n_vertices
    c = 2.0
    hits = 0
    for s in range(rng_checks):
        merged = overlay_long_range(base, c, s)
        keys = set((merged.long_u * n + merged.long_v).tolist())
        hits += (3 * n + 7) in keys  # an arbitrary fixed pair (3, 7)
    q = c / n
    se = np.sqrt(q * (1 - q) / rng_checks)
    assert abs(hits / rng_checks - q) < 4 * se


def test_dense_sampler_path():
    base = _base(N=10, p=0.1, seed=6)
    n = base.geometry.n_vertices
    merged = overlay_long_range(base, 0.8 * n, 13)  # m close to the pair count
    keys = merged.long_u * n + merged.long_v
    assert np.unique(keys).size == keys.size
    assert np.all(merged.long_u < merged.long_v)


def test_sampler_rejects_excess():
    rng = generator(0, 1)
    with pytest.raises(DomainError):
        _sample_distinct_pairs(rng, 4, 7)  # only 6 pairs exist
    u, v = _sample_distinct_pairs(rng, 4, 6)
    assert sorted((a, b) for a, b in zip(u.tolist(), v.tolist())) == [
        (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_density_bounds():
    base = _base(N=5)
    with pytest.raises(DomainError):
        overlay_long_range(base, -0.5, 0)
    with pytest.raises(DomainError):
        overlay_long_range(base, base.geometry.n_vertices + 1.0, 0)


def test_overlay_determinism():
    base = _base(N=80, p=0.35, seed=21)
    a = overlay_long_range(base, 1.0, 5)
    b = overlay_long_range(base, 1.0, 5)
    c = overlay_long_range(base, 1.0, 6)
    assert np.array_equal(a.long_u, b.long_u)
    assert np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.long_u, c.long_u)


def test_overlay_keyed_by_base_seed():
    geom = build_geometry(1, 80, "torus")
    b1 = sample_percolation(geom, 0.35, 1)
    b2 = sample_percolation(geom, 0.35, 2)
    m1 = overlay_long_range(b1, 1.0, 5)
    m2 = overlay_long_range(b2, 1.0, 5)
    assert not np.array_equal(m1.long_u, m2.long_u)


@pytest.mark.parametrize("d,N,p,c", [(1, 150, 0.4, 0.8), (2, 8, 0.45, 1.2),
                                     (1, 60, 0.0, 2.0), (2, 6, 0.9, 0.3)])
def test_quotient_correspondence(d, N, p, c):
    base = _base(d=d, N=N, p=p, seed=d * 10 + N)
    merged = overlay_long_range(base, c, 17)
    macro = build_macro_graph(merged)
    assert macro.n_macro == base.n_clusters
    assert int(macro.types.sum()) == base.geometry.n_vertices
    assert macro.n_intra + macro.n_edges_multi == merged.n_long_edges
    assert macro.n_edges_unique <= macro.n_edges_multi
    ok, report = verify_correspondence(merged, macro)
    assert ok, report
    # expanded sizes cover every site exactly once
    assert int(macro.expanded_sizes.sum()) == base.geometry.n_vertices


def test_correspondence_catches_tampering():
    base = _base(N=60, p=0.4, seed=3)
    merged = overlay_long_range(base, 1.0, 8)
    macro = build_macro_graph(merged)
    bad_sizes = macro.expanded_sizes.copy()
    bad_sizes[0] += 1
    broken = dataclasses.replace(macro, expanded_sizes=bad_sizes)
    ok, report = verify_correspondence(merged, broken)
    assert not ok
    assert "size multisets differ" in report

    fewer = dataclasses.replace(macro, component_ids=macro.component_ids[:-1])
    ok, report = verify_correspondence(merged, fewer)
    assert not ok
    assert "component counts differ" in report


def test_macro_type_histogram_matches_base_census():
    base = _base(N=120, p=0.5, seed=14)
    merged = overlay_long_range(base, 0.5, 4)
    macro = build_macro_graph(merged)
    assert np.array_equal(np.sort(macro.types), np.sort(base.cluster_sizes))
