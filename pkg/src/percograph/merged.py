"""Long-range overlay and the macro-vertex quotient.

The merged graph adds, on top of a sampled bond configuration, an
independent long-range edge between every unordered pair of sites with
probability c/n (n the number of sites).  Collapsing every percolation
cluster to one macro-vertex whose type is the cluster size produces a
quotient graph whose connected components correspond one-to-one to the
merged components, with sizes given by the summed types.  Both routes
are computed here independently so the correspondence can be checked,
not assumed.
"""

from dataclasses import dataclass, field

import numpy as np

from .components import component_labels
from .errors import DomainError
from .rng import STREAM_OVERLAY, generator

__all__ = [
    "MergedGraph",
    "overlay_long_range",
    "MacroGraph",
    "build_macro_graph",
    "verify_correspondence",
]

# Below this pair-count the sampler may enumerate all pairs outright.
_DENSE_PAIR_LIMIT = 1 << 21


def _sample_distinct_pairs(rng, n, m):
    """m distinct unordered pairs, uniform among the n(n-1)/2 available.

    Rejection sampling with first-appearance deduplication; dense draws
    fall back to enumerating the pair space.
    """
    n_pairs = n * (n - 1) // 2
    if m > n_pairs:
        raise DomainError("more distinct pairs requested than exist")
    if m == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    if n_pairs <= _DENSE_PAIR_LIMIT and m > n_pairs // 4:
        us, vs = np.triu_indices(n, k=1)
        pick = rng.choice(n_pairs, size=m, replace=False)
        return us[pick].astype(np.int64), vs[pick].astype(np.int64)
    keys = np.empty(0, dtype=np.int64)
    distinct = 0
    while distinct < m:
        batch = max(2 * (m - distinct), 64)
        a = rng.integers(0, n, size=batch, dtype=np.int64)
        b = rng.integers(0, n, size=batch, dtype=np.int64)
        ok = a != b
        lo = np.minimum(a[ok], b[ok])
        hi = np.maximum(a[ok], b[ok])
        keys = np.concatenate([keys, lo * n + hi])
        distinct = np.unique(keys).size
    # first m distinct pairs in draw order == sequential rejection sampling
    _, first_idx = np.unique(keys, return_index=True)
    take = keys[np.sort(first_idx)[:m]]
    return take // n, take % n


@dataclass(frozen=True)
class MergedGraph:
    """A bond configuration with its long-range overlay merged in.

    ``labels`` is the canonical partition of the merged graph (smallest
    vertex index per component), computed from the union of retained
    bonds and long-range edges.
    """

    base: object                     # PercolationConfig
    c: float
    seed: int
    long_u: np.ndarray = field(repr=False, compare=False)
    long_v: np.ndarray = field(repr=False, compare=False)
    labels: np.ndarray = field(repr=False, compare=False)
    component_ids: np.ndarray = field(repr=False, compare=False)
    component_sizes: np.ndarray = field(repr=False, compare=False)

    @property
    def n_long_edges(self):
        return self.long_u.size

    @property
    def n_components(self):
        return self.component_ids.size

    def sizes_desc(self):
        """Component sizes, largest first."""
        return np.sort(self.component_sizes)[::-1]

    @property
    def largest(self):
        return int(self.component_sizes.max()) if self.component_sizes.size else 0

    @property
    def second_largest(self):
        if self.component_sizes.size < 2:
            return 0
        return int(self.sizes_desc()[1])


def overlay_long_range(base, c, seed):
    """Superpose the sparse long-range graph on a bond configuration.

    The number of long-range edges is Binomial(n(n-1)/2, c/n); the edges
    themselves are that many distinct pairs drawn uniformly.  The draw is
    keyed by (base.seed, seed), so a merged graph is reproducible from
    its base configuration and the overlay seed alone.  Long-range edges
    parallel to retained bonds are legitimate and kept.
    """
    c = float(c)
    n = int(base.geometry.n_vertices)
    if c < 0.0 or c > n:
        raise DomainError(f"long-range density must lie in [0, n={n}], got {c}")
    rng = generator(base.seed, seed, STREAM_OVERLAY)
    n_pairs = n * (n - 1) // 2
    m = int(rng.binomial(n_pairs, c / n)) if c > 0.0 else 0
    long_u, long_v = _sample_distinct_pairs(rng, n, m)
    all_u = np.concatenate([base.open_u, long_u])
    all_v = np.concatenate([base.open_v, long_v])
    labels = component_labels(n, all_u, all_v)
    ids, sizes = np.unique(labels, return_counts=True)
    return MergedGraph(
        base=base, c=c, seed=int(seed),
        long_u=long_u, long_v=long_v,
        labels=labels, component_ids=ids, component_sizes=sizes,
    )


@dataclass(frozen=True)
class MacroGraph:
    """Quotient of a merged graph by the base cluster partition.

    Macro-vertex i is the i-th base cluster (in canonical id order); its
    type is the cluster size.  Long-range edges project to macro edges;
    edges landing inside one cluster, and parallel macro edges, are
    tallied separately rather than silently dropped.
    """

    n_macro: int
    types: np.ndarray = field(repr=False, compare=False)
    macro_labels: np.ndarray = field(repr=False, compare=False)
    component_ids: np.ndarray = field(repr=False, compare=False)
    macro_component_sizes: np.ndarray = field(repr=False, compare=False)
    expanded_sizes: np.ndarray = field(repr=False, compare=False)
    n_edges_multi: int = 0           # projected edges between distinct clusters
    n_edges_unique: int = 0          # distinct macro pairs among them
    n_intra: int = 0                 # long edges inside one base cluster


def build_macro_graph(merged):
    """Collapse base clusters to typed macro-vertices and recompute
    components in the quotient."""
    base = merged.base
    cid = np.searchsorted(base.cluster_ids, base.labels)   # compact cluster index
    types = base.cluster_sizes
    k_n = base.cluster_ids.size
    mu = cid[merged.long_u]
    mv = cid[merged.long_v]
    cross = mu != mv
    n_intra = int(np.count_nonzero(~cross))
    mu, mv = mu[cross], mv[cross]
    pair_keys = np.minimum(mu, mv) * k_n + np.maximum(mu, mv)
    n_unique = int(np.unique(pair_keys).size) if pair_keys.size else 0
    macro_labels = component_labels(k_n, mu, mv)
    ids, macro_sizes = np.unique(macro_labels, return_counts=True)
    # expanded size = summed types over each macro component
    expanded = np.zeros(ids.size, dtype=np.int64)
    np.add.at(expanded, np.searchsorted(ids, macro_labels), types)
    return MacroGraph(
        n_macro=int(k_n), types=types, macro_labels=macro_labels,
        component_ids=ids, macro_component_sizes=macro_sizes,
        expanded_sizes=expanded,
        n_edges_multi=int(mu.size), n_edges_unique=n_unique, n_intra=n_intra,
    )


def verify_correspondence(merged, macro=None):
    """Check that quotient components match merged components exactly.

    The construction makes this an identity, so the check is a guard
    against implementation bugs: component counts must agree and the
    multiset of merged component sizes must equal the multiset of
    type-sums over macro components.

    Returns
    -------
    (ok, report) : (bool, str)
        ``report`` is empty when ok, otherwise a short diff.
    """
    if macro is None:
        macro = build_macro_graph(merged)
    merged_sizes = np.sort(merged.component_sizes)
    expanded = np.sort(macro.expanded_sizes)
    problems = []
    if merged.n_components != macro.component_ids.size:
        problems.append(
            f"component counts differ: merged {merged.n_components}, "
            f"macro {macro.component_ids.size}"
        )
    if merged_sizes.size == expanded.size and not np.array_equal(merged_sizes, expanded):
        bad = np.nonzero(merged_sizes != expanded)[0][:5]
        diff = ", ".join(
            f"rank {i}: merged {merged_sizes[i]} vs macro {expanded[i]}" for i in bad
        )
        problems.append(f"size multisets differ: {diff}")
    ok = not problems
    return ok, "; ".join(problems)
