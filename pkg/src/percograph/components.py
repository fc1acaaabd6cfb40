"""Connected-component labelling for sparse edge lists.

The partition contract used everywhere in the package: every vertex maps
to a cluster id, and the id is the smallest vertex index contained in the
cluster.  That makes labels deterministic, independent of edge order, and
directly comparable between runs.
"""

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

__all__ = ["component_labels", "label_sizes"]


def component_labels(n_vertices, u, v):
    """Canonical cluster ids for the graph on ``n_vertices`` with edges (u, v).

    Parameters
    ----------
    n_vertices : int
        Number of vertices; vertex ids are 0..n_vertices-1.
    u, v : array_like of int
        Edge endpoint arrays of equal length.  Parallel edges and isolated
        vertices are fine; self-loops are ignored by the underlying solver.

    Returns
    -------
    labels : ndarray of int64, shape (n_vertices,)
        ``labels[x]`` is the smallest vertex index in the cluster of ``x``.
    """
    n_vertices = int(n_vertices)
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if u.shape != v.shape:
        raise ValueError("endpoint arrays differ in length")
    if n_vertices == 0:
        return np.empty(0, dtype=np.int64)
    if u.size == 0:
        return np.arange(n_vertices, dtype=np.int64)
    data = np.ones(u.size, dtype=np.int8)
    adj = sparse.csr_matrix((data, (u, v)), shape=(n_vertices, n_vertices))
    _, raw = connected_components(adj, directed=False)
    # raw labels are arbitrary; canonicalize to min vertex index per cluster
    first = np.full(raw.max() + 1, n_vertices, dtype=np.int64)
    np.minimum.at(first, raw, np.arange(n_vertices, dtype=np.int64))
    return first[raw]


def label_sizes(labels):
    """Cluster sizes from a canonical label array.

    Returns
    -------
    ids : ndarray
        Sorted canonical cluster ids (ascending).
    sizes : ndarray
        ``sizes[i]`` is the number of vertices labelled ``ids[i]``.
    """
    ids, sizes = np.unique(labels, return_counts=True)
    return ids, sizes
