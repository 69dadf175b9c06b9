"""Exhaustive nearest-lattice-point oracle used by the lattice decode tests.

Independent of the package's decoder: enumerates every candidate in a window
that provably contains the optimum and takes the distance minimum directly.
"""

import itertools

import numpy as np

from qfix.vquant import embedding_basis, glue_vectors


def brute_nearest_distance(y, scale, n):
    """Distances from rows of y to the nearest scaled lattice point.

    Any lattice point within covering distance of y sits, in hyperplane
    coordinates, within R(n) < 1 of y per coordinate; the offset window
    floor+{-1,0,1,2} covers every integer within +/-1 of a real number, so
    the enumerated candidate set contains the true nearest point.
    """
    basis = embedding_basis(n)
    glue = glue_vectors(n)
    z = (np.atleast_2d(np.asarray(y, dtype=float)) / scale) @ basis
    m = z.shape[0]
    offsets = np.array(list(itertools.product(range(-1, 3), repeat=n)), dtype=float)
    best_d2 = np.full(m, np.inf)
    for g in glue:
        base = np.floor(z[:, :n] - g[:n])
        for off in offsets:
            f_head = base + off
            f_last = -f_head.sum(axis=1, keepdims=True)
            cand = g + np.concatenate([f_head, f_last], axis=1)
            d2 = np.sum((z - cand) ** 2, axis=1)
            np.minimum(best_d2, d2, out=best_d2)
    return scale * np.sqrt(best_d2)
