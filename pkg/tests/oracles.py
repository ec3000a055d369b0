"""Independent reference implementations used to check package results.

Everything here is written in the most literal style possible (pure
Python loops, no shared helpers from the package) on purpose: these are
the second route in every two-route check, so they must not reuse the
code under test.
"""

from __future__ import annotations

import numpy as np


def full_enumeration_maxcut(graph):
    """Optimum over all 2**n assignments, no symmetry shortcuts."""
    n = graph.n_vertices
    best = float("inf")
    winners = []
    for z in range(1 << n):
        total = 0.0
        for u, v, w in graph.edges:
            if ((z >> u) & 1) != ((z >> v) & 1):
                total -= w
        if total < best:
            best = total
            winners = [z]
        elif total == best:
            winners.append(z)
    return best, sorted(winners)


def central_difference_gradient(fn, theta, h=1e-5):
    """Plain central differences, one coordinate at a time."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for j in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (fn(up) - fn(dn)) / (2.0 * h)
    return grad


def dense_gp_posterior(x_train, y_train, x_query, kernel_fn, noise, mean):
    """GP posterior by explicit dense inverse (numerically naive on purpose)."""
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    x_query = np.asarray(x_query, dtype=float)
    n = len(x_train)
    big_k = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            big_k[i, j] = kernel_fn(x_train[i], x_train[j])
    big_k += noise * np.eye(n)
    k_inv = np.linalg.inv(big_k)
    means = []
    variances = []
    for q in x_query:
        kvec = np.array([kernel_fn(q, x_train[i]) for i in range(n)])
        means.append(mean + kvec @ k_inv @ (y_train - mean))
        variances.append(kernel_fn(q, q) - kvec @ k_inv @ kvec)
    return np.array(means), np.array(variances)
