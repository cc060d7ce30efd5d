"""Graph containers, a planted-partition generator and pixel affinities."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidShape, InvalidSpec

log = logging.getLogger(__name__)


@dataclass
class EdgeListGraph:
    """Undirected weighted graph on vertices ``0..n-1``.

    Built through :meth:`from_edges`, which merges duplicate edges by
    summing weights and drops self-loops (their count is kept in
    ``dropped_self_loops``).
    """

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    dropped_self_loops: int = 0

    @classmethod
    def from_edges(cls, u, v, w=None, n=None):
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        w = np.ones(u.size) if w is None else np.asarray(w, dtype=float).ravel()
        if not (u.size == v.size == w.size):
            raise InvalidShape("edge arrays must have equal length")
        if u.size and (u.min() < 0 or v.min() < 0):
            raise ValueError("vertex ids must be non-negative")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("edge weights must be finite and positive")
        top = int(max(u.max(initial=-1), v.max(initial=-1))) + 1
        n = top if n is None else int(n)
        if n < top:
            raise InvalidShape(f"vertex id {top - 1} out of range for n={n}")
        loops = u == v
        n_loops = int(loops.sum())
        if n_loops:
            log.warning("dropped %d self-loop(s)", n_loops)
        u, v, w = u[~loops], v[~loops], w[~loops]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        if lo.size:
            key = lo * n + hi
            uniq, inv = np.unique(key, return_inverse=True)
            w = np.bincount(inv, weights=w)
            lo, hi = uniq // n, uniq % n
        return cls(n=n, u=lo, v=hi, w=np.asarray(w, dtype=float), dropped_self_loops=n_loops)

    @property
    def m(self):
        return int(self.u.size)

    def adjacency(self):
        """Symmetric CSR adjacency matrix."""
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        data = np.concatenate([self.w, self.w])
        A = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        A.sort_indices()
        return A

    @classmethod
    def from_adjacency(cls, A):
        A = sp.triu(sp.csr_matrix(A), k=1).tocoo()
        return cls.from_edges(A.row, A.col, A.data, n=A.shape[0])


@dataclass(frozen=True)
class PlantedPartitionSpec:
    """Equal-block planted partition with mixing ``mu_mix``.

    Each vertex expects ``avg_degree`` edges, a fraction ``mu_mix`` of them
    leaving its block.
    """

    n: int
    q: int
    mu_mix: float = 0.1
    avg_degree: float = 20.0
    seed: int = 0

    def probabilities(self):
        n, q = self.n, self.q
        if q < 1 or n < 2 or n % q:
            raise InvalidSpec(f"n={n} must be a positive multiple of q={q}")
        if not 0.0 <= self.mu_mix < 1.0:
            raise InvalidSpec("mu_mix must lie in [0, 1)")
        if not 0.0 < self.avg_degree < n:
            raise InvalidSpec(f"avg_degree must lie in (0, n), got {self.avg_degree}")
        s = n // q
        if s < 2:
            raise InvalidSpec("blocks need at least two vertices")
        p_in = self.avg_degree * (1.0 - self.mu_mix) / (s - 1)
        p_out = self.avg_degree * self.mu_mix / (n - s) if q > 1 else 0.0
        if p_in > 1.0 or p_out > 1.0:
            raise InvalidSpec(f"infeasible edge probabilities p_in={p_in:.3g}, p_out={p_out:.3g}")
        return p_in, p_out


def _tri_decode(k):
    # k-th pair (i, j), i < j, in the order (0,1), (0,2), (1,2), (0,3), ...
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * k)) / 2.0).astype(np.int64)
    j[j * (j - 1) // 2 > k] -= 1
    j[(j + 1) * j // 2 <= k] += 1
    i = k - j * (j - 1) // 2
    return i, j


def generate_planted(spec):
    """Sample a planted-partition graph and its ground-truth labels.

    Edge counts per block pair are binomial and the pairs are drawn without
    replacement, so the cost is linear in the number of edges.
    """
    from .clustering import Partition

    p_in, p_out = spec.probabilities()
    rng = np.random.default_rng(spec.seed)
    n, q = spec.n, spec.q
    s = n // q
    us, vs = [], []
    for a in range(q):
        for b in range(a, q):
            if a == b:
                total, p = s * (s - 1) // 2, p_in
            else:
                total, p = s * s, p_out
            if total == 0 or p == 0.0:
                continue
            k = rng.binomial(total, p)
            idx = rng.choice(total, size=k, replace=False)
            if a == b:
                i, j = _tri_decode(idx)
            else:
                i, j = idx // s, idx % s
            us.append(a * s + i)
            vs.append(b * s + j)
    u = np.concatenate(us) if us else np.zeros(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=np.int64)
    graph = EdgeListGraph.from_edges(u, v, n=n)
    return graph, Partition(np.repeat(np.arange(q), s), q)


def build_affinity(image, radius=5, sigma_I=0.1, sigma_X=4.0):
    """Gaussian intensity-proximity affinity between pixels.

    ``W_ij = exp(-(I_i - I_j)^2 / sigma_I^2) * exp(-d_ij^2 / sigma_X^2)`` for
    pixels at Euclidean distance ``d_ij <= radius`` (the diagonal gets 1),
    else 0. Pixels are numbered in row-major order.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise InvalidShape("image must be two-dimensional")
    if radius < 1 or sigma_I <= 0 or sigma_X <= 0:
        raise ValueError("need radius >= 1 and positive sigmas")
    h, w = img.shape
    ids = np.arange(h * w).reshape(h, w)
    r = int(np.floor(radius))
    rows, cols, vals = [], [], []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            d2 = dy * dy + dx * dx
            if d2 > radius * radius:
                continue
            y0, y1 = max(0, -dy), min(h, h - dy)
            x0, x1 = max(0, -dx), min(w, w - dx)
            if y0 >= y1 or x0 >= x1:
                continue
            a = img[y0:y1, x0:x1]
            b = img[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
            wt = np.exp(-((a - b) ** 2) / sigma_I**2) * np.exp(-d2 / sigma_X**2)
            rows.append(ids[y0:y1, x0:x1].ravel())
            cols.append(ids[y0 + dy : y1 + dy, x0 + dx : x1 + dx].ravel())
            vals.append(wt.ravel())
    W = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(h * w, h * w),
    )
    W.sort_indices()
    return W


def block_affinity(sizes, weight=1.0, seed=None):
    """Affinity made of disconnected dense blocks (no self-loops).

    With ``seed`` set, within-block weights are drawn uniformly from
    ``[0.5, 1.5] * weight`` instead of being constant.
    """
    sizes = [int(s) for s in sizes]
    if any(s < 2 for s in sizes):
        raise ValueError("each block needs at least two vertices")
    rng = None if seed is None else np.random.default_rng(seed)
    blocks = []
    for s in sizes:
        B = np.full((s, s), float(weight))
        if rng is not None:
            B = np.triu(B * rng.uniform(0.5, 1.5, size=(s, s)), 1)
            B = B + B.T
        np.fill_diagonal(B, 0.0)
        blocks.append(sp.csr_matrix(B))
    W = sp.block_diag(blocks, format="csr")
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return W, labels
