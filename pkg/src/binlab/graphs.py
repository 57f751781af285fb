"""Regular graphs for edge-sampled allocation, and their conductance.

Conductance here is edge expansion normalized by degree:

    phi(G) = min over 1 <= |S| <= n/2 of  |E(S, V\\S)| / (d * |S|)

``conductance_exact`` enumerates all vertex subsets (feasible to n = 24);
``conductance_bounds`` sandwiches phi between the spectral lower bound
lambda_2 / 2 and the best sweep cut found along the second eigenvector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import make_generator

EXACT_LIMIT = 24


@dataclass(frozen=True)
class RegularGraph:
    """Simple connected d-regular graph on vertices 0..n-1."""

    n: int
    d: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n, d = self.n, self.d
        if n < 2 or d < 1:
            raise ValueError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
        if len(self.edges) * 2 != n * d:
            raise ValueError(f"{len(self.edges)} edges inconsistent with n*d/2 = {n * d / 2}")
        seen = set()
        deg = [0] * n
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            deg[u] += 1
            deg[v] += 1
        if any(x != d for x in deg):
            raise ValueError("graph is not d-regular")
        if not _connected(n, self.edges):
            raise ValueError("graph is not connected")

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def neighbor_masks(self) -> list[int]:
        """Adjacency as bitmasks, for subset enumeration."""
        masks = [0] * self.n
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return masks


def _connected(n: int, edges) -> bool:
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n


# -- builders ---------------------------------------------------------------

def complete_graph(n: int) -> RegularGraph:
    edges = tuple((u, v) for u in range(n) for v in range(u + 1, n))
    return RegularGraph(n=n, d=n - 1, edges=edges)


def cycle_graph(n: int) -> RegularGraph:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    edges = tuple((i, (i + 1) % n) for i in range(n))
    return RegularGraph(n=n, d=2, edges=edges)


def hypercube_graph(n: int) -> RegularGraph:
    k = n.bit_length() - 1
    if n != 1 << k or k < 1:
        raise ValueError(f"hypercube needs n a power of two >= 2, got {n}")
    edges = tuple((u, u ^ (1 << b)) for u in range(n) for b in range(k) if u < u ^ (1 << b))
    return RegularGraph(n=n, d=k, edges=edges)


def torus_grid_graph(n: int) -> RegularGraph:
    k = math.isqrt(n)
    if k * k != n or k < 3:
        raise ValueError(f"torus grid needs n = k^2 with k >= 3, got {n}")
    edges = []
    for r in range(k):
        for c in range(k):
            u = r * k + c
            edges.append((u, r * k + (c + 1) % k))
            edges.append((u, ((r + 1) % k) * k + c))
    return RegularGraph(n=n, d=4, edges=tuple(edges))


def random_regular_graph(n: int, d: int, seed: int, retries: int = 1000) -> RegularGraph:
    """Pairing-model sampler; retries until the pairing is simple and the
    graph connected."""
    if n * d % 2 != 0:
        raise ValueError(f"n*d must be even, got n={n}, d={d}")
    if d >= n:
        raise ValueError(f"need d < n, got d={d}, n={n}")
    rng = make_generator(seed, n, d)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(retries):
        perm = rng.permutation(stubs)
        pairs = [(int(perm[2 * i]), int(perm[2 * i + 1])) for i in range(len(perm) // 2)]
        seen = set()
        ok = True
        for u, v in pairs:
            if u == v:
                ok = False
                break
            key = (u, v) if u < v else (v, u)
            if key in seen:
                ok = False
                break
            seen.add(key)
        if ok and _connected(n, pairs):
            return RegularGraph(n=n, d=d, edges=tuple(pairs))
    raise RuntimeError(f"no simple connected pairing found in {retries} tries")


_BUILDERS = {
    "complete": complete_graph,
    "cycle": cycle_graph,
    "hypercube": hypercube_graph,
    "torus-grid": torus_grid_graph,
}


def build_graph(kind: str, n: int, d: int | None = None, seed: int = 0) -> RegularGraph:
    """Dispatch on kind: complete | cycle | hypercube | torus-grid |
    random-regular (the last needs d)."""
    if kind == "random-regular":
        if d is None:
            raise ValueError("random-regular needs d")
        return random_regular_graph(n, d, seed)
    try:
        return _BUILDERS[kind](n)
    except KeyError:
        raise ValueError(f"unknown graph kind {kind!r}") from None


# -- conductance -------------------------------------------------------------

def conductance_exact(g: RegularGraph) -> float:
    """Exhaustive minimum over all subsets (vertex 0 pinned into S to halve
    the work); Gray-code order keeps each cut update O(1) popcounts."""
    n = g.n
    if n > EXACT_LIMIT:
        raise ValueError(f"exact conductance limited to n <= {EXACT_LIMIT}, got {n}")
    masks = g.neighbor_masks()
    d = g.d
    deg = d  # regular
    best_num, best_den = deg, d  # S = {0}: cut = d, |S| = 1 -> phi = 1
    cur = 1        # bitmask of S, vertex 0 always in
    cut = deg      # |E(S, V\S)| for current S
    size = 1
    # iterate Gray code over vertices 1..n-1
    for i in range(1, 1 << (n - 1)):
        v = (i & -i).bit_length()  # vertex index to toggle (1-based trailing zeros + 1)
        bit = 1 << v
        if cur & bit:
            cur ^= bit
            cut -= deg - 2 * (masks[v] & cur).bit_count()
            size -= 1
        else:
            cut += deg - 2 * (masks[v] & cur).bit_count()
            cur ^= bit
            size += 1
        side = size if size <= n - size else n - size
        if side and cut * best_den < best_num * side * d:
            best_num, best_den = cut, side * d
    return best_num / best_den


def _lambda2(g: RegularGraph, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Second-smallest eigenvalue of the normalized Laplacian, via power
    iteration on 2I - L with the constant eigenvector deflated."""
    a = g.adjacency() / g.d
    rng = make_generator(12345, g.n, g.d)
    v = rng.standard_normal(g.n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = v + a @ v          # (I + A/d) v = (2I - L) v
        w -= w.mean()          # stay orthogonal to the constant vector
        norm = np.linalg.norm(w)
        if norm == 0:
            return 2.0  # only the constant direction remains
        w /= norm
        new_est = float(w @ (w + a @ w))
        v = w
        if abs(new_est - est) <= tol:
            est = new_est
            break
        est = new_est
    return 2.0 - est


def sweep_cut(g: RegularGraph) -> float:
    """Best conductance among prefix cuts of the second-eigenvector order;
    a genuine cut, hence an upper bound on phi."""
    a = g.adjacency() / g.d
    # recover an approximate second eigenvector by a short deflated iteration
    rng = make_generator(54321, g.n, g.d)
    v = rng.standard_normal(g.n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    for _ in range(2000):
        w = v + a @ v
        w -= w.mean()
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        v = w / norm
    order = np.argsort(v, kind="stable")
    in_s = np.zeros(g.n, dtype=bool)
    adj = [[] for _ in range(g.n)]
    for u, w_ in g.edges:
        adj[u].append(w_)
        adj[w_].append(u)
    cut = 0
    best = math.inf
    for k, u in enumerate(order[:-1], start=1):
        u = int(u)
        cut += g.d - 2 * sum(in_s[x] for x in adj[u])
        in_s[u] = True
        side = min(k, g.n - k)
        best = min(best, cut / (g.d * side))
    return best


def conductance_bounds(g: RegularGraph) -> tuple[float, float]:
    """(lower, upper) with lower <= phi(G) <= upper."""
    lam2 = _lambda2(g)
    lower = lam2 / 2
    upper = min(math.sqrt(max(2 * lam2, 0.0)), sweep_cut(g))
    return lower, upper


# -- allocation vector over ranks --------------------------------------------

def graphical_allocation_vector(g: RegularGraph, state) -> "ProbabilityVector":
    """Rank-indexed allocation vector of the edge process on this state:
    sample a uniform edge, the ball goes to the lesser-loaded endpoint
    (ties to the higher vertex id)."""
    from .vectors import ProbabilityVector

    if state.n != g.n:
        raise ValueError(f"state has {state.n} bins but graph has {g.n} vertices")
    loads = state.loads
    rank_of = state.rank_of
    probs = [0.0] * g.n
    share = 1.0 / len(g.edges)
    for u, v in g.edges:
        if loads[u] < loads[v]:
            r = u
        elif loads[v] < loads[u]:
            r = v
        else:
            r = u if u > v else v
        probs[rank_of[r]] += share
    return ProbabilityVector(probs=tuple(probs))


# -- file format --------------------------------------------------------------

def write_graph_file(g: RegularGraph, path: str) -> None:
    """Text format: first line 'n d', then one 'u v' edge per line, 1-indexed."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{g.n} {g.d}\n")
        for u, v in g.edges:
            fh.write(f"{u + 1} {v + 1}\n")


def read_graph_file(path: str) -> RegularGraph:
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'n d' header")
    n, d = int(tokens[0]), int(tokens[1])
    rest = tokens[2:]
    if len(rest) % 2 != 0:
        raise ValueError(f"{path}: odd number of endpoint tokens")
    edges = []
    for i in range(0, len(rest), 2):
        u, v = int(rest[i]), int(rest[i + 1])
        if not (1 <= u <= n and 1 <= v <= n):
            raise ValueError(f"{path}: endpoint out of range in edge {u} {v}")
        edges.append((u - 1, v - 1))
    return RegularGraph(n=n, d=d, edges=tuple(edges))  # validates regular+connected
