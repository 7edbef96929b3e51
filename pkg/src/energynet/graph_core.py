"""Resistance networks, example families and finite truncations."""

from __future__ import annotations

import enum
import io
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator

from energynet.errors import NetworkError, ParseError

Vertex = Hashable


def vertex_key(v):
    """Total order on mixed integer / string vertex ids (integers first)."""
    if isinstance(v, bool):
        raise NetworkError(f"boolean vertex id {v!r} not allowed")
    if isinstance(v, int):
        return (0, v, "")
    return (1, 0, str(v))


class Network:
    """Weighted undirected graph with a distinguished origin.

    Conductances are given as ``(x, y, c_xy)`` triples.  The raw table is
    kept as supplied so that :func:`validate` can report asymmetric or
    otherwise broken input; lookups through :meth:`conductance` and
    :meth:`neighbors` treat a pair stored once as symmetric.
    """

    __slots__ = ("_origin", "_raw", "_vertices", "_adj")

    def __init__(self, origin: Vertex, edges: Iterable[tuple], vertices: Iterable[Vertex] = ()):
        raw: dict[tuple, float] = {}
        verts = {origin}
        verts.update(vertices)
        for a, b, w in edges:
            raw[(a, b)] = float(w)
            verts.add(a)
            verts.add(b)
        self._origin = origin
        self._raw = raw
        self._vertices = tuple(sorted(verts, key=vertex_key))
        adj: dict[Vertex, dict[Vertex, float]] = {v: {} for v in self._vertices}
        for (a, b), w in raw.items():
            if a == b:
                continue
            # first stored orientation wins for lookups; validate() reports conflicts
            adj[a].setdefault(b, w)
            adj[b].setdefault(a, w)
        self._adj = {
            v: tuple(sorted(nb.items(), key=lambda kv: vertex_key(kv[0]))) for v, nb in adj.items()
        }

    @property
    def origin(self) -> Vertex:
        return self._origin

    @property
    def vertices(self) -> tuple:
        return self._vertices

    @property
    def raw_conductances(self) -> dict:
        return dict(self._raw)

    def __contains__(self, x) -> bool:
        return x in self._adj

    def __len__(self) -> int:
        return len(self._vertices)

    def neighbors(self, x) -> tuple:
        """``((y, c_xy), ...)`` sorted by vertex id."""
        try:
            return self._adj[x]
        except KeyError:
            raise NetworkError(f"unknown vertex {x!r}") from None

    def conductance(self, x, y) -> float:
        for z, w in self.neighbors(x):
            if z == y:
                return w
        return 0.0

    def edges(self) -> Iterator[tuple]:
        """Canonical undirected edges ``(a, b, c_ab)`` with ``a < b``."""
        for a in self._vertices:
            ka = vertex_key(a)
            for b, w in self._adj[a]:
                if ka < vertex_key(b):
                    yield a, b, w

    def with_origin(self, origin) -> "Network":
        if origin not in self:
            raise NetworkError(f"unknown vertex {origin!r}")
        return Network(origin, self.edges(), self._vertices)

    def canonical(self) -> tuple:
        return (self._origin, tuple(self.edges()), self._vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.canonical() == other.canonical()

    def __hash__(self) -> int:
        return hash(self.canonical())

    def __repr__(self) -> str:
        return f"Network(origin={self._origin!r}, |V|={len(self._vertices)})"


@dataclass(frozen=True)
class Violation:
    kind: str  # asymmetry | self-loop | nonpositive | disconnected
    where: tuple
    detail: str = ""


def validate(net: Network) -> list[Violation]:
    """Return every broken network invariant; an empty list means valid."""
    report = []
    raw = net.raw_conductances
    for (a, b), w in sorted(raw.items(), key=lambda kv: (vertex_key(kv[0][0]), vertex_key(kv[0][1]))):
        if a == b:
            report.append(Violation("self-loop", (a, b), f"c_xx = {w}"))
            continue
        if not w > 0:
            report.append(Violation("nonpositive", (a, b), f"weight {w}"))
        if vertex_key(a) < vertex_key(b) and (b, a) in raw and raw[(b, a)] != w:
            report.append(Violation("asymmetry", (a, b), f"{w} != {raw[(b, a)]}"))
    seen = {net.origin}
    queue = deque([net.origin])
    while queue:
        x = queue.popleft()
        for y, w in net.neighbors(x):
            if w > 0 and y not in seen:
                seen.add(y)
                queue.append(y)
    for v in net.vertices:
        if v not in seen:
            report.append(Violation("disconnected", (v,), f"unreachable from origin {net.origin!r}"))
    return report


def degree(net: Network, x) -> float:
    """Net conductance c(x), the sum of edge weights at ``x``."""
    total = 0.0
    for _, w in net.neighbors(x):
        total += w
    return total


def make_geometric_integers(c: float, N: int) -> Network:
    """Integers ``-N..N`` with ``c_{n-1,n} = c**max(|n|, |n-1|)`` and origin 0."""
    if not c >= 1 or int(N) != N or N < 1:
        raise NetworkError(f"need c >= 1 and integer N >= 1, got c={c}, N={N}")
    edges = [(n - 1, n, float(c) ** max(abs(n), abs(n - 1))) for n in range(-N + 1, N + 1)]
    return Network(0, edges)


def make_geometric_tree(c: float, depth: int) -> Network:
    """Binary tree of the given depth, vertices named by address strings.

    The root is ``""``; the children of ``x`` are ``x + "0"`` and ``x + "1"``,
    so ``|x|`` is the string length. The edge from a depth-k vertex to its
    child has conductance ``c**(k+1)``.
    """
    if not c >= 1 or int(depth) != depth or depth < 1:
        raise NetworkError(f"need c >= 1 and integer depth >= 1, got c={c}, depth={depth}")
    edges = []
    level = [""]
    for k in range(depth):
        w = float(c) ** (k + 1)
        nxt = []
        for x in level:
            for bit in "01":
                edges.append((x, x + bit, w))
                nxt.append(x + bit)
        level = nxt
    return Network("", edges)


def make_path(n: int, weight: float = 1.0, origin: int = 0) -> Network:
    """Path ``0 - 1 - ... - (n-1)`` with constant conductance."""
    if n < 1:
        raise NetworkError("path needs at least one vertex")
    return Network(origin, [(i, i + 1, weight) for i in range(n - 1)], range(n))


def make_random_network(n: int, rng, extra_edges: int | None = None, low=0.1, high=10.0) -> Network:
    """Connected random network: a random spanning tree plus extra chords.

    ``rng`` is a :class:`numpy.random.Generator`; weights are uniform in
    ``[low, high]``.
    """
    order = rng.permutation(n)
    pairs = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(order[i]), int(order[j])
        pairs.add((min(a, b), max(a, b)))
    extra = n if extra_edges is None else extra_edges
    while extra > 0 and len(pairs) < n * (n - 1) // 2:
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
        key = (min(a, b), max(a, b))
        if key not in pairs:
            pairs.add(key)
            extra -= 1
    edges = [(a, b, float(rng.uniform(low, high))) for a, b in sorted(pairs)]
    return Network(0, edges, range(n))


# -- serialization ---------------------------------------------------------

def _check_id(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ParseError(f"{where}: vertex id must be string or integer, got {v!r}")
    return v


def load_network(source) -> Network:
    """Read a network document ``{"origin": id, "edges": [[a, b, w], ...]}``.

    ``source`` is a path, a text/binary stream, or raw bytes/str.
    """
    if isinstance(source, (bytes, bytearray)):
        text = source.decode()
    elif hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode()
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    for key in ("origin", "edges"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    origin = _check_id(doc["origin"], "origin")
    if not isinstance(doc["edges"], list):
        raise ParseError("field 'edges' must be a list")
    edges = []
    seen: dict[frozenset, tuple] = {}
    for i, item in enumerate(doc["edges"]):
        where = f"edges[{i}]"
        if not isinstance(item, list) or len(item) != 3:
            raise ParseError(f"{where}: expected [id_a, id_b, weight]")
        a, b = _check_id(item[0], where), _check_id(item[1], where)
        w = item[2]
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise ParseError(f"{where}: weight must be a number")
        if not w > 0:
            raise ParseError(f"{where}: weight must be strictly positive, got {w}")
        if a == b:
            raise ParseError(f"{where}: self-loop at {a!r}")
        pair = frozenset((a, b))
        if pair in seen:
            raise ParseError(
                f"{where}: pair ({a!r}, {b!r}) already given at edges[{seen[pair][0]}]"
                + (" with a different weight" if seen[pair][1] != w else "")
            )
        seen[pair] = (i, w)
        edges.append((a, b, float(w)))
    return Network(origin, edges)


def save_network(net: Network) -> bytes:
    """Canonical JSON: pairs once with the smaller id first, sorted."""
    doc = {"origin": net.origin, "edges": [[a, b, w] for a, b, w in net.edges()]}
    buf = io.StringIO()
    json.dump(doc, buf, separators=(",", ":"))
    buf.write("\n")
    return buf.getvalue().encode()


# -- truncation ------------------------------------------------------------

class Mode(str, enum.Enum):
    FREE = "free"
    WIRED = "wired"


def graph_distances(net: Network, center) -> dict:
    """Hop distance from ``center`` to every reachable vertex."""
    dist = {center: 0}
    queue = deque([center])
    while queue:
        x = queue.popleft()
        for y, _ in net.neighbors(x):
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


@dataclass(frozen=True)
class Truncation:
    """Finite ball of a network.

    In wired mode the sphere just outside the ball is the boundary and is
    held at 0 in every solve; in free mode the ball is used as a network on
    its own.
    """

    base: Network
    interior: tuple
    boundary: tuple
    mode: Mode
    center: object = None
    radius: int = 0
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {v: i for i, v in enumerate(self.interior)})

    @property
    def n(self) -> int:
        return len(self.interior)

    @property
    def origin(self):
        return self.base.origin

    @property
    def wired(self) -> bool:
        return self.mode is Mode.WIRED

    def neighbors(self, x) -> tuple:
        """Neighbors of an interior vertex that take part in this truncation.

        Free mode drops edges leaving the ball; wired mode keeps edges to
        the (grounded) boundary.
        """
        nbrs = self.base.neighbors(x)
        if self.wired:
            return nbrs
        idx = self.index
        return tuple((y, w) for y, w in nbrs if y in idx)

    def degree(self, x) -> float:
        total = 0.0
        for _, w in self.neighbors(x):
            total += w
        return total

    def inner_vertices(self) -> tuple:
        """Interior vertices whose every neighbor in the base network is interior."""
        idx = self.index
        return tuple(x for x in self.interior if all(y in idx for y, _ in self.base.neighbors(x)))

    def with_origin(self, origin) -> "Truncation":
        if origin not in self.index:
            raise NetworkError(f"origin {origin!r} is not interior")
        return Truncation(self.base.with_origin(origin), self.interior, self.boundary, self.mode, self.center, self.radius)


def truncate(net: Network, center, radius: int, mode: Mode | str = Mode.FREE) -> Truncation:
    """Ball of hop radius ``radius`` around ``center``."""
    if center not in net:
        raise NetworkError(f"unknown center {center!r}")
    if radius < 0:
        raise NetworkError("radius must be nonnegative")
    mode = Mode(mode)
    dist = graph_distances(net, center)
    interior = tuple(sorted((v for v, d in dist.items() if d <= radius), key=vertex_key))
    boundary = ()
    if mode is Mode.WIRED:
        boundary = tuple(sorted((v for v, d in dist.items() if d == radius + 1), key=vertex_key))
    return Truncation(net, interior, boundary, mode, center, radius)


def whole(net: Network, mode: Mode | str = Mode.FREE) -> Truncation:
    """The entire (finite) network as a truncation centered at its origin."""
    return truncate(net, net.origin, len(net), mode)
