"""System model: sparsity patterns, subsystems, interconnections, graph views.

Everything downstream works on zero/nonzero structure only.  A pattern is a
set of (row, col) positions; a system is a list of subsystems plus directed
connection patterns between them ("from" feeds "to").
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Iterable

Pair = tuple[int, int]


class ModelError(ValueError):
    """Malformed pattern, system, or input file."""


# ---------------------------------------------------------------------------
# patterns


@dataclass(frozen=True)
class SparsityPattern:
    """A ``rows x cols`` zero/nonzero pattern stored as (row, col) pairs."""

    rows: int
    cols: int
    nonzeros: frozenset[Pair] = frozenset()

    def __post_init__(self) -> None:
        if self.rows < 0 or self.cols < 0:
            raise ModelError(f"pattern shape ({self.rows}, {self.cols}) is negative")
        entries = frozenset((int(r), int(c)) for r, c in self.nonzeros)
        object.__setattr__(self, "nonzeros", entries)
        for r, c in entries:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ModelError(
                    f"nonzero ({r}, {c}) outside a {self.rows}x{self.cols} pattern"
                )

    def __contains__(self, pair: Pair) -> bool:
        return pair in self.nonzeros

    @property
    def is_zero(self) -> bool:
        return not self.nonzeros

    def row_support(self) -> set[int]:
        """Rows that contain at least one nonzero."""
        return {r for r, _ in self.nonzeros}

    def col_support(self) -> set[int]:
        return {c for _, c in self.nonzeros}

    def by_col(self) -> dict[int, list[int]]:
        """Map column -> sorted rows with a nonzero in that column."""
        out: dict[int, list[int]] = {}
        for r, c in sorted(self.nonzeros):
            out.setdefault(c, []).append(r)
        return out

    def by_row(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for r, c in sorted(self.nonzeros, key=lambda rc: (rc[1], rc[0])):
            out.setdefault(r, []).append(c)
        return out

    def __or__(self, other: "SparsityPattern") -> "SparsityPattern":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ModelError(
                f"cannot union {self.rows}x{self.cols} with {other.rows}x{other.cols}"
            )
        return SparsityPattern(self.rows, self.cols, self.nonzeros | other.nonzeros)

    def transpose(self) -> "SparsityPattern":
        return SparsityPattern(self.cols, self.rows, frozenset((c, r) for r, c in self.nonzeros))

    @classmethod
    def from_dense(cls, mat: Iterable[Iterable[float]]) -> "SparsityPattern":
        rows = [list(row) for row in mat]
        cols = len(rows[0]) if rows else 0
        nz = frozenset(
            (i, j) for i, row in enumerate(rows) for j, v in enumerate(row) if v
        )
        return cls(len(rows), cols, nz)

    def to_dense(self) -> list[list[int]]:
        out = [[0] * self.cols for _ in range(self.rows)]
        for r, c in self.nonzeros:
            out[r][c] = 1
        return out


def zeros(rows: int, cols: int) -> SparsityPattern:
    return SparsityPattern(rows, cols, frozenset())


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class Subsystem:
    """One block: ``n`` states, ``p`` inputs, local patterns A (n x n), B (n x p)."""

    id: int
    n: int
    p: int
    A: SparsityPattern
    B: SparsityPattern

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ModelError(f"subsystem {self.id}: state count must be >= 1")
        if self.p < 0:
            raise ModelError(f"subsystem {self.id}: input count must be >= 0")
        if (self.A.rows, self.A.cols) != (self.n, self.n):
            raise ModelError(
                f"subsystem {self.id}: A is {self.A.rows}x{self.A.cols}, expected {self.n}x{self.n}"
            )
        if (self.B.rows, self.B.cols) != (self.n, self.p):
            raise ModelError(
                f"subsystem {self.id}: B is {self.B.rows}x{self.B.cols}, expected {self.n}x{self.p}"
            )


@dataclass(frozen=True)
class Interconnection:
    """States of subsystem ``from_`` entering the dynamics of subsystem ``to``.

    ``E`` has shape (n_to, n_from): entry (t, f) couples source state f of the
    feeding subsystem into target state t.
    """

    to: int
    from_: int
    E: SparsityPattern


@dataclass(frozen=True)
class InterconnectedSystem:
    subsystems: tuple[Subsystem, ...]
    connections: tuple[Interconnection, ...]

    def __post_init__(self) -> None:
        subs = tuple(sorted(self.subsystems, key=lambda s: s.id))
        object.__setattr__(self, "subsystems", subs)
        object.__setattr__(self, "connections", tuple(self.connections))
        ids = [s.id for s in subs]
        if ids != list(range(len(subs))):
            raise ModelError(f"subsystem ids must be exactly 0..r-1, got {ids}")
        if not subs:
            raise ModelError("a system needs at least one subsystem")
        seen: set[Pair] = set()
        for conn in self.connections:
            if conn.to == conn.from_:
                raise ModelError(f"connection ({conn.to}, {conn.from_}) is a self-loop")
            for end in (conn.to, conn.from_):
                if not 0 <= end < len(subs):
                    raise ModelError(f"connection references unknown subsystem {end}")
            if (conn.to, conn.from_) in seen:
                raise ModelError(
                    f"duplicate connection to={conn.to} from={conn.from_}"
                )
            seen.add((conn.to, conn.from_))
            n_to, n_from = subs[conn.to].n, subs[conn.from_].n
            if (conn.E.rows, conn.E.cols) != (n_to, n_from):
                raise ModelError(
                    f"connection to={conn.to} from={conn.from_}: E is "
                    f"{conn.E.rows}x{conn.E.cols}, expected {n_to}x{n_from}"
                )
            if conn.E.is_zero:
                raise ModelError(
                    f"connection to={conn.to} from={conn.from_} has an empty pattern"
                )

    @property
    def r(self) -> int:
        return len(self.subsystems)

    @property
    def n_total(self) -> int:
        return sum(s.n for s in self.subsystems)

    @property
    def p_total(self) -> int:
        return sum(s.p for s in self.subsystems)

    def subsystem(self, i: int) -> Subsystem:
        return self.subsystems[i]

    def state_offset(self, i: int) -> int:
        return sum(s.n for s in self.subsystems[:i])

    def input_offset(self, i: int) -> int:
        return sum(s.p for s in self.subsystems[:i])

    def incoming(self, i: int) -> tuple[Interconnection, ...]:
        """Connections feeding subsystem i, sorted by source id."""
        return tuple(
            sorted((c for c in self.connections if c.to == i), key=lambda c: c.from_)
        )

    def outgoing(self, i: int) -> tuple[Interconnection, ...]:
        """Connections through which subsystem i feeds others, sorted by target id."""
        return tuple(
            sorted((c for c in self.connections if c.from_ == i), key=lambda c: c.to)
        )

    def neighbors(self, i: int) -> list[int]:
        """Subsystems connected to i in either direction, sorted."""
        ns = {c.from_ for c in self.incoming(i)} | {c.to for c in self.outgoing(i)}
        return sorted(ns)


def assemble_global(sys: InterconnectedSystem) -> tuple[SparsityPattern, SparsityPattern]:
    """Stack subsystems into global (A, B) patterns.

    A carries the local blocks on the diagonal and each connection pattern at
    block position (to, from); B is block diagonal.
    """
    n, p = sys.n_total, sys.p_total
    a_entries: set[Pair] = set()
    b_entries: set[Pair] = set()
    for sub in sys.subsystems:
        dr = sys.state_offset(sub.id)
        dc_in = sys.input_offset(sub.id)
        a_entries.update((dr + i, dr + j) for i, j in sub.A.nonzeros)
        b_entries.update((dr + i, dc_in + j) for i, j in sub.B.nonzeros)
    for conn in sys.connections:
        dr = sys.state_offset(conn.to)
        dc = sys.state_offset(conn.from_)
        a_entries.update((dr + i, dc + j) for i, j in conn.E.nonzeros)
    return SparsityPattern(n, n, frozenset(a_entries)), SparsityPattern(
        n, p, frozenset(b_entries)
    )


# ---------------------------------------------------------------------------
# graph views


@dataclass(frozen=True)
class Digraph:
    vertices: frozenset
    edges: frozenset[tuple]  # (tail, head): edge tail -> head

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", frozenset(self.vertices))
        object.__setattr__(self, "edges", frozenset(self.edges))
        for t, h in self.edges:
            if t not in self.vertices or h not in self.vertices:
                raise ModelError(f"edge ({t!r}, {h!r}) uses an unknown vertex")


@dataclass(frozen=True)
class BipartiteGraph:
    left: frozenset
    right: frozenset
    edges: frozenset[tuple]  # (l, r) with l in left, r in right

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", frozenset(self.left))
        object.__setattr__(self, "right", frozenset(self.right))
        object.__setattr__(self, "edges", frozenset(self.edges))
        for l, r in self.edges:
            if l not in self.left:
                raise ModelError(f"edge ({l!r}, {r!r}): unknown left vertex")
            if r not in self.right:
                raise ModelError(f"edge ({l!r}, {r!r}): unknown right vertex")


def state_digraph(A: SparsityPattern) -> Digraph:
    """Digraph on state vertices: edge x_l -> x_k iff A[k, l] is nonzero."""
    verts = frozenset(("x", j) for j in range(A.rows))
    edges = frozenset((("x", l), ("x", k)) for k, l in A.nonzeros)
    return Digraph(verts, edges)


def system_digraph(A: SparsityPattern, B: SparsityPattern) -> Digraph:
    """State digraph plus one vertex per input column; u_j -> x_i iff B[i, j] != 0.

    Input columns with no nonzeros still contribute (isolated) vertices.
    """
    verts = set(("x", j) for j in range(A.rows))
    verts.update(("u", j) for j in range(B.cols))
    edges = set((("x", l), ("x", k)) for k, l in A.nonzeros)
    edges.update((("u", j), ("x", i)) for i, j in B.nonzeros)
    return Digraph(frozenset(verts), frozenset(edges))


def state_bipartite(A: SparsityPattern) -> BipartiteGraph:
    """Left and right copies of the states; (x_l, x_k) iff A[k, l] is nonzero."""
    xs = frozenset(("x", j) for j in range(A.rows))
    edges = frozenset((("x", l), ("x", k)) for k, l in A.nonzeros)
    return BipartiteGraph(xs, xs, edges)


def system_bipartite(A: SparsityPattern, B: SparsityPattern) -> BipartiteGraph:
    """Left = inputs and states, right = states; edges follow B and A columns."""
    lefts = set(("x", j) for j in range(A.rows))
    lefts.update(("u", j) for j in range(B.cols))
    rights = frozenset(("x", j) for j in range(A.rows))
    edges = set((("x", l), ("x", k)) for k, l in A.nonzeros)
    edges.update((("u", j), ("x", i)) for i, j in B.nonzeros)
    return BipartiteGraph(frozenset(lefts), rights, frozenset(edges))


def condensed_graph(sys: InterconnectedSystem) -> Digraph:
    """One vertex per subsystem; edge (i, j) iff some connection has from=i, to=j."""
    verts = frozenset(range(sys.r))
    edges = frozenset((c.from_, c.to) for c in sys.connections)
    return Digraph(verts, edges)


def sources(g: Digraph) -> list:
    """Vertices with no incoming edge, sorted."""
    heads = {h for _, h in g.edges}
    return sorted(v for v in g.vertices if v not in heads)


def out_degrees(g: Digraph) -> dict:
    deg = {v: 0 for v in g.vertices}
    for t, _ in g.edges:
        deg[t] += 1
    return deg


def is_weakly_connected(g: Digraph) -> bool:
    if not g.vertices:
        return True
    adj: dict = {v: set() for v in g.vertices}
    for t, h in g.edges:
        adj[t].add(h)
        adj[h].add(t)
    start = next(iter(sorted(g.vertices)))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(g.vertices)


# ---------------------------------------------------------------------------
# JSON files

_TOP_KEYS = {"subsystems", "connections"}
_SUB_KEYS = {"id", "n", "p", "A", "B"}
_CONN_KEYS = {"to", "from", "E"}


def _check_keys(obj: dict, expected: set[str], where: str) -> None:
    missing = expected - obj.keys()
    unknown = obj.keys() - expected
    if missing:
        raise ModelError(f"{where}: missing key(s) {sorted(missing)}")
    if unknown:
        raise ModelError(f"{where}: unknown key(s) {sorted(unknown)}")


def _parse_pairs(value, rows: int, cols: int, where: str) -> SparsityPattern:
    if not isinstance(value, list):
        raise ModelError(f"{where}: expected a list of [row, col] pairs")
    pairs = []
    for k, item in enumerate(value):
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in item)
        ):
            raise ModelError(f"{where}[{k}]: expected an integer pair [row, col]")
        pairs.append((item[0], item[1]))
    try:
        return SparsityPattern(rows, cols, frozenset(pairs))
    except ModelError as exc:
        raise ModelError(f"{where}: {exc}") from None


def _require_int(obj: dict, key: str, where: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ModelError(f"{where}: key '{key}' must be an integer")
    return v


def system_from_obj(obj) -> InterconnectedSystem:
    if not isinstance(obj, dict):
        raise ModelError("top level: expected a JSON object")
    if "similar" in obj:
        raise ModelError(
            "top level: this is a 'similar' template file; use the similar loader"
        )
    _check_keys(obj, _TOP_KEYS, "top level")
    if not isinstance(obj["subsystems"], list):
        raise ModelError("'subsystems' must be a list")
    if not isinstance(obj["connections"], list):
        raise ModelError("'connections' must be a list")
    subs = []
    for k, raw in enumerate(obj["subsystems"]):
        where = f"subsystems[{k}]"
        if not isinstance(raw, dict):
            raise ModelError(f"{where}: expected an object")
        _check_keys(raw, _SUB_KEYS, where)
        sid = _require_int(raw, "id", where)
        n = _require_int(raw, "n", where)
        p = _require_int(raw, "p", where)
        try:
            subs.append(
                Subsystem(
                    id=sid,
                    n=n,
                    p=p,
                    A=_parse_pairs(raw["A"], n, n, f"{where}.A"),
                    B=_parse_pairs(raw["B"], n, p, f"{where}.B"),
                )
            )
        except ModelError as exc:
            raise ModelError(f"{where}: {exc}") from None
    conns = []
    n_of = {s.id: s.n for s in subs}
    for k, raw in enumerate(obj["connections"]):
        where = f"connections[{k}]"
        if not isinstance(raw, dict):
            raise ModelError(f"{where}: expected an object")
        _check_keys(raw, _CONN_KEYS, where)
        to = _require_int(raw, "to", where)
        frm = _require_int(raw, "from", where)
        if to not in n_of or frm not in n_of:
            raise ModelError(f"{where}: endpoint references an unknown subsystem id")
        conns.append(
            Interconnection(
                to=to,
                from_=frm,
                E=_parse_pairs(raw["E"], n_of[to], n_of[frm], f"{where}.E"),
            )
        )
    return InterconnectedSystem(tuple(subs), tuple(conns))


def system_to_obj(sys: InterconnectedSystem) -> dict:
    return {
        "subsystems": [
            {
                "id": s.id,
                "n": s.n,
                "p": s.p,
                "A": [list(rc) for rc in sorted(s.A.nonzeros)],
                "B": [list(rc) for rc in sorted(s.B.nonzeros)],
            }
            for s in sys.subsystems
        ],
        "connections": [
            {
                "to": c.to,
                "from": c.from_,
                "E": [list(rc) for rc in sorted(c.E.nonzeros)],
            }
            for c in sorted(sys.connections, key=lambda c: (c.to, c.from_))
        ],
    }


def loads(text: str) -> InterconnectedSystem:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc}") from None
    return system_from_obj(obj)


def dumps(sys: InterconnectedSystem) -> str:
    return json.dumps(system_to_obj(sys), indent=2, sort_keys=True) + "\n"


def load(path) -> InterconnectedSystem:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def save(sys: InterconnectedSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(sys))


# ---------------------------------------------------------------------------
# random instances


def _random_pattern(rng: random.Random, rows: int, cols: int, density: float) -> SparsityPattern:
    nz = [
        (i, j)
        for i in range(rows)
        for j in range(cols)
        if rng.random() < density
    ]
    return SparsityPattern(rows, cols, frozenset(nz))


def _nonempty_pattern(rng: random.Random, rows: int, cols: int, density: float) -> SparsityPattern:
    pat = _random_pattern(rng, rows, cols, density)
    if pat.is_zero:
        pat = SparsityPattern(
            rows, cols, frozenset({(rng.randrange(rows), rng.randrange(cols))})
        )
    return pat


def random_system(
    r: int,
    n_range: tuple[int, int],
    p_range: tuple[int, int],
    density: float,
    seed: int,
    *,
    b_density: float | None = None,
    extra_conn_prob: float = 0.15,
) -> InterconnectedSystem:
    """A seeded random system whose condensed graph is weakly connected.

    Connections form a random spanning tree (random orientations) plus extra
    directed pairs with probability ``extra_conn_prob``; every connection
    pattern gets at least one nonzero.
    """
    rng = random.Random(seed)
    b_density = density if b_density is None else b_density
    subs = []
    for i in range(r):
        n = rng.randint(*n_range)
        p = rng.randint(*p_range)
        subs.append(
            Subsystem(
                id=i,
                n=n,
                p=p,
                A=_random_pattern(rng, n, n, density),
                B=_random_pattern(rng, n, p, b_density),
            )
        )
    pairs: set[Pair] = set()  # (to, from)
    for v in range(1, r):
        parent = rng.randrange(v)
        if rng.random() < 0.5:
            pairs.add((parent, v))
        else:
            pairs.add((v, parent))
    for to in range(r):
        for frm in range(r):
            if to != frm and (to, frm) not in pairs and rng.random() < extra_conn_prob:
                pairs.add((to, frm))
    conns = [
        Interconnection(to, frm, _nonempty_pattern(rng, subs[to].n, subs[frm].n, density))
        for to, frm in sorted(pairs)
    ]
    return InterconnectedSystem(tuple(subs), tuple(conns))


def random_serial_system(
    r: int,
    n_range: tuple[int, int],
    p_range: tuple[int, int],
    density: float,
    seed: int,
) -> InterconnectedSystem:
    """Random system whose condensed graph is a tree with every edge oriented
    toward the parent, so each subsystem feeds at most one other."""
    rng = random.Random(seed)
    subs = []
    for i in range(r):
        n = rng.randint(*n_range)
        p = rng.randint(*p_range)
        subs.append(
            Subsystem(
                id=i,
                n=n,
                p=p,
                A=_random_pattern(rng, n, n, density),
                B=_random_pattern(rng, n, p, density),
            )
        )
    conns = []
    for v in range(1, r):
        parent = rng.randrange(v)
        conns.append(
            Interconnection(
                to=parent,
                from_=v,
                E=_nonempty_pattern(rng, subs[parent].n, subs[v].n, density),
            )
        )
    return InterconnectedSystem(tuple(subs), tuple(conns))
