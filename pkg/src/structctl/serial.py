"""Serial-topology classification and a neighborhood matching test, both as a
per-subsystem agent program (``seq_strt_ctl``) and as a centralized mirror of
it (``check_lemma4``).

A system is serial when every subsystem feeds at most one other.  On such
systems each agent can decide a sufficient condition for structural
controllability using only its own block, the coupling patterns on incident
connections, and the dynamics of its incoming neighbors: it stacks those
blocks, finds a minimum-weight maximum matching that favors staying inside
diagonal blocks, and checks that its own right vertices are covered and its
own states are locally input-reachable.  The per-agent booleans are then
combined by r rounds of AND-flooding with all neighbors, so every agent
returns the same verdict.

``check_lemma4`` runs the identical per-subsystem computation without the
message passing; it is the reference the distributed run is compared against
and agrees with it by construction.  The verdict is sound (true implies the
global system is structurally controllable) but not complete.

The ``variant`` knob selects which side is stacked: ``"primal"`` (default)
stacks incoming neighbors and requires out-degree <= 1, ``"dual"`` stacks
outgoing neighbors and requires in-degree <= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graphkit import min_weight_max_matching, non_top_linked_components
from .model import (
    InterconnectedSystem,
    SparsityPattern,
    condensed_graph,
    out_degrees,
    system_bipartite,
    system_digraph,
)
from .runtime import AgentContext, Recv, RunResult, Send, run

_VARIANTS = ("primal", "dual")


def _check_variant(variant: str) -> None:
    if variant not in _VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {_VARIANTS}")


@dataclass(frozen=True)
class SerialCheck:
    is_serial: bool
    offenders: tuple[int, ...]


def is_serial(sys: InterconnectedSystem, variant: str = "primal") -> SerialCheck:
    """Whether every subsystem feeds at most one other (``"dual"``: is fed by
    at most one other), with the violating subsystem ids."""
    _check_variant(variant)
    g = condensed_graph(sys)
    if variant == "primal":
        deg = out_degrees(g)
    else:
        deg = {v: 0 for v in g.vertices}
        for _, h in g.edges:
            deg[h] += 1
    offenders = tuple(sorted(v for v, d in deg.items() if d > 1))
    return SerialCheck(is_serial=not offenders, offenders=offenders)


# ---------------------------------------------------------------------------
# the per-subsystem computation (shared by agent and mirror)


def _stack_blocks(
    own: tuple[int, int, SparsityPattern, SparsityPattern],
    blocks: list[tuple[int, SparsityPattern, SparsityPattern]],
    variant: str,
) -> tuple[SparsityPattern, SparsityPattern]:
    """Own block plus neighbor blocks on the diagonal, coupled through the
    connection patterns.

    ``blocks`` holds (n_j, A_j, E_j) per stacked neighbor in a fixed order.
    Primal couples neighbors into own rows (E_j is n_i x n_j); dual couples
    own columns into neighbor rows (E_j is n_j x n_i).
    """
    n_i, p_i, A_i, B_i = own
    total = n_i + sum(n_j for n_j, _, _ in blocks)
    entries = set(A_i.nonzeros)
    off = n_i
    for n_j, A_j, E_j in blocks:
        entries.update((off + k, off + l) for k, l in A_j.nonzeros)
        if variant == "primal":
            entries.update((k, off + l) for k, l in E_j.nonzeros)
        else:
            entries.update((off + k, l) for k, l in E_j.nonzeros)
        off += n_j
    A_stacked = SparsityPattern(total, total, frozenset(entries))
    B_stacked = SparsityPattern(total, p_i, B_i.nonzeros)
    return A_stacked, B_stacked


def _local_verdict(
    n_i: int,
    A_stacked: SparsityPattern,
    B_stacked: SparsityPattern,
    A_own: SparsityPattern,
    B_own: SparsityPattern,
) -> dict:
    """One subsystem's matched/reached decision on its stacked neighborhood.

    Weight 1 for state edges staying on one side of the own/stacked split,
    weight 2 for everything else (coupling and input edges); ties among
    minimum-weight maximum matchings are broken toward covering own rights.
    """
    b = system_bipartite(A_stacked, B_stacked)
    weights = {}
    for l, rt in b.edges:
        if l[0] == "x" and (l[1] < n_i) == (rt[1] < n_i):
            weights[(l, rt)] = 1
        else:
            weights[(l, rt)] = 2
    own_rights = frozenset(("x", k) for k in range(n_i))
    m = min_weight_max_matching(b, weights, prefer_rights=own_rights)
    unmatched_own = sorted(k for (_, k) in own_rights - m.matched_rights)

    local = system_digraph(A_own, B_own)
    stranded = sorted(
        v[1]
        for comp in non_top_linked_components(local)
        for v in comp
        if v[0] == "x"
    )
    mchd = not unmatched_own
    rchd = not stranded
    return {
        "mchd": mchd,
        "rchd": rchd,
        "ctld": mchd and rchd,
        "unmatched_own": unmatched_own,
        "stranded_states": stranded,
        "matching": m,
    }


def _verdict_from_parts(
    n_i: int,
    p_i: int,
    A_i: SparsityPattern,
    B_i: SparsityPattern,
    blocks: list[tuple[int, SparsityPattern, SparsityPattern]],
    variant: str,
) -> dict:
    A_stacked, B_stacked = _stack_blocks((n_i, p_i, A_i, B_i), blocks, variant)
    return _local_verdict(n_i, A_stacked, B_stacked, A_i, B_i)


def _blocks_for(sys: InterconnectedSystem, i: int, variant: str):
    """Stacked-neighbor blocks for subsystem i, in ascending neighbor id."""
    blocks = []
    if variant == "primal":
        for c in sys.incoming(i):  # sorted by from_
            blocks.append((sys.subsystem(c.from_).n, sys.subsystem(c.from_).A, c.E))
    else:
        for c in sys.outgoing(i):  # sorted by to
            blocks.append((sys.subsystem(c.to).n, sys.subsystem(c.to).A, c.E))
    return blocks


def check_lemma4(sys: InterconnectedSystem, variant: str = "primal") -> bool:
    """Centralized mirror: AND of every subsystem's stacked-neighborhood
    verdict, computed exactly as the agents compute it."""
    _check_variant(variant)
    return all(
        _verdict_from_parts(
            sys.subsystem(i).n,
            sys.subsystem(i).p,
            sys.subsystem(i).A,
            sys.subsystem(i).B,
            _blocks_for(sys, i, variant),
            variant,
        )["ctld"]
        for i in range(sys.r)
    )


def check_lemma4_details(sys: InterconnectedSystem, variant: str = "primal") -> dict:
    """Per-subsystem verdicts of the mirror (matching objects dropped)."""
    _check_variant(variant)
    per = {}
    for i in range(sys.r):
        v = _verdict_from_parts(
            sys.subsystem(i).n,
            sys.subsystem(i).p,
            sys.subsystem(i).A,
            sys.subsystem(i).B,
            _blocks_for(sys, i, variant),
            variant,
        )
        v.pop("matching")
        per[i] = v
    return per


# ---------------------------------------------------------------------------
# the agent program


def _seq_strt_ctl(ctx: AgentContext, variant: str):
    own = ctx.subsystem
    if variant == "primal":
        limit, count = "outgoing", len(ctx.outgoing)
    else:
        limit, count = "incoming", len(ctx.incoming)
    if count > 1:
        raise ValueError(
            f"agent {ctx.id}: {count} {limit} neighbors; the {variant} variant "
            f"needs at most one"
        )

    # Dynamics go to the side that will stack us; we stack the other side.
    send_to = ctx.outgoing if variant == "primal" else ctx.incoming
    stack_from = ctx.incoming if variant == "primal" else ctx.outgoing
    for j in sorted(send_to):
        yield Send(j, sorted(own.A.nonzeros))
    blocks = []
    for j in sorted(stack_from):
        pairs = yield Recv(j)
        E_j = stack_from[j]
        n_j = E_j.cols if variant == "primal" else E_j.rows
        A_j = SparsityPattern(n_j, n_j, frozenset((k, l) for k, l in pairs))
        blocks.append((n_j, A_j, E_j))

    ctld = _verdict_from_parts(own.n, own.p, own.A, own.B, blocks, variant)["ctld"]

    # r rounds of AND-flooding with all neighbors; the value sent each round
    # is the one held at the start of that round.
    for _ in range(ctx.r):
        for j in ctx.neighbors:
            yield Send(j, ctld)
        heard = []
        for j in ctx.neighbors:
            heard.append((yield Recv(j)))
        ctld = ctld and all(heard)
    return bool(ctld)


def seq_strt_ctl(ctx: AgentContext):
    """Agent program: stacked-neighborhood verdict plus AND-consensus."""
    return _seq_strt_ctl(ctx, "primal")


def seq_strt_ctl_variant(variant: str):
    """The same program with the stacking side chosen up front."""
    _check_variant(variant)

    def program(ctx: AgentContext):
        return _seq_strt_ctl(ctx, variant)

    return program


def run_seq_strt_ctl(
    sys: InterconnectedSystem, variant: str = "primal"
) -> RunResult:
    """Check seriality, then run one ``seq_strt_ctl`` agent per subsystem."""
    check = is_serial(sys, variant)
    if not check.is_serial:
        raise ValueError(
            f"system is not serial ({variant}): offending subsystems {list(check.offenders)}"
        )
    return run(sys, seq_strt_ctl_variant(variant))
