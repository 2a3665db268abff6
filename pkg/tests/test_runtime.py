"""Lockstep message runtime: delivery timing, tracing, protocol errors."""

from __future__ import annotations

import json

import pytest

from conftest import build_system
from structctl.runtime import (
    DeadlockError,
    ProtocolError,
    Recv,
    Send,
    Trace,
    TraceRecord,
    run,
)


@pytest.fixture
def line2():
    return build_system(
        [(1, 0, set(), set()), (1, 0, set(), set())],
        [(1, 0, {(0, 0)})],
    )


@pytest.fixture
def line3():
    return build_system(
        [(1, 0, set(), set()), (1, 0, set(), set()), (1, 0, set(), set())],
        [(1, 0, {(0, 0)}), (2, 1, {(0, 0)})],
    )


class TestDelivery:
    def test_pingpong_and_round_count(self, line2):
        def program(ctx):
            other = ctx.neighbors[0]
            yield Send(other, {"from": ctx.id})
            got = yield Recv(other)
            return got["from"]

        res = run(line2, program)
        assert res.outputs == {0: 1, 1: 0}
        assert res.rounds == 2  # sent in round 1, delivered in round 2

    def test_message_sent_in_round_k_arrives_in_round_k_plus_1(self, line2):
        def program(ctx):
            other = ctx.neighbors[0]
            for k in range(3):
                yield Send(other, k)
                got = yield Recv(other)
                assert got == k
            return True

        res = run(line2, program)
        assert all(res.outputs.values())
        for rec in res.trace:
            # payload k is sent in round k+1
            assert rec.round == json.loads(rec.payload) + 1

    def test_fifo_per_channel(self, line2):
        def program(ctx):
            other = ctx.neighbors[0]
            yield Send(other, "first")
            yield Send(other, "second")
            a = yield Recv(other)
            b = yield Recv(other)
            return [a, b]

        res = run(line2, program)
        assert res.outputs[0] == ["first", "second"]

    def test_relay_takes_one_round_per_hop(self, line3):
        def program(ctx):
            if ctx.id == 0:
                yield Send(1, "token")
                return None
            got = yield Recv(ctx.id - 1)
            if ctx.id == 1:
                yield Send(2, got)
            return got

        res = run(line3, program)
        assert res.outputs[1] == res.outputs[2] == "token"
        assert res.rounds == 3


class TestTrace:
    def test_records_and_jsonl_format(self, line2):
        def program(ctx):
            yield Send(ctx.neighbors[0], {"n": (1, 2)})
            got = yield Recv(ctx.neighbors[0])
            return got

        res = run(line2, program)
        assert res.outputs[0] == {"n": [1, 2]}  # tuples normalize to lists
        lines = res.trace.to_jsonl().strip().split("\n")
        assert len(lines) == len(res.trace) == 2
        rec = json.loads(lines[0])
        assert set(rec) == {"round", "from", "to", "payload"}

    def test_filter_by_round_and_agent(self, line3):
        def program(ctx):
            for j in ctx.neighbors:
                yield Send(j, ctx.id)
            for j in ctx.neighbors:
                yield Recv(j)
            return None

        res = run(line3, program)
        only_round1 = res.trace.filter(round=1)
        assert all(rec.round == 1 for rec in only_round1)
        touching0 = res.trace.filter(agent=0)
        assert all(0 in (rec.sender, rec.receiver) for rec in touching0)
        assert len(res.trace.filter(round=99)) == 0

    def test_empty_trace_filter(self):
        assert len(Trace().filter(round=0)) == 0
        assert Trace().to_jsonl() == ""

    def test_record_line_is_stable(self):
        rec = TraceRecord(3, 0, 1, '{"a":1}')
        assert rec.to_json_line() == '{"round":3,"from":0,"to":1,"payload":{"a":1}}'


class TestProtocol:
    def test_send_to_non_neighbor(self, line3):
        def program(ctx):
            if ctx.id == 0:
                yield Send(2, "skip a hop")
            return None

        with pytest.raises(ProtocolError, match="not a neighbor"):
            run(line3, program)

    def test_non_json_payload(self, line2):
        def program(ctx):
            yield Send(ctx.neighbors[0], object())

        with pytest.raises(ProtocolError, match="not JSON-representable"):
            run(line2, program)

    def test_non_string_dict_keys(self, line2):
        def program(ctx):
            yield Send(ctx.neighbors[0], {1: "x"})

        with pytest.raises(ProtocolError, match="keys must be strings"):
            run(line2, program)

    def test_yielding_garbage(self, line2):
        def program(ctx):
            yield "not an action"

        with pytest.raises(ProtocolError, match="expected Send or Recv"):
            run(line2, program)

    def test_deadlock_detected(self, line2):
        def program(ctx):
            if ctx.id == 0:
                yield Recv(1)  # 1 never sends
            return None

        with pytest.raises(DeadlockError, match="agent 0 awaits 1"):
            run(line2, program)

    def test_mutual_wait_deadlock(self, line2):
        def program(ctx):
            got = yield Recv(ctx.neighbors[0])
            return got

        with pytest.raises(DeadlockError):
            run(line2, program)


class TestTopologyGate:
    def test_disconnected_rejected_by_default(self):
        sysm = build_system(
            [(1, 0, set(), set()) for _ in range(4)],
            [(1, 0, {(0, 0)}), (3, 2, {(0, 0)})],
        )
        with pytest.raises(ValueError, match="weakly connected"):
            run(sysm, lambda ctx: iter(()))

    def test_disconnected_allowed_when_waived(self):
        sysm = build_system(
            [(1, 0, set(), set()) for _ in range(4)],
            [(1, 0, {(0, 0)}), (3, 2, {(0, 0)})],
        )

        def program(ctx):
            return ctx.id
            yield  # pragma: no cover

        res = run(sysm, program, require_weakly_connected=False)
        assert res.outputs == {0: 0, 1: 1, 2: 2, 3: 3}


class TestDeterminism:
    def test_identical_traces_across_runs(self, line3):
        def program(ctx):
            acc = ctx.id
            for _ in range(ctx.r):
                for j in ctx.neighbors:
                    yield Send(j, acc)
                for j in ctx.neighbors:
                    acc += yield Recv(j)
            return acc

        first = run(line3, program)
        for _ in range(3):
            again = run(line3, program)
            assert again.trace.to_jsonl() == first.trace.to_jsonl()
            assert again.outputs == first.outputs
            assert again.rounds == first.rounds
