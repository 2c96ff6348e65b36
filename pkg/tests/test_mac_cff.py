import math

import numpy as np
import pytest

from pushpull_mac import (
    FrameConfig,
    Packet,
    PacketClass,
    PullQueue,
    PushBacklog,
    SlotKind,
    contend_push,
    schedule_pull,
    simulate_cff,
)
from pushpull_mac.mac_cff import PushAbortRule
from pushpull_mac.metrics import reliability_within

PULL, PUSH = PacketClass.PULL, PacketClass.PUSH


def pull_packets(n, start_slot=0):
    return [Packet(id=i, klass=PULL, arrival_slot=start_slot + i) for i in range(n)]


def push_packets(n, start_id=0, arrival_slot=0):
    return [Packet(id=start_id + i, klass=PUSH, arrival_slot=arrival_slot) for i in range(n)]


def paper_config(alpha):
    return FrameConfig(100, 0.01, 5, 1, alpha)


class TestPullQueue:
    def test_fifo_order_enforced(self):
        q = PullQueue(pull_packets(3))
        assert len(q) == 3
        with pytest.raises(ValueError):
            q.append(Packet(id=99, klass=PULL, arrival_slot=0))

    def test_ties_break_by_id(self):
        q = PullQueue()
        q.append(Packet(id=4, klass=PULL, arrival_slot=7))
        q.append(Packet(id=5, klass=PULL, arrival_slot=7))
        assert q.popleft().id == 4


class TestSchedulePull:
    def test_small_queue_fully_served(self):
        q = PullQueue(pull_packets(3))
        served = schedule_pull(q, capacity=20, frame_start_slot=100, packet_slots=5)
        assert [p.id for p in served] == [0, 1, 2]
        assert len(q) == 0
        assert [p.delivery_slot for p in served] == [104, 109, 114]
        assert all(p.attempts == 1 for p in served)

    def test_excess_resched_next_frame(self):
        q = PullQueue(pull_packets(25))
        served = schedule_pull(q, capacity=20, frame_start_slot=0, packet_slots=5)
        assert len(served) == 20
        assert len(q) == 5
        # the five most recent arrivals remain queued
        assert [p.id for p in q] == [20, 21, 22, 23, 24]

    def test_empty_queue(self):
        assert schedule_pull(PullQueue(), capacity=20) == []

    def test_zero_capacity(self):
        q = PullQueue(pull_packets(2))
        assert schedule_pull(q, capacity=0) == []
        assert len(q) == 2


class TestContendPush:
    def test_lone_contender_always_delivered(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            delivered, surviving, outcomes = contend_push(
                PushBacklog(), push_packets(1), push_slots=80, rng=rng
            )
            assert len(delivered) == 1 and len(surviving) == 0
            assert delivered[0].attempts == 1
            kinds = [o.kind for o in outcomes]
            assert kinds.count(SlotKind.SUCCESS) == 1
            assert kinds.count(SlotKind.IDLE) == 79

    def test_two_contenders_one_slot_collide(self):
        rng = np.random.default_rng(0)
        backlog = PushBacklog(push_packets(2))
        delivered, surviving, outcomes = contend_push(backlog, [], push_slots=1, rng=rng)
        assert delivered == []
        assert len(surviving) == 2
        assert outcomes[0].kind is SlotKind.COLLISION
        assert outcomes[0].count == 2
        assert all(p.attempts == 1 for p in surviving)

    def test_zero_slots_everything_persists(self):
        delivered, surviving, outcomes = contend_push(
            PushBacklog(push_packets(3)), push_packets(2, start_id=3), 0, np.random.default_rng(0)
        )
        assert delivered == []
        assert len(surviving) == 5
        assert outcomes == []

    def test_two_contenders_two_slots_half_succeed(self):
        rng = np.random.default_rng(123)
        wins = 0
        frames = 30_000
        for _ in range(frames):
            delivered, _, _ = contend_push(PushBacklog(), push_packets(2), 2, rng)
            wins += len(delivered)
        assert wins / (2 * frames) == pytest.approx(0.5, abs=0.015)

    def test_delivery_slot_mapping_with_stride(self):
        rng = np.random.default_rng(4)
        delivered, _, _ = contend_push(
            PushBacklog(), push_packets(1), push_slots=5, rng=rng, first_slot=200, slot_stride=3
        )
        slot = delivered[0].delivery_slot
        assert slot in {200 + (k + 1) * 3 - 1 for k in range(5)}


class TestSimulateCff:
    def test_rejects_bad_args(self):
        cfg = paper_config(0.5)
        with pytest.raises(ValueError):
            simulate_cff(cfg, 100, 100, 0, seed=1)
        with pytest.raises(ValueError):
            simulate_cff(cfg, -1, 0, 10, seed=1)
        with pytest.raises(ValueError):
            simulate_cff(cfg, 0, 0, 10, seed=1, warmup_frames=10)

    def test_alpha_zero_starves_pull(self):
        rec = simulate_cff(paper_config(0.0), pull_rate=500, push_rate=0, horizon_frames=50, seed=2)
        assert rec.pull_arrived > 0
        assert rec.pull_delivered == 0
        assert rec.pull_failed == rec.pull_arrived
        assert reliability_within(rec, PULL, 1e9) == 0.0

    def test_alpha_one_starves_push(self):
        rec = simulate_cff(paper_config(1.0), pull_rate=0, push_rate=500, horizon_frames=50, seed=2)
        assert rec.push_arrived > 0
        assert rec.push_delivered == 0

    def test_sparse_pull_served_next_frame_within_two_frames(self):
        cfg = paper_config(0.5)
        deliveries = []
        rec = simulate_cff(
            cfg, pull_rate=100, push_rate=0, horizon_frames=400, seed=5, on_delivery=deliveries.append
        )
        assert rec.pull_delivered > 0
        # light load: every packet is scheduled in the frame after arrival,
        # inside the first capacity blocks, so latency <= 2 frames
        for p in deliveries:
            assert p.delivery_slot // 100 == p.arrival_slot // 100 + 1
        finite = [l for l in rec.pull_latencies if math.isfinite(l)]
        assert max(finite) <= 2 * cfg.frame_duration + 1e-12

    def test_conservation_under_overload(self):
        for rates in ((3000, 0), (0, 15000), (1500, 4000)):
            rec = simulate_cff(paper_config(0.4), *rates, horizon_frames=80, seed=9)
            assert rec.pull_arrived == rec.pull_delivered + rec.pull_failed
            assert rec.push_arrived == rec.push_delivered + rec.push_failed

    def test_deterministic(self):
        a = simulate_cff(paper_config(0.3), 400, 900, 120, seed=77)
        b = simulate_cff(paper_config(0.3), 400, 900, 120, seed=77)
        assert a.pull_latencies == b.pull_latencies
        assert a.push_latencies == b.push_latencies
        c = simulate_cff(paper_config(0.3), 400, 900, 120, seed=78)
        assert c.push_latencies != b.push_latencies

    def test_slotted_aloha_success_probability(self):
        # no retransmissions, alpha=0: per-slot load G = rate * frame / slots
        cfg = paper_config(0.0)
        rate = 10_000.0  # G = 1.0
        rec = simulate_cff(cfg, 0, rate, horizon_frames=300, seed=13, push_retransmit=False)
        p_success = rec.push_delivered / rec.push_arrived
        assert p_success == pytest.approx(math.exp(-1.0), abs=0.02)

    def test_warmup_excluded_from_measurement(self):
        cfg = paper_config(0.5)
        full = simulate_cff(cfg, 300, 300, 100, seed=3)
        trimmed = simulate_cff(cfg, 300, 300, 100, seed=3, warmup_frames=50)
        assert trimmed.pull_arrived < full.pull_arrived
        assert trimmed.pull_arrived == trimmed.pull_delivered + trimmed.pull_failed

    def test_abort_is_equivalent_when_target_met(self):
        cfg = paper_config(0.3)
        rule = PushAbortRule(latency_target=0.05, target_reliability=0.99)
        plain = simulate_cff(cfg, 0, 300, 200, seed=21)
        aborted = simulate_cff(cfg, 0, 300, 200, seed=21, push_abort=rule)
        assert plain.push_latencies == aborted.push_latencies
        assert plain.push_arrived == aborted.push_arrived

    def test_abort_certifies_miss(self):
        cfg = paper_config(0.3)
        rule = PushAbortRule(latency_target=0.02, target_reliability=0.99)
        full = simulate_cff(cfg, 0, 8000, 400, seed=21)
        fast = simulate_cff(cfg, 0, 8000, 400, seed=21, push_abort=rule)
        rel_full = reliability_within(full, PUSH, 0.02)
        rel_fast = reliability_within(fast, PUSH, 0.02)
        assert rel_full < 0.99
        assert rel_fast <= rel_full
        assert fast.push_arrived == fast.push_delivered + fast.push_failed

    def test_push_deliveries_only_in_push_subframe(self):
        cfg = paper_config(0.6)
        deliveries = []
        simulate_cff(cfg, 0, 2000, 60, seed=31, on_delivery=deliveries.append)
        assert deliveries
        for p in deliveries:
            off = p.delivery_slot % 100
            assert 60 <= off < 100
            assert p.attempts >= 1

    def test_latency_quantiles_monotone_in_alpha(self):
        # at fixed rates, more pull slots cannot worsen pull latency and
        # cannot improve push latency (Monte Carlo slack of one slot)
        from pushpull_mac import empirical_quantile

        slack = 2e-3
        rates = dict(pull_rate=700, push_rate=900, horizon_frames=600)
        lo = simulate_cff(paper_config(0.4), seed=55, **rates)
        hi = simulate_cff(paper_config(0.6), seed=55, **rates)
        for p in (0.5, 0.9):
            assert empirical_quantile(hi.pull_latencies, p) <= empirical_quantile(lo.pull_latencies, p) + slack
            assert empirical_quantile(hi.push_latencies, p) >= empirical_quantile(lo.push_latencies, p) - slack
