"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The two sweep criteria
carry their stated runtime budgets and are the slow part of the suite.
"""
import math
import time

import numpy as np

from pushpull_mac import (
    CapacitySpec,
    FrameConfig,
    PacketClass,
    PushBacklog,
    Packet,
    PushTrigger,
    RcsPopulation,
    SemanticQuery,
    capacity_frontier,
    contend_push,
    frame_layout,
    max_class_rate,
    run_experiment,
    simulate_cff,
    simulate_rcs,
    validate_config,
)
from pushpull_mac.cli import main as cli_main

from _invariants import check_cff_run, check_rcs_frame, random_cff_config, random_rcs_case

PULL, PUSH = PacketClass.PULL, PacketClass.PUSH

PAPER_FRAME = dict(slots_per_frame=100, frame_duration=0.01, pull_packet_slots=5, push_packet_slots=1)

RCS_POPULATION = RcsPopulation(n_pull_devices=12, n_push_devices=40, trigger=PushTrigger(0.5))
RCS_QUERY = SemanticQuery(0.25, 0.75)


def _report(criterion: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[acceptance] criterion {criterion}: {status}{' — ' + detail if detail else ''}")
    assert passed, f"criterion {criterion}: {detail}"


def test_criterion_1_capacity_frontier_qualitative():
    """Fig.-3-style frontier: monotone in alpha, dominated by larger L,
    bounded by the pull service ceiling; finishes inside 10 minutes."""
    alphas = [round(0.1 * i, 1) for i in range(1, 10)]
    latencies_ms = (20.0, 30.0, 50.0)
    tol = 50.0
    base = FrameConfig(alpha=0.5, **PAPER_FRAME)
    start = time.monotonic()
    frontier = {}
    for l_ms in latencies_ms:
        spec = CapacitySpec(
            target_latency=l_ms * 1e-3,
            rate_tolerance=tol,
            rate_upper_bound=10_000.0,
            horizon_frames=2000,
            replications=20,
        )
        t0 = time.monotonic()
        points = capacity_frontier(base, alphas, spec, master_seed=1)
        frontier[l_ms] = points
        pulls = " ".join(f"{p.max_pull_rate:7.1f}" for p in points)
        pushes = " ".join(f"{p.max_push_rate:7.1f}" for p in points)
        print(f"  L={l_ms:4.0f}ms  ({time.monotonic() - t0:5.1f}s)  pull: {pulls}")
        print(f"  {'':14} push: {pushes}")
    elapsed = time.monotonic() - start

    problems = []
    for l_ms, points in frontier.items():
        if any(p.error for p in points):
            problems.append(f"L={l_ms}: point errors {[p.error for p in points if p.error]}")
        # (a) monotone within one rate tolerance
        for prev, cur in zip(points, points[1:]):
            if cur.max_pull_rate < prev.max_pull_rate - tol:
                problems.append(
                    f"L={l_ms}: pull capacity drops {prev.max_pull_rate:.0f}->{cur.max_pull_rate:.0f} "
                    f"at alpha={cur.alpha}"
                )
            if cur.max_push_rate > prev.max_push_rate + tol:
                problems.append(
                    f"L={l_ms}: push capacity rises {prev.max_push_rate:.0f}->{cur.max_push_rate:.0f} "
                    f"at alpha={cur.alpha}"
                )
        # (c) hard service bound for pull
        for p in points:
            if p.max_pull_rate > p.alpha * 2000.0 + 1e-9:
                problems.append(f"L={l_ms}: pull capacity {p.max_pull_rate:.1f} > {p.alpha * 2000:.1f}")
    # (b) pointwise dominance of larger latency budgets
    for lo_l, hi_l in ((20.0, 30.0), (30.0, 50.0)):
        for p_lo, p_hi in zip(frontier[lo_l], frontier[hi_l]):
            if p_hi.max_pull_rate < p_lo.max_pull_rate - tol:
                problems.append(
                    f"pull dominance broken at alpha={p_lo.alpha}: "
                    f"L={hi_l} gives {p_hi.max_pull_rate:.0f} < L={lo_l} {p_lo.max_pull_rate:.0f}"
                )
            if p_hi.max_push_rate < p_lo.max_push_rate - tol:
                problems.append(
                    f"push dominance broken at alpha={p_lo.alpha}: "
                    f"L={hi_l} gives {p_hi.max_push_rate:.0f} < L={lo_l} {p_lo.max_push_rate:.0f}"
                )
    if elapsed > 600.0:
        problems.append(f"runtime {elapsed:.0f}s exceeds 600s")
    _report(
        "1 (capacity frontier, Fig.-3 trends)",
        not problems,
        "; ".join(problems) if problems else f"27 points in {elapsed:.0f}s",
    )


def test_criterion_2_rcs_sweep_qualitative():
    """Fig.-4-style RCS sweep: accuracy nondecreasing and push success
    nonincreasing in alpha, both improving with S; inside 2 minutes."""
    alphas = [round(0.1 * i, 1) for i in range(11)]
    frame_sizes = (25, 50, 75)
    tol = 0.02
    n_frames = 100_000
    start = time.monotonic()
    acc, push = {}, {}
    for s in frame_sizes:
        accs, pushes = [], []
        for i, alpha in enumerate(alphas):
            cfg = FrameConfig(s, 0.01, 1, 1, alpha)
            res = simulate_rcs(cfg, RCS_POPULATION, RCS_QUERY, n_frames, seed=1000 + i)
            accs.append(res.retrieval_accuracy)
            pushes.append(res.push_success_prob if res.push_success_prob is not None else 0.0)
        acc[s], push[s] = accs, pushes
        print(f"  S={s:2d} acc : " + " ".join(f"{x:.3f}" for x in accs))
        print(f"  S={s:2d} push: " + " ".join(f"{x:.3f}" for x in pushes))
    elapsed = time.monotonic() - start

    problems = []
    for s in frame_sizes:
        for i in range(len(alphas) - 1):
            if acc[s][i + 1] < acc[s][i] - tol:
                problems.append(f"S={s}: accuracy drops at alpha={alphas[i + 1]}")
            if push[s][i + 1] > push[s][i] + tol:
                problems.append(f"S={s}: push success rises at alpha={alphas[i + 1]}")
    for s_lo, s_hi in ((25, 50), (50, 75)):
        for i, alpha in enumerate(alphas):
            if acc[s_hi][i] < acc[s_lo][i] - tol:
                problems.append(f"accuracy not improving with S at alpha={alpha}")
            if push[s_hi][i] < push[s_lo][i] - tol:
                problems.append(f"push success not improving with S at alpha={alpha}")
    if elapsed > 120.0:
        problems.append(f"runtime {elapsed:.0f}s exceeds 120s")
    _report(
        "2 (RCS sweep, Fig.-4 trends)",
        not problems,
        "; ".join(problems) if problems else f"33 points in {elapsed:.0f}s",
    )


def test_criterion_3_slotted_aloha_oracle():
    """CFF push channel without retransmissions reproduces e^-G."""
    problems = []
    details = []
    for g, frames in ((0.5, 2200), (1.0, 1100)):
        cfg = FrameConfig(alpha=0.0, **PAPER_FRAME)
        rate = g * 100 / cfg.frame_duration  # per-slot load G over 100 push slots
        rec = simulate_cff(cfg, 0.0, rate, frames, seed=33, push_retransmit=False)
        assert rec.push_arrived >= 100_000
        p = rec.push_delivered / rec.push_arrived
        details.append(f"G={g}: {p:.4f} vs e^-G={math.exp(-g):.4f} (n={rec.push_arrived})")
        if abs(p - math.exp(-g)) > 0.01:
            problems.append(details[-1])
    _report("3 (slotted-ALOHA oracle)", not problems, "; ".join(problems or details))


def test_criterion_4_small_instance_enumeration():
    """2 contenders / 2 slots succeed half the time; 2 / 1 slot never."""
    frames = 100_000
    rng = np.random.default_rng(44)
    wins = 0
    for _ in range(frames):
        delivered, _, _ = contend_push(
            PushBacklog(),
            [Packet(0, PUSH, 0), Packet(1, PUSH, 0)],
            push_slots=2,
            rng=rng,
        )
        wins += len(delivered)
    contend_rate = wins / (2 * frames)

    forced = 0
    for _ in range(frames):
        delivered, _, _ = contend_push(
            PushBacklog(),
            [Packet(0, PUSH, 0), Packet(1, PUSH, 0)],
            push_slots=1,
            rng=rng,
        )
        forced += len(delivered)

    # same enumeration through the RCS reserved portion (2 matched, 2 reserved slots)
    pop2 = RcsPopulation(2, 0, PushTrigger(1.0))
    res2 = simulate_rcs(FrameConfig(2, 0.01, 1, 1, 1.0), pop2, SemanticQuery(0.0, 1.0), frames, seed=45)
    rcs_device_rate = res2.record.rcs_retrieval_successes / frames  # both-or-neither
    res1 = simulate_rcs(FrameConfig(1, 0.01, 1, 1, 1.0), pop2, SemanticQuery(0.0, 1.0), frames, seed=46)

    problems = []
    if abs(contend_rate - 0.5) > 0.01:
        problems.append(f"contend_push 2/2 rate {contend_rate:.4f}")
    if forced != 0:
        problems.append(f"contend_push 2/1 delivered {forced} packets")
    if abs(rcs_device_rate - 0.5) > 0.01:
        problems.append(f"RCS reserved 2/2 rate {rcs_device_rate:.4f}")
    if res1.retrieval_accuracy != 0.0:
        problems.append(f"RCS reserved 2/1 accuracy {res1.retrieval_accuracy}")
    _report(
        "4 (small-instance enumeration)",
        not problems,
        "; ".join(problems) if problems else f"2/2 rates {contend_rate:.3f} and {rcs_device_rate:.3f}, 2/1 exact zero",
    )


def test_criterion_5_conservation_and_purity():
    """Randomized invariants over >= 10^3 generated configurations."""
    rng = np.random.default_rng(555)
    n_cff, n_rcs = 600, 500
    for _ in range(n_cff):
        check_cff_run(random_cff_config(rng), rng)
    for _ in range(n_rcs):
        config, population, query = random_rcs_case(rng)
        check_rcs_frame(config, population, query, rng)
    _report(
        "5 (conservation and purity invariants)",
        True,
        f"{n_cff} CFF runs + {n_rcs} RCS frames",
    )


def test_criterion_6_deterministic_output(tmp_path):
    """Identical (config, seed) gives byte-identical CSV, for any worker count
    and through the CLI."""
    data = {
        "protocol": "rcs",
        "frame": {
            "slots_per_frame": 25,
            "frame_duration_ms": 10.0,
            "pull_packet_slots": 1,
            "push_packet_slots": 1,
        },
        "alphas": [0.2, 0.8],
        "slots_per_frame_values": [25, 50],
        "population": {
            "n_pull_devices": 6,
            "n_push_devices": 10,
            "query": [0.25, 0.75],
            "push_threshold": 0.5,
        },
        "n_frames": 2000,
        "master_seed": 6,
    }
    cfg = validate_config(data)
    paths = [tmp_path / name for name in ("a.csv", "b.csv", "w2.csv", "cli.csv")]
    run_experiment(cfg, out=str(paths[0]), workers=1)
    run_experiment(cfg, out=str(paths[1]), workers=1)
    run_experiment(cfg, out=str(paths[2]), workers=2)
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(__import__("json").dumps(data))
    assert cli_main(["sweep", "--config", str(cfg_file), "--out", str(paths[3]), "--quiet"]) == 0
    blobs = [p.read_bytes() for p in paths]
    identical = all(b == blobs[0] for b in blobs)
    _report(
        "6 (byte-identical determinism)",
        identical and len(blobs[0]) > 0,
        f"{len(blobs[0])} bytes across reruns, worker pools and the CLI",
    )


def test_criterion_7_degenerate_endpoints():
    """alpha=0 kills pull capacity, alpha=1 kills push, exactly."""
    problems = []

    cff0 = FrameConfig(alpha=0.0, **PAPER_FRAME)
    cff1 = FrameConfig(alpha=1.0, **PAPER_FRAME)
    if frame_layout(cff0).pull_tx_capacity != 0:
        problems.append("alpha=0 leaves pull capacity")
    if frame_layout(cff1).push_slot_budget != 0:
        problems.append("alpha=1 leaves push slots")

    rec0 = simulate_cff(cff0, pull_rate=800, push_rate=0, horizon_frames=100, seed=7)
    if rec0.pull_delivered != 0 or rec0.pull_failed != rec0.pull_arrived:
        problems.append("alpha=0 delivered pull traffic")
    rec1 = simulate_cff(cff1, pull_rate=0, push_rate=800, horizon_frames=100, seed=7)
    if rec1.push_delivered != 0:
        problems.append("alpha=1 delivered push traffic")

    spec = CapacitySpec(
        target_latency=0.02, rate_tolerance=50.0, rate_upper_bound=10_000.0,
        horizon_frames=50, replications=1,
    )
    pull_cap = max_class_rate(cff0, PULL, spec, master_seed=3)
    push_cap = max_class_rate(cff1, PUSH, spec, master_seed=3)
    if pull_cap.rate != 0.0 or not pull_cap.unreachable or pull_cap.probes:
        problems.append("alpha=0 pull capacity search not exactly zero")
    if push_cap.rate != 0.0 or not push_cap.unreachable or push_cap.probes:
        problems.append("alpha=1 push capacity search not exactly zero")

    res = simulate_rcs(
        FrameConfig(50, 0.01, 1, 1, 1.0), RCS_POPULATION, RCS_QUERY, 5000, seed=8
    )
    if res.record.rcs_push_attempts == 0 or res.record.rcs_push_successes != 0:
        problems.append("RCS alpha=1 allowed push successes")
    if res.push_success_prob != 0.0:
        problems.append(f"RCS alpha=1 push probability {res.push_success_prob}")
    for s in (25, 50, 75):
        if FrameConfig(s, 0.01, 1, 1, 0.0).pull_slot_budget != 0:
            problems.append(f"RCS alpha=0 reserves slots at S={s}")

    _report("7 (degenerate endpoints)", not problems, "; ".join(problems) if problems else "all exact")
