"""Acceptance suite: one test per acceptance criterion, in order.

Each test prints a single `[criterion N]` line (visible with `pytest -s`)
and asserts the stated tolerance.  Criterion 9b is implemented faithfully
and is expected to fail: the witness codimension of the log-rate schedule
provably outgrows the m^(log2 log2 m) envelope (see notes in the test).
"""

import math
import time

import pytest

from aplab import obstruction as ob
from aplab.characters import CharacterTable, build_group, verify_orthogonality
from aplab.cli import main
from aplab.discrepancy import search_character_split, search_signs
from aplab.mixed_norm import ExponentSchedule, MixedNormVector, compactness_sequence
from aplab.moduli import (
    growth_envelope_check,
    numeric_distance_upper,
    split_sequence,
    witness_point,
)

SEED = 7


def _report(num: str, name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[criterion {num}] {name}: {status}{suffix}")


def test_01_character_orthogonality(tables_through_8):
    t0 = time.time()
    worst = max(verify_orthogonality(t, 1e-9).max_deviation for t in tables_through_8)
    elapsed = time.time() - t0
    ok = worst < 1e-9 and elapsed < 10.0
    _report("1", "character orthogonality n<=8", ok, f"max deviation {worst:.2e}, {elapsed:.2f}s")
    assert worst < 1e-9
    assert elapsed < 10.0


def test_02_search_oracle_equivalence(small_data):
    t0 = time.time()
    split_ok = True
    for n in (0, 1, 2):
        table = CharacterTable(build_group(n))
        exhaustive = search_character_split(table, strategy="exhaustive")
        randomized = search_character_split(
            table, strategy="random-restart", budget=3000, seed=SEED
        )
        split_ok &= abs(exhaustive.discrepancy - randomized.discrepancy) <= 1e-9
    sign_ok = True
    for n in (0, 1, 2, 3):
        exhaustive = search_signs(n, small_data, strategy="exhaustive")
        randomized = search_signs(
            n, small_data, strategy="random-restart", budget=2560, seed=11
        )
        sign_ok &= abs(exhaustive.objective - randomized.objective) <= 1e-12
    elapsed = time.time() - t0
    ok = split_ok and sign_ok and elapsed < 30.0
    _report("2", "exhaustive vs randomized search", ok, f"{elapsed:.2f}s")
    assert split_ok and sign_ok
    assert elapsed < 30.0


def test_03_bound_certification(full_bundle):
    constants = full_bundle["constants"]
    elapsed = full_bundle["build_seconds"] + full_bundle["certify_seconds"]
    identity_worst = max(r.middle_identity_residual for r in constants.cross_rows)
    ok = (
        constants.split_constant <= 6.0
        and constants.cross_constant <= 6.0
        and identity_worst <= 1e-9
        and elapsed < 300.0
    )
    _report(
        "3",
        "certified constants n<=8",
        ok,
        f"balance {constants.split_constant:.4f}, cross {constants.cross_constant:.4f}, "
        f"middle-identity residual {identity_worst:.2e}, {elapsed:.1f}s",
    )
    assert constants.split_constant <= 6.0
    assert constants.cross_constant <= 6.0
    assert identity_worst <= 1e-9
    assert {r.level for r in constants.cross_rows} == set(range(1, 9))
    assert elapsed < 300.0


def test_04_biorthogonality_and_form_agreement(full_bundle, log_schedule):
    frame = ob.BasisFrame(full_bundle["data"], log_schedule, 9)
    bio = ob.biorthogonality_deviation(frame)
    agreement = max(ob.form_agreement_deviation(frame, n) for n in range(1, 9))
    ok = bio < 1e-9 and agreement < 1e-9
    _report(
        "4",
        "biorthogonality and form agreement n,m<=8",
        ok,
        f"biorthogonality {bio:.2e}, agreement {agreement:.2e}",
    )
    assert bio < 1e-9
    assert agreement < 1e-9


def test_05_telescoping_identity(full_bundle, log_schedule):
    frame = ob.BasisFrame(full_bundle["data"], log_schedule, 4)
    worst = 0.0
    for seed in range(100):
        op = ob.OperatorMatrix.gaussian(4, seed=seed)
        for n in range(4):
            worst = max(worst, ob.telescope_residual(op, n, frame))
    ok = worst < 1e-9
    _report("5", "telescoping identity, 100 random operators at N=4", ok, f"max residual {worst:.2e}")
    assert worst < 1e-9


def test_06_telescope_norm_bound(full_bundle, log_schedule, power_schedule):
    constants = full_bundle["constants"]
    data = full_bundle["data"]
    worst_ratio = 0.0
    ok = True
    for schedule in (power_schedule, log_schedule):
        for n in range(1, 9):
            report = ob.check_norm_bound(n, data, schedule, constants.cross_constant)
            ok &= report.passed
            worst_ratio = max(worst_ratio, report.max_norm / report.bound)
    _report(
        "6",
        "telescope norm envelope n<=8, both schedules",
        ok,
        f"worst norm/bound {worst_ratio:.3f}",
    )
    assert ok


def test_07_trace_obstruction(full_bundle, log_schedule):
    frame = ob.BasisFrame(full_bundle["data"], log_schedule, 8)
    ident = ob.OperatorMatrix.identity(8)
    identity_dev = 0.0
    for n in range(9):
        identity_dev = max(identity_dev, abs(ob.level_trace(ident, n) - 1.0))
        identity_dev = max(
            identity_dev, abs(ob.level_trace(ident, n, frame=frame, via="coordinates") - 1.0)
        )
    rank_dev = 0.0
    for support in (0, 2, 4, 7):
        for seed in range(3):
            op = ob.random_finite_rank_operator(8, support_level=support, rank=3, seed=seed)
            for n in range(support + 1, 9):
                rank_dev = max(rank_dev, abs(ob.level_trace(op, n)))
    ok = identity_dev <= 1e-10 and rank_dev <= 1e-12
    _report(
        "7",
        "identity trace 1 vs finite-rank vanishing",
        ok,
        f"identity dev {identity_dev:.2e}, finite-rank dev {rank_dev:.2e}",
    )
    assert identity_dev <= 1e-10
    assert rank_dev <= 1e-12


def test_08_compactness_decay(log_schedule, power_schedule):
    rel = max(
        abs(compactness_sequence(log_schedule, n) - (n + 1) ** -0.5) / (n + 1) ** -0.5
        for n in (99, 9999)
    )
    power_window = max(compactness_sequence(power_schedule, n) for n in range(600, 2001, 50))
    power_tail = compactness_sequence(power_schedule, 5000)
    ok = rel < 1e-12 and power_window < 1.0 and power_tail < 1e-3
    _report(
        "8",
        "compactness decay",
        ok,
        f"log collapse rel err {rel:.2e}, power max on [600,2000] {power_window:.3f}, "
        f"power at 5000 {power_tail:.2e}",
    )
    assert rel < 1e-12
    assert power_window < 1.0
    assert power_tail < 1e-3


def test_09a_witness_codimension_identity(log_schedule, power_schedule):
    ok = True
    for schedule in (power_schedule, log_schedule):
        for m in (16, 100, 2**10, 2**20):
            point = witness_point(schedule, m)
            n = point.head_level
            ok &= point.codimension == 3 * (2 ** (n + 1) - 1)
            ok &= point.codimension == sum(3 * 2**j for j in range(n + 1))
    _report("9a", "witness codimension identity", ok)
    assert ok


def test_09b_growth_envelope(log_schedule):
    """Faithful check of the stated envelope; it cannot hold.

    With the log-rate gap 3*log2(n+1)/n, certifying m-dimensional tail
    subspaces forces the head level to ~3*log2(m)*log2(log2(m)), so the
    codimension 3*(2^(head+1)-1) has log2 around 240/549/1236/2125 at the
    four samples while the envelope exponent log2(m)*log2(log2(m)) is only
    33/86/213/384.  The gap is structural, a factor of about three in the
    exponent asymptotically and larger at these sizes, not a numerical
    artifact, so this check fails by construction.
    """
    samples = (2**10, 2**20, 2**40, 2**64)
    report = growth_envelope_check(log_schedule, samples)
    detail = "; ".join(
        f"m=2^{int(math.log2(r.m))}: codim_log2 {r.codimension_log2:.1f} vs envelope {r.envelope_log2:.1f}"
        for r in report.rows
    )
    _report("9b", "growth envelope codim(m) <= m^(log2 log2 m)", report.passed, detail)
    assert report.passed, (
        "the witness codimension exceeds the m^(log2 log2 m) envelope at every "
        f"sample: {detail}"
    )


def test_09c_alternating_split(power_schedule):
    result = split_sequence(power_schedule, 3)
    first = result.thresholds[0].exact
    increasing = list(result.indices) == sorted(set(result.indices))
    ok = first == 250 and increasing
    _report("9c", "split threshold 250 and increasing indices", ok, f"indices {result.indices[:2]}...")
    assert first == 250
    assert increasing


def test_10_distance_oracle():
    sched = ExponentSchedule.explicit([3.0, 3.0])
    same_block = [MixedNormVector.single(sched, 0, 0), MixedNormVector.single(sched, 0, 1)]
    est1 = numeric_distance_upper(same_block, samples=256, seed=1)
    cross_level = [MixedNormVector.single(sched, 0, 0), MixedNormVector.single(sched, 1, 0)]
    est2 = numeric_distance_upper(cross_level, samples=128, seed=1)
    dev1 = abs(est1.ratio - 2.0 ** (1.0 / 6.0))
    dev2 = abs(est2.ratio - 1.0)
    ok = dev1 <= 1e-3 and dev2 <= 1e-9
    _report(
        "10",
        "distance oracle",
        ok,
        f"same-block ratio {est1.ratio:.6f} (dev {dev1:.1e}), cross-level dev {dev2:.1e}",
    )
    assert dev1 <= 1e-3
    assert dev2 <= 1e-9


def test_11_determinism(tmp_path):
    args = (
        "--max-level", "3", "--schedule", "log",
        "--budget", "64", "--sign-budget", "16", "--seed", "7",
    )
    outs = (tmp_path / "run1", tmp_path / "run2")
    for out in outs:
        assert main(["build", *args, "--out", str(out)]) == 0
        assert main(["verify", "--schedule", "log", "--out", str(out)]) == 0
        assert main(["ap", "--schedule", "log", "--out", str(out)]) == 0
        assert main([
            "moduli", "--schedule", "log", "--out", str(out),
            "--m-samples", "32,1024", "--depth", "2",
        ]) == 0
    files = sorted(p for p in outs[0].rglob("*") if p.is_file())
    mismatched = [
        str(p.relative_to(outs[0]))
        for p in files
        if (outs[1] / p.relative_to(outs[0])).read_bytes() != p.read_bytes()
    ]
    ok = bool(files) and not mismatched
    _report("11", "byte-identical reruns", ok, f"{len(files)} files compared")
    assert files
    assert not mismatched
