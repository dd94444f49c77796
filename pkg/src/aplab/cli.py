"""Command-line front end: build, verify, ap, moduli, split.

Exit codes: 0 success, 1 check failure, 2 configuration error, 3 missing
artifact.  All randomness is seeded through the config, payloads carry no
timestamps, and reruns with identical config reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import obstruction
from .characters import CharacterTable, build_group, verify_orthogonality
from .discrepancy import (
    CharacterSplit,
    ConstructionData,
    LevelData,
    SignPattern,
    certify_constants,
    search_character_split,
    search_signs,
    sign_objective,
    split_discrepancy,
)
from .errors import (
    AplabError,
    BadParameter,
    CheckFailed,
    MissingArtifact,
)
from .mixed_norm import ExponentSchedule, compactness_sequence
from .moduli import (
    TypeCotypeConstants,
    growth_envelope_check,
    split_sequence,
    witness_point,
)
from .store import ArtifactStore

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3

ACCEPT_CONSTANT = 6.0
OUT_ENV_VAR = "APLAB_OUT"

DEFAULT_M_SAMPLES = (2**10, 2**20, 2**40, 2**64)


@dataclass(frozen=True)
class RunConfig:
    schedule: ExponentSchedule
    max_level: int
    seed: int
    budget: int
    sign_budget: int
    tol: float
    c1: float
    c2: float
    out: Path

    def __post_init__(self) -> None:
        if self.max_level < 1:
            raise BadParameter(f"max level must be >= 1, got {self.max_level}")
        if self.budget < 1 or self.sign_budget < 1:
            raise BadParameter("budgets must be >= 1")
        if self.tol <= 0:
            raise BadParameter(f"tolerance must be positive, got {self.tol}")
        if self.c1 < 1.0 or self.c2 < 1.0:
            raise BadParameter("c1 and c2 must be >= 1")

    def to_payload(self) -> Dict:
        return {
            "schedule": self.schedule.to_config(),
            "max_level": self.max_level,
            "seed": self.seed,
            "budget": self.budget,
            "sign_budget": self.sign_budget,
            "tol": self.tol,
            "c1": self.c1,
            "c2": self.c2,
        }


def split_strategy_for(level: int) -> str:
    return "exhaustive" if level <= 2 else "random-restart"


def sign_strategy_for(level: int) -> str:
    return "exhaustive" if level <= 3 else "random-restart"


def build_levels(
    max_level: int, seed: int, budget: int, sign_budget: int
) -> ConstructionData:
    """Search splits for all levels, then sign patterns in level order."""
    data = ConstructionData()
    for n in range(max_level + 1):
        table = CharacterTable(build_group(n, max_level=max(24, max_level)))
        split = search_character_split(
            table, strategy=split_strategy_for(n), budget=budget, seed=seed
        )
        data.put(LevelData(table=table, split=split))
    for n in range(max_level + 1):
        pattern = search_signs(
            n, data, strategy=sign_strategy_for(n), budget=sign_budget, seed=seed
        )
        data.set_signs(pattern)
    return data


EXPONENT_EXPORT_MAX_ORDER = 48  # dense exponent matrices stored up to this order


def _level_payload(item: LevelData) -> Dict:
    signs = item.require_signs()
    payload = {
        "level": item.level,
        "order": item.table.order,
        "split": {
            "anchors": list(item.split.anchors),
            "carriers": list(item.split.carriers),
            "discrepancy": item.split.discrepancy,
        },
        "signs": {"signs": list(signs.signs), "objective": signs.objective},
    }
    if item.table.order <= EXPONENT_EXPORT_MAX_ORDER:
        payload["exponents"] = [[int(e) for e in row] for row in item.table.exponent_matrix()]
    return payload


def _load_config(store: ArtifactStore) -> Dict:
    return store.read_json("config.json")  # type: ignore[return-value]


def load_data(store: ArtifactStore, max_level: int) -> ConstructionData:
    """Rebuild construction data from stored level payloads."""
    data = ConstructionData()
    for n in range(max_level + 1):
        payload = store.read_json(f"levels/level_{n:02d}.json")
        assert isinstance(payload, dict)
        table = CharacterTable(build_group(n, max_level=max(24, max_level)))
        split = CharacterSplit(
            level=n,
            anchors=tuple(payload["split"]["anchors"]),
            carriers=tuple(payload["split"]["carriers"]),
            discrepancy=float(payload["split"]["discrepancy"]),
        )
        data.put(LevelData(table=table, split=split))
    for n in range(max_level + 1):
        payload = store.read_json(f"levels/level_{n:02d}.json")
        assert isinstance(payload, dict)
        data.set_signs(
            SignPattern(
                level=n,
                signs=tuple(payload["signs"]["signs"]),
                objective=float(payload["signs"]["objective"]),
            )
        )
    return data


def _constants_payload(constants) -> Dict:
    return {
        "split_constant": constants.split_constant,
        "cross_constant": constants.cross_constant,
        "threshold": ACCEPT_CONSTANT,
        "split_rows": [
            {
                "level": r.level,
                "stored": r.stored,
                "recomputed": r.recomputed,
                "scale": r.scale,
                "ratio": r.ratio,
            }
            for r in constants.split_rows
        ],
        "cross_rows": [
            {
                "level": r.level,
                "max_lower": r.max_lower,
                "max_middle": r.max_middle,
                "max_upper": r.max_upper,
                "overall": r.overall,
                "scale": r.scale,
                "ratio": r.ratio,
                "middle_identity_residual": r.middle_identity_residual,
            }
            for r in constants.cross_rows
        ],
    }


def cmd_build(config: RunConfig) -> int:
    store = ArtifactStore(config.out)
    data = build_levels(config.max_level, config.seed, config.budget, config.sign_budget)
    constants = certify_constants(range(config.max_level + 1), data)

    store.write_json("config.json", config.to_payload())
    for n in data.levels():
        store.write_json(f"levels/level_{n:02d}.json", _level_payload(data.require(n)))
    store.write_json("constants.json", _constants_payload(constants))
    store.update_manifest()

    for row in constants.split_rows:
        if row.ratio > ACCEPT_CONSTANT:
            print(
                f"build: level {row.level} balance discrepancy ratio {row.ratio:.3f} "
                f"exceeds {ACCEPT_CONSTANT}",
                file=sys.stderr,
            )
            return EXIT_CHECK_FAILED
    for row in constants.cross_rows:
        if row.ratio > ACCEPT_CONSTANT:
            print(
                f"build: level {row.level} cross-block ratio {row.ratio:.3f} "
                f"exceeds {ACCEPT_CONSTANT}",
                file=sys.stderr,
            )
            return EXIT_CHECK_FAILED
    print(
        f"build: levels 0..{config.max_level} stored; "
        f"balance constant {constants.split_constant:.4f}, "
        f"cross constant {constants.cross_constant:.4f}"
    )
    return EXIT_OK


def _verify_rows(
    config: RunConfig,
    schedule: ExponentSchedule,
    data: ConstructionData,
    stored_constants: Dict,
) -> List[Dict]:
    rows: List[Dict] = []
    top = data.max_level
    tol = config.tol

    for n in range(top + 1):
        report = verify_orthogonality(data.require(n).table, tol)
        rows.append(
            {
                "check": "character-orthogonality",
                "level": n,
                "measured": report.max_deviation,
                "limit": tol,
                "passed": report.passed,
            }
        )

    stored_split = {r["level"]: r for r in stored_constants["split_rows"]}
    for n in range(top + 1):
        item = data.require(n)
        recomputed = split_discrepancy(item.split, item.table)
        drift = abs(recomputed - item.split.discrepancy)
        rows.append(
            {
                "check": "balance-discrepancy-drift",
                "level": n,
                "measured": drift,
                "limit": tol,
                "passed": drift <= tol,
            }
        )
        stored_row = stored_split.get(n)
        if stored_row is not None:
            drift_stored = abs(recomputed - stored_row["recomputed"])
            rows.append(
                {
                    "check": "balance-discrepancy-bound",
                    "level": n,
                    "measured": recomputed / stored_row["scale"],
                    "limit": ACCEPT_CONSTANT,
                    "passed": recomputed / stored_row["scale"] <= ACCEPT_CONSTANT
                    and drift_stored <= tol,
                }
            )

    fresh = certify_constants(range(top + 1), data)
    stored_cross = {r["level"]: r for r in stored_constants["cross_rows"]}
    for row in fresh.cross_rows:
        stored_row = stored_cross.get(row.level)
        drift = abs(row.overall - stored_row["overall"]) if stored_row else math.inf
        rows.append(
            {
                "check": "cross-block-bound",
                "level": row.level,
                "measured": row.ratio,
                "limit": ACCEPT_CONSTANT,
                "passed": row.ratio <= ACCEPT_CONSTANT and drift <= tol,
            }
        )
        rows.append(
            {
                "check": "cross-middle-identity",
                "level": row.level,
                "measured": row.middle_identity_residual,
                "limit": tol,
                "passed": row.middle_identity_residual <= tol,
            }
        )
    for n in range(1, top + 1):
        item = data.require(n)
        recomputed_obj = sign_objective(n, data, item.require_signs().signs)
        drift = abs(recomputed_obj - item.require_signs().objective)
        rows.append(
            {
                "check": "sign-objective-drift",
                "level": n,
                "measured": drift,
                "limit": tol,
                "passed": drift <= tol,
            }
        )

    frame = obstruction.BasisFrame(data, schedule, top)
    dev = obstruction.biorthogonality_deviation(frame)
    rows.append(
        {
            "check": "biorthogonality",
            "level": top,
            "measured": dev,
            "limit": tol,
            "passed": dev <= tol,
        }
    )
    for n in range(1, top):
        dev = obstruction.form_agreement_deviation(frame, n)
        rows.append(
            {
                "check": "functional-form-agreement",
                "level": n,
                "measured": dev,
                "limit": tol,
                "passed": dev <= tol,
            }
        )

    t_top = min(top, 4)
    ops = [obstruction.OperatorMatrix.identity(t_top)]
    ops.extend(obstruction.OperatorMatrix.gaussian(t_top, seed=config.seed + i) for i in range(3))
    t_frame = obstruction.BasisFrame(data, schedule, t_top)
    worst = 0.0
    for op in ops:
        for n in range(t_top):
            worst = max(worst, obstruction.telescope_residual(op, n, t_frame))
    rows.append(
        {
            "check": "telescoping-identity",
            "level": t_top,
            "measured": worst,
            "limit": tol,
            "passed": worst <= tol,
        }
    )

    cross_const = float(stored_constants["cross_constant"])
    for n in range(1, top):
        report = obstruction.check_norm_bound(n, data, schedule, cross_const)
        rows.append(
            {
                "check": "telescope-norm-envelope",
                "level": n,
                "measured": report.max_norm,
                "limit": report.bound,
                "passed": report.passed,
            }
        )

    if schedule.kind == "power":
        horizon_value = compactness_sequence(schedule, 5000)
        rows.append(
            {
                "check": "compactness-decay",
                "level": 5000,
                "measured": horizon_value,
                "limit": 1e-3,
                "passed": horizon_value < 1e-3,
            }
        )
    elif schedule.kind == "log":
        horizon_value = compactness_sequence(schedule, 10**6)
        rows.append(
            {
                "check": "compactness-decay",
                "level": 10**6,
                "measured": horizon_value,
                "limit": 1e-3,
                "passed": horizon_value < 1e-3,
            }
        )
    return rows


def cmd_verify(config: RunConfig) -> int:
    store = ArtifactStore(config.out)
    stored_config = _load_config(store)
    assert isinstance(stored_config, dict)
    max_level = int(stored_config["max_level"])
    data = load_data(store, max_level)
    constants = store.read_json("constants.json")
    assert isinstance(constants, dict)

    # artifacts are verified under the schedule they were built with
    schedule = ExponentSchedule.from_config(stored_config["schedule"])
    rows: List[Dict] = []
    for n in range(max_level + 1):
        payload = store.read_json(f"levels/level_{n:02d}.json")
        assert isinstance(payload, dict)
        if "exponents" not in payload:
            continue
        stored = np.asarray(payload["exponents"], dtype=np.int64)
        mismatches = int((stored != data.require(n).table.exponent_matrix()).sum())
        rows.append(
            {
                "check": "character-table-integrity",
                "level": n,
                "measured": float(mismatches),
                "limit": 0.0,
                "passed": mismatches == 0,
            }
        )
    rows.extend(_verify_rows(config, schedule, data, constants))

    store.write_json("verify_report.json", {"rows": rows})
    store.update_manifest()

    failing = [r for r in rows if not r["passed"]]
    for row in rows:
        status = "pass" if row["passed"] else "FAIL"
        print(
            f"verify: {row['check']:<28} level {row['level']:>7} "
            f"measured {row['measured']:.6g} limit {row['limit']:.6g} {status}"
        )
    if failing:
        first = failing[0]
        print(
            f"verify: first failure {first['check']} at level {first['level']}",
            file=sys.stderr,
        )
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_ap(config: RunConfig, operators: int, max_rank: int) -> int:
    store = ArtifactStore(config.out)
    stored_config = _load_config(store)
    assert isinstance(stored_config, dict)
    max_level = int(stored_config["max_level"])
    data = load_data(store, max_level)
    constants = store.read_json("constants.json")
    assert isinstance(constants, dict)

    schedule = ExponentSchedule.from_config(stored_config["schedule"])
    frame = obstruction.BasisFrame(data, schedule, max_level)
    report = obstruction.ap_experiment(
        frame,
        cross_constant=float(constants["cross_constant"]),
        operator_count=operators,
        max_rank=max_rank,
        seed=config.seed,
        provenance={
            "seed": config.seed,
            "budget": config.budget,
            "sign_budget": config.sign_budget,
            "schedule": schedule.to_config(),
        },
    )
    store.write_json("ap/obstruction.json", report.to_payload())
    store.write_csv(
        "ap/identity_trace.csv",
        ["level", "trace_real", "trace_imag", "deviation"],
        [
            [r.level, r.value_matrix.real, r.value_matrix.imag, r.deviation]
            for r in report.identity_rows
        ],
    )
    store.write_csv(
        "ap/finite_rank.csv",
        ["operator", "rank", "support_level", "max_trace_beyond_support", "tail_bound"],
        [
            [r.operator_index, r.rank, r.support_level, r.max_beyond_support, r.tail_bound]
            for r in report.finite_rank_rows
        ],
    )
    store.write_csv(
        "ap/compact_family.csv",
        ["level", "max_scaled_norm", "envelope", "rate_reference"],
        [
            [r.level, r.max_scaled_norm, r.envelope, r.rate_reference]
            for r in report.compact_rows
        ],
    )
    store.update_manifest()
    print(
        f"ap: identity trace holds at 1 through level {max_level}; "
        f"{len(report.finite_rank_rows)} finite-rank operators tabulated"
    )
    return EXIT_OK


def cmd_moduli(config: RunConfig, m_samples: Sequence[int], depth: int) -> int:
    store = ArtifactStore(config.out)
    constants = TypeCotypeConstants(c1=config.c1, c2=config.c2)

    witness_rows = []
    for m in m_samples:
        point = witness_point(config.schedule, m, constants)
        witness_rows.append(
            {
                "m": m,
                "head_level": point.head_level,
                "codimension": str(point.codimension),
                "iso_constant": point.iso_constant,
                "gap_after_head": point.gap_after_head,
                "threshold": point.threshold,
            }
        )
    envelope = growth_envelope_check(config.schedule, m_samples)
    envelope_rows = [
        {
            "m": r.m,
            "skipped": r.skipped,
            "head_level": r.head_level,
            "codimension": None if r.codimension is None else str(r.codimension),
            "codimension_log2": r.codimension_log2,
            "envelope_log2": r.envelope_log2,
            "passed": r.passed,
        }
        for r in envelope.rows
    ]
    split = split_sequence(config.schedule, depth)
    split_payload = {
        "indices": list(split.indices),
        "margins": list(split.margins),
        "thresholds": [
            {
                "step": t.step,
                "five_exponent": None if t.five_exponent is None else str(t.five_exponent),
                "exact": None if t.exact is None else str(t.exact),
                "log2_value": None if not math.isfinite(t.log2_value) else t.log2_value,
                "log2_log2_value": t.log2_log2_value,
                "display": t.display,
            }
            for t in split.thresholds
        ],
        "first_ranges": [[a, b] for a, b in split.first_ranges],
        "second_ranges": [[a, b] for a, b in split.second_ranges],
    }

    store.write_json(
        "moduli/witness.json",
        {"schedule": config.schedule.to_config(), "rows": witness_rows},
    )
    store.write_csv(
        "moduli/witness.csv",
        ["m", "head_level", "codimension", "envelope_log2"],
        [
            [r["m"], r["head_level"], r["codimension"],
             next((e["envelope_log2"] for e in envelope_rows if e["m"] == r["m"] and e["envelope_log2"] is not None), "")]
            for r in witness_rows
        ],
    )
    store.write_json("moduli/envelope.json", {"rows": envelope_rows, "passed": envelope.passed})
    store.write_json("moduli/split.json", split_payload)
    store.write_csv(
        "moduli/split.csv",
        ["step", "index", "threshold"],
        [
            [t.step, split.indices[t.step - 1], t.display]
            for t in split.thresholds
        ],
    )
    store.update_manifest()
    for row in envelope_rows:
        mark = "skipped" if row["skipped"] else ("pass" if row["passed"] else "FAIL")
        print(f"moduli: envelope m={row['m']} {mark}")
    print(f"moduli: split indices {list(split.indices)}")
    return EXIT_OK


def cmd_split(config: RunConfig, depth: int) -> int:
    split = split_sequence(config.schedule, depth)
    print(f"split: indices {list(split.indices)}")
    for t in split.thresholds:
        print(f"split: threshold {t.step} = {t.display}")
    return EXIT_OK


def _parse_schedule(text: str, alpha: float) -> ExponentSchedule:
    if text == "power":
        return ExponentSchedule.power(alpha)
    if text == "log":
        return ExponentSchedule.log_rate()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadParameter(f"schedule must be 'power', 'log', or JSON, got {text!r}") from exc
    return ExponentSchedule.from_config(spec)


def _parse_m_samples(text: Optional[str]) -> Tuple[int, ...]:
    if not text:
        return DEFAULT_M_SAMPLES
    try:
        return tuple(int(part, 0) for part in text.split(","))
    except ValueError as exc:
        raise BadParameter(f"bad m-sample list {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aplab",
        description="Build, certify, and probe the mixed-norm construction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--schedule", default="power", help="power | log | JSON spec")
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--max-level", type=int, default=6)
        p.add_argument("--seed", type=int, default=7)
        p.add_argument("--budget", type=int, default=2048, help="split search budget")
        p.add_argument("--sign-budget", type=int, default=64)
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--c1", type=float, default=1.0)
        p.add_argument("--c2", type=float, default=1.0)
        p.add_argument("--out", default=os.environ.get(OUT_ENV_VAR, "aplab-out"))

    for name in ("build", "verify", "ap", "moduli", "split"):
        p = sub.add_parser(name)
        add_common(p)
        if name == "ap":
            p.add_argument("--operators", type=int, default=5)
            p.add_argument("--rank", type=int, default=5)
        if name == "moduli":
            p.add_argument("--m-samples", default=None)
            p.add_argument("--depth", type=int, default=3)
        if name == "split":
            p.add_argument("--depth", type=int, default=3)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        schedule=_parse_schedule(args.schedule, args.alpha),
        max_level=args.max_level,
        seed=args.seed,
        budget=args.budget,
        sign_budget=args.sign_budget,
        tol=args.tol,
        c1=args.c1,
        c2=args.c2,
        out=Path(args.out),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "build":
            return cmd_build(config)
        if args.command == "verify":
            return cmd_verify(config)
        if args.command == "ap":
            return cmd_ap(config, operators=args.operators, max_rank=args.rank)
        if args.command == "moduli":
            return cmd_moduli(config, _parse_m_samples(args.m_samples), args.depth)
        if args.command == "split":
            return cmd_split(config, args.depth)
        raise BadParameter(f"unknown command {args.command!r}")
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except BadParameter as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except AplabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
