import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from lib.csit_model import CsitProfile, classify, gaps, validate_profile
from lib.decomposition import Reduction, U0Schedule, decompose
from lib.errors import ParseError
from lib.region_geometry import (
    composition_residual,
    composition_stages,
    dof_region,
    weights,
)
from lib.scheme_synthesis import CheckResult, TransmissionPlan, rate_accounting, technique_breakdown

logger = logging.getLogger(__name__)

PROFILE_FIELDS = ("L", "a", "b")
SWEEP_COLUMNS = ("snr_db", "message_id", "context", "rate_bits")
COMPARE_COLUMNS = (
    "alpha",
    "beta",
    "d_sub",
    "d_opt",
    "gap",
    "strict_gap",
    "opt_zfbf_uses",
    "opt_s32_uses",
    "opt_fdma_uses",
    "sub_zfbf_uses",
    "sub_mat_uses",
    "sub_fdma_uses",
)


# --- PROFILE FILES ---


def _field_line(text, field):
    marker = f'"{field}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if marker in line:
            return number
    return 1


def parse_profile(text: str, path: Optional[str] = None) -> CsitProfile:
    """Parses the JSON profile format `{"L": int, "a": [...], "b": [...]}`."""
    if not text.strip():
        raise ParseError("profile file is empty", path=path, line=1)

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=path, line=e.lineno)

    if not isinstance(data, dict):
        raise ParseError("expected a JSON object with fields L, a, b", path=path, line=1)

    for field in PROFILE_FIELDS:
        if field not in data:
            raise ParseError("missing field", path=path, line=1, field=field)

    if not isinstance(data["L"], int) or isinstance(data["L"], bool):
        raise ParseError("L must be an integer", path=path, line=_field_line(text, "L"), field="L")
    for field in ("a", "b"):
        values = data[field]
        if not isinstance(values, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in values
        ):
            raise ParseError("expected a list of numbers", path=path, line=_field_line(text, field), field=field)

    return validate_profile(data["L"], data["a"], data["b"])


def load_profile(path) -> CsitProfile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("profile file not found", path=str(path))
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text ({e.reason})", path=str(path))
    profile = parse_profile(text, path=str(path))
    logger.debug(f"Loaded profile {path} (L={profile.L})")
    return profile


def _sig15(x: float) -> float:
    return float(f"{x:.15g}")


def _number(x: float) -> float:
    # 15 significant digits whenever that reproduces the stored float exactly.
    short = _sig15(x)
    return short if short == x else x


def format_profile(profile: CsitProfile) -> str:
    doc = {
        "L": profile.L,
        "a": [_number(x) for x in profile.a],
        "b": [_number(x) for x in profile.b],
    }
    return json.dumps(doc) + "\n"


def dump_profile(profile: CsitProfile, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_profile(profile))
    return path


# --- DOCUMENTS ---


def profile_document(profile: CsitProfile) -> Dict[str, Any]:
    return {"L": profile.L, "a": list(profile.a), "b": list(profile.b)}


def region_document(profile: CsitProfile) -> Dict[str, Any]:
    region = dof_region(profile)
    w = weights(profile)
    stages = composition_stages(w, profile.L)
    problem = classify(profile)
    return {
        "profile": profile_document(profile),
        "class": problem.kind,
        "balanced_partition": (
            [sorted(group) for group in problem.balanced_partition] if problem.balanced_partition else None
        ),
        "min_avg": _sig15(region.min_avg),
        "vertices": [[_sig15(x) for x in v] for v in region.vertices],
        "corner_points": [[_sig15(x) for x in v] for v in region.corner_points],
        "weights": {"r_bar": w.r_bar, "r_hat": w.r_hat, "r_tilde": w.r_tilde, "r_hat_prime": w.r_hat_prime},
        "composition_residual": composition_residual(profile),
        "stages": {
            "pp_corner": list(stages.pp_corner),
            "pn_np_corners": [list(p) for p in stages.pn_np_corners],
            "final_corners": [list(p) for p in stages.final_corners],
        },
    }


def schedule_document(schedule: U0Schedule) -> Dict[str, Any]:
    return {
        "messages": [
            {"id": m.id, "rate_prelog": m.rate_prelog, "donor": m.donor, "receiver": m.receiver}
            for m in schedule.messages
        ],
        "per_subband": {str(j): list(ids) for j, ids in schedule.per_subband.items()},
        "total_rate": schedule.total_rate,
    }


def reduction_document(reduction: Reduction) -> Dict[str, Any]:
    return {
        "policy": reduction.policy,
        "side": reduction.side,
        "original": profile_document(reduction.original),
        "reduced": profile_document(reduction.reduced),
        "deltas": {str(j): d for j, d in reduction.deltas.items()},
    }


def decompose_document(profile: CsitProfile, reduction: Reduction, schedule: U0Schedule) -> Dict[str, Any]:
    summary = gaps(reduction.reduced)
    return {
        "profile": profile_document(profile),
        "subchannels": [
            {"subband": u.subband, "pp": u.pp, "pn": u.pn, "np": u.np, "nn": u.nn} for u in decompose(profile)
        ],
        "reduction": reduction_document(reduction),
        "q_plus": {str(j): q for j, q in sorted(summary.q_plus.items())},
        "q_minus": {str(j): q for j, q in sorted(summary.q_minus.items())},
        "schedule": schedule_document(schedule),
    }


def checks_document(checks: Iterable[CheckResult]) -> List[Dict[str, Any]]:
    return [{"name": c.name, "passed": c.passed, "location": c.location, "detail": c.detail} for c in checks]


def plan_document(plan: TransmissionPlan, checks: Iterable[CheckResult]) -> Dict[str, Any]:
    dof = rate_accounting(plan)
    breakdown = technique_breakdown(plan)
    subbands = []
    for j in plan.profile.subbands:
        subbands.append(
            {
                "subband": j,
                "symbols": [
                    {
                        "key": s.key,
                        "kind": s.kind,
                        "power_hi": s.power_hi,
                        "power_lo": "floor" if s.power_lo is None else s.power_lo,
                        "share": s.share,
                        "rate_prelog": s.rate_prelog,
                        "precoder": s.precoder,
                    }
                    for s in plan.subband_symbols(j)
                ],
                "decode_order": {
                    f"user{user}": {
                        "known": list(plan.decode_order[(user, j)].known),
                        "steps": [
                            {"symbol": step.symbol, "interference": list(step.interference)}
                            for step in plan.decode_order[(user, j)].steps
                        ],
                    }
                    for user in (1, 2)
                },
            }
        )
    return {
        "original": profile_document(plan.original),
        "reduced": profile_document(plan.profile),
        "reduce_policy": plan.reduce_policy,
        "common_owner": plan.common_owner,
        "schedule": schedule_document(plan.schedule),
        "subbands": subbands,
        "rate_accounting": {"d1": dof.d1, "d2": dof.d2},
        "techniques": {
            "fdma": breakdown.fdma,
            "zfbf": breakdown.zfbf,
            "s32": breakdown.s32,
            "u0_total": breakdown.u0_total,
        },
        "checks": checks_document(checks),
    }


def write_json(path, doc: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, ensure_ascii=False)
        f.write("\n")
    return path


# --- CSV ---


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter=",", lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_sweep_csv(path, rows) -> Path:
    """One row per (SNR, message, decode context) with the ergodic rate in bits."""
    return _write_csv(
        path,
        SWEEP_COLUMNS,
        ([f"{r.snr_db:g}", r.message, r.context, f"{r.rate_bits:.12g}"] for r in rows),
    )


def write_compare_csv(path, rows: Iterable[Dict[str, Any]]) -> Path:
    def cell(value):
        if isinstance(value, bool):
            return "1" if value else "0"
        return f"{value:.12g}"

    return _write_csv(path, COMPARE_COLUMNS, ([cell(row[c]) for c in COMPARE_COLUMNS] for row in rows))
