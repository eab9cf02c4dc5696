import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

from lib.csit_model import CsitProfile, EQ_TOL, gaps
from lib.decomposition import LARGEST_GAP, U0Schedule, pair_u0, reduce_to_balanced
from lib.errors import DofCsitError

logger = logging.getLogger(__name__)

# --- SYMBOL KINDS ---
COMMON_I = "CommonI"
PRIVATE_U = "PrivateU"
PRIVATE_V = "PrivateV"
COMMON_II = "CommonII"

# --- PRECODERS ---
ANTENNA_ONE = "AntennaOne"
ORTHO_TO_GHAT = "OrthoToGhat"
ORTHO_TO_HHAT = "OrthoToHhat"

USERS = (1, 2)
CHECK_TOL = 1e-9
TELESCOPE_SNRS = (1e2, 1e4, 1e6)


@dataclass(frozen=True)
class SymbolSpec:
    """One row of a subband's power/rate table; `power_lo=None` is the FLOOR."""

    kind: str
    subband: int
    power_hi: float
    power_lo: Optional[float]
    share: int
    rate_prelog: float
    precoder: str
    message_id: Optional[int] = None

    @property
    def key(self) -> str:
        if self.kind == COMMON_II:
            return f"u0({self.message_id})@{self.subband}"
        prefix = {COMMON_I: "c", PRIVATE_U: "u", PRIVATE_V: "v"}[self.kind]
        return f"{prefix}{self.subband}"

    @property
    def message(self) -> str:
        """Message name shared by every transmission of the same data."""
        if self.kind == COMMON_II:
            return f"u0({self.message_id})"
        return self.key

    @property
    def floor(self) -> float:
        return 0.0 if self.power_lo is None else self.power_lo

    def allocated_power(self, P: float) -> float:
        low = 0.0 if self.power_lo is None else P**self.power_lo
        return (P**self.power_hi - low) / self.share


@dataclass(frozen=True)
class DecodeStep:
    symbol: str
    interference: Tuple[str, ...]


@dataclass(frozen=True)
class DecodeContext:
    user: int
    subband: int
    # u0 layers decoded by this user in another subband and subtracted here
    known: Tuple[str, ...]
    steps: Tuple[DecodeStep, ...]


@dataclass(frozen=True)
class TransmissionPlan:
    profile: CsitProfile
    original: CsitProfile
    schedule: U0Schedule
    symbols: Tuple[SymbolSpec, ...]
    decode_order: Mapping[Tuple[int, int], DecodeContext]
    common_owner: int
    reduce_policy: str = LARGEST_GAP

    def symbol(self, key: str) -> SymbolSpec:
        for s in self.symbols:
            if s.key == key:
                return s
        raise KeyError(key)

    def subband_symbols(self, j: int) -> List[SymbolSpec]:
        return [s for s in self.symbols if s.subband == j]


@dataclass(frozen=True)
class DofPair:
    d1: float
    d2: float

    def as_tuple(self) -> Tuple[float, float]:
        return (self.d1, self.d2)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    location: str
    detail: str = ""


@dataclass(frozen=True)
class TechniqueBreakdown:
    fdma: float
    zfbf: float
    s32: float
    u0_total: float


# ==========================================
# SYNTHESIS
# ==========================================


def _stronger_user(a_j, b_j):
    if a_j - b_j > EQ_TOL:
        return 1
    if b_j - a_j > EQ_TOL:
        return 2
    return None


def _subband_symbols(j, a_j, b_j, schedule):
    top, bottom = max(a_j, b_j), min(a_j, b_j)
    symbols = []

    # Common message I takes whatever power the ZF and u0 stack leave.
    if top < 1.0 - EQ_TOL:
        symbols.append(SymbolSpec(COMMON_I, j, 1.0, top, 1, 1.0 - top, ANTENNA_ONE))

    layers = schedule.layers(j)
    level = top
    for n, message_id in enumerate(layers, start=1):
        width = schedule.message(message_id).rate_prelog
        low = bottom if n == len(layers) else level - width
        symbols.append(SymbolSpec(COMMON_II, j, level, low, 2, width, ANTENNA_ONE, message_id))
        level = low

    if b_j > 0.0:
        symbols.append(SymbolSpec(PRIVATE_U, j, b_j, None, 2, b_j, ORTHO_TO_GHAT))
    if a_j > 0.0:
        symbols.append(SymbolSpec(PRIVATE_V, j, a_j, None, 2, a_j, ORTHO_TO_HHAT))
    return symbols


def _decode_contexts(j, a_j, b_j, symbols):
    """
    SIC order in subband j for both users:
    1. c_j first, everything else is interference.
    2. the more capable user peels the u0 stack top-down, then its own private.
    3. the other user subtracts the u0 layers it decoded elsewhere, then its private.
    """
    by_kind = {}
    for s in symbols:
        by_kind.setdefault(s.kind, []).append(s.key)
    commons = by_kind.get(COMMON_I, [])
    layers = by_kind.get(COMMON_II, [])
    own = {1: by_kind.get(PRIVATE_U, []), 2: by_kind.get(PRIVATE_V, [])}
    capable = _stronger_user(a_j, b_j)

    contexts = {}
    for user in USERS:
        other = 2 if user == 1 else 1
        steps = []
        remaining = [s.key for s in symbols]

        known = () if user == capable else tuple(layers)

        def decode(key, subtract=True):
            remaining.remove(key)
            steps.append(DecodeStep(key, tuple(k for k in remaining if not (subtract and k in known))))

        for key in commons:
            decode(key, subtract=False)
        if user == capable:
            for key in layers:
                decode(key)
        for key in own[user]:
            decode(key)

        contexts[(user, j)] = DecodeContext(user=user, subband=j, known=known, steps=tuple(steps))
    return contexts


def synthesize(
    profile: CsitProfile, common_owner: int = 1, reduce_policy: str = LARGEST_GAP
) -> TransmissionPlan:
    if common_owner not in USERS:
        raise DofCsitError(f"common_owner must be 1 or 2, got {common_owner!r}")

    reduction = reduce_to_balanced(profile, policy=reduce_policy)
    balanced = reduction.reduced
    schedule = pair_u0(balanced)

    symbols = []
    decode_order = {}
    for j in balanced.subbands:
        a_j, b_j = balanced.pair(j)
        subband = _subband_symbols(j, a_j, b_j, schedule)
        symbols.extend(subband)
        decode_order.update(_decode_contexts(j, a_j, b_j, subband))

    logger.info(
        f"Synthesized plan: L={balanced.L}, {len(symbols)} symbols, "
        f"{len(schedule.messages)} u0 messages, owner=user {common_owner}"
    )
    return TransmissionPlan(
        profile=balanced,
        original=profile,
        schedule=schedule,
        symbols=tuple(symbols),
        decode_order=decode_order,
        common_owner=common_owner,
        reduce_policy=reduce_policy,
    )


# ==========================================
# ACCOUNTING
# ==========================================


def _rate_sum(plan, kind):
    return math.fsum(s.rate_prelog for s in plan.symbols if s.kind == kind)


def rate_accounting(plan: TransmissionPlan, common_share: Optional[float] = None) -> DofPair:
    """
    Per-user DoF of a plan. u0 messages count once even though each is sent twice.
    `common_share` is the fraction of the common pre-log credited to user 1; by
    default all commons go to `plan.common_owner`.
    """
    if common_share is None:
        common_share = 1.0 if plan.common_owner == 1 else 0.0
    if not 0.0 <= common_share <= 1.0:
        raise DofCsitError(f"common_share must lie in [0, 1], got {common_share}")

    L = plan.profile.L
    common = _rate_sum(plan, COMMON_I) + plan.schedule.total_rate
    d1 = (_rate_sum(plan, PRIVATE_U) + common_share * common) / L
    d2 = (_rate_sum(plan, PRIVATE_V) + (1.0 - common_share) * common) / L
    return DofPair(d1=d1, d2=d2)


def technique_breakdown(plan: TransmissionPlan) -> TechniqueBreakdown:
    zfbf, s32 = [], []
    for j in plan.profile.subbands:
        rates = {s.kind: s.rate_prelog for s in plan.subband_symbols(j) if s.kind in (PRIVATE_U, PRIVATE_V)}
        u, v = rates.get(PRIVATE_U, 0.0), rates.get(PRIVATE_V, 0.0)
        zfbf.append(2.0 * min(u, v))
        s32.append(abs(u - v))

    u0_total = plan.schedule.total_rate
    return TechniqueBreakdown(
        fdma=_rate_sum(plan, COMMON_I),
        zfbf=math.fsum(zfbf),
        s32=math.fsum(s32) + u0_total,
        u0_total=u0_total,
    )


# ==========================================
# VALIDATION
# ==========================================


def received_exponent(symbol: SymbolSpec, user: int, original: CsitProfile) -> float:
    """Power exponent at which `symbol` reaches `user`; ZF leakage sits P^-quality lower."""
    a_j, b_j = original.pair(symbol.subband)
    if symbol.precoder == ORTHO_TO_GHAT and user == 2:
        return symbol.power_hi - b_j
    if symbol.precoder == ORTHO_TO_HHAT and user == 1:
        return symbol.power_hi - a_j
    return symbol.power_hi


def _check_telescoping(plan, j):
    symbols = plan.subband_symbols(j)
    kinds = {s.kind for s in symbols}
    worst = 0.0
    for P in TELESCOPE_SNRS:
        total = math.fsum(s.allocated_power(P) for s in symbols)
        # A zero-rate private would have held P^0/2.
        total += 0.5 * ((PRIVATE_U not in kinds) + (PRIVATE_V not in kinds))
        worst = max(worst, abs(total - P) / P)
    return CheckResult(
        "power-telescoping", worst <= CHECK_TOL, f"subband {j}", f"max relative error {worst:.3g}"
    )


def _check_tau_sum(plan, j):
    a_j, b_j = plan.profile.pair(j)
    carried = math.fsum(s.rate_prelog for s in plan.subband_symbols(j) if s.kind == COMMON_II)
    gap = abs(a_j - b_j)
    return CheckResult(
        "tau-sum", abs(carried - gap) <= CHECK_TOL, f"subband {j}", f"sum tau={carried:.12g}, |a-b|={gap:.12g}"
    )


def _check_double_transmission(plan):
    results = []
    summary = gaps(plan.profile)
    carriers: Dict[int, List[int]] = {}
    for s in plan.symbols:
        if s.kind == COMMON_II:
            carriers.setdefault(s.message_id, []).append(s.subband)

    ids = set(carriers) | {m.id for m in plan.schedule.messages}
    for message_id in sorted(ids):
        where = sorted(carriers.get(message_id, []))
        sides_ok = (
            len(where) == 2
            and sum(j in summary.plus_set for j in where) == 1
            and sum(j in summary.minus_set for j in where) == 1
        )
        results.append(
            CheckResult("u0-double-transmission", sides_ok, f"u0({message_id})", f"carried in subbands {where}")
        )
    return results


def _check_decode_order(plan):
    results = []
    lookup = {s.key: s for s in plan.symbols}
    decoded_messages = {user: set() for user in USERS}
    for (user, _), context in plan.decode_order.items():
        decoded_messages[user].update(lookup[s.symbol].message for s in context.steps if s.symbol in lookup)

    for (user, j), context in sorted(plan.decode_order.items()):
        problems = []
        for step in context.steps:
            target = lookup.get(step.symbol)
            if target is None:
                problems.append(f"{step.symbol} is not transmitted")
                continue
            for key in step.interference:
                if key not in lookup:
                    problems.append(f"{key} is not transmitted")
                    continue
                level = received_exponent(lookup[key], user, plan.original)
                if level > target.floor + CHECK_TOL:
                    problems.append(f"{key} at P^{level:.6g} above {step.symbol} floor P^{target.floor:.6g}")
        for key in context.known:
            if key not in lookup or lookup[key].message not in decoded_messages[user]:
                problems.append(f"{key} assumed known but never decoded by user {user}")
        results.append(
            CheckResult("decode-order", not problems, f"user {user} subband {j}", "; ".join(problems))
        )
    return results


def _check_zf_leakage(plan):
    results = []
    for s in plan.symbols:
        if s.kind not in (PRIVATE_U, PRIVATE_V):
            continue
        a_j, b_j = plan.original.pair(s.subband)
        limit = a_j if s.kind == PRIVATE_V else b_j
        if s.power_hi > limit + CHECK_TOL:
            results.append(
                CheckResult("zf-leakage", False, s.key, f"power P^{s.power_hi:.6g} exceeds CSIT quality {limit:.6g}")
            )
    if not results:
        results.append(CheckResult("zf-leakage", True, "all privates"))
    return results


def validate_plan(plan: TransmissionPlan) -> List[CheckResult]:
    results = []
    for j in plan.profile.subbands:
        results.append(_check_telescoping(plan, j))
        results.append(_check_tau_sum(plan, j))
    results.extend(_check_double_transmission(plan))
    results.extend(_check_decode_order(plan))
    results.extend(_check_zf_leakage(plan))

    failed = [r for r in results if not r.passed]
    for r in failed:
        logger.warning(f"⚠️ Plan check '{r.name}' failed at {r.location}: {r.detail}")
    return results
