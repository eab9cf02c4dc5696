import math
import logging
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple, FrozenSet, List

from lib.errors import LengthMismatch, OutOfRange, NotBalanced

logger = logging.getLogger(__name__)

# Equality band for per-subband qualities and per-user averages.
EQ_TOL = 1e-12
# Balance tolerance for subset sums in the separability search.
BALANCE_TOL = 1e-9
# Exhaustive subset search is only attempted up to this many subbands.
MAX_SEPARABLE_L = 20

P_L = "P_L"
Q_L_PLUS = "Q_L_plus"
Q_L_MINUS = "Q_L_minus"


@dataclass(frozen=True)
class CsitProfile:
    """CSIT quality grid of a two-user L-subband MISO BC.

    `a[j-1]` / `b[j-1]` are the quality exponents of user 1 / user 2 in subband j.
    Subband indices are 1-based everywhere in the public API.
    """

    L: int
    a: Tuple[float, ...]
    b: Tuple[float, ...]

    @property
    def a_e(self) -> float:
        return math.fsum(self.a) / self.L

    @property
    def b_e(self) -> float:
        return math.fsum(self.b) / self.L

    @property
    def subbands(self) -> range:
        return range(1, self.L + 1)

    def pair(self, j: int) -> Tuple[float, float]:
        return self.a[j - 1], self.b[j - 1]

    def swapped(self) -> "CsitProfile":
        return CsitProfile(L=self.L, a=self.b, b=self.a)


@dataclass(frozen=True)
class GapSummary:
    plus_set: FrozenSet[int]
    minus_set: FrozenSet[int]
    equal_set: FrozenSet[int]
    q_plus: Mapping[int, float]
    q_minus: Mapping[int, float]
    a_e: float
    b_e: float

    @property
    def l(self) -> int:
        # Subbands 1..l carry a_j >= b_j once sorted into the canonical order.
        return len(self.plus_set) + len(self.equal_set)

    @property
    def total_plus(self) -> float:
        return math.fsum(self.q_plus.values())

    @property
    def total_minus(self) -> float:
        return math.fsum(self.q_minus.values())


@dataclass(frozen=True)
class ProblemClass:
    kind: str
    balanced_partition: Optional[List[FrozenSet[int]]] = None
    # False when the subset search was skipped (L above MAX_SEPARABLE_L).
    separability_checked: bool = field(default=True)


def _clamp_quality(value, name, j):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise OutOfRange(f"{name}_{j} is not a number: {value!r}")

    if math.isnan(value) or value < -EQ_TOL or value > 1.0 + EQ_TOL:
        raise OutOfRange(f"{name}_{j}={value} is outside [0, 1]")

    # Decimal literals a hair outside the range are clamped.
    return min(max(value, 0.0), 1.0)


def validate_profile(L: int, a: Sequence[float], b: Sequence[float]) -> CsitProfile:
    """Builds a CsitProfile, rejecting wrong lengths and qualities outside [0, 1]."""
    if L is None or a is None or b is None:
        raise LengthMismatch("L, a and b are all required")

    if isinstance(L, bool) or int(L) != L or int(L) < 1:
        raise LengthMismatch(f"L must be a positive integer, got {L!r}")
    L = int(L)

    if len(a) != L or len(b) != L:
        raise LengthMismatch(f"expected {L} qualities per user, got len(a)={len(a)}, len(b)={len(b)}")

    a_clean = tuple(_clamp_quality(x, "a", j) for j, x in enumerate(a, start=1))
    b_clean = tuple(_clamp_quality(x, "b", j) for j, x in enumerate(b, start=1))
    return CsitProfile(L=L, a=a_clean, b=b_clean)


def gaps(profile: CsitProfile) -> GapSummary:
    plus_set, minus_set, equal_set = set(), set(), set()
    q_plus, q_minus = {}, {}

    for j in profile.subbands:
        a_j, b_j = profile.pair(j)
        diff = a_j - b_j
        if abs(diff) <= EQ_TOL:
            equal_set.add(j)
        elif diff > 0:
            plus_set.add(j)
            q_plus[j] = diff
        else:
            minus_set.add(j)
            q_minus[j] = -diff

    return GapSummary(
        plus_set=frozenset(plus_set),
        minus_set=frozenset(minus_set),
        equal_set=frozenset(equal_set),
        q_plus=q_plus,
        q_minus=q_minus,
        a_e=profile.a_e,
        b_e=profile.b_e,
    )


def is_balanced(profile: CsitProfile) -> bool:
    return abs(profile.a_e - profile.b_e) <= EQ_TOL


def classify(profile: CsitProfile) -> ProblemClass:
    """
    Places the instance in the P_L / Q_L taxonomy:
    1. a_e = b_e (within EQ_TOL) is a P_L problem, with its separability advisory.
    2. otherwise the user with the larger average quality names the Q_L side.
    """
    if is_balanced(profile):
        checked = profile.L <= MAX_SEPARABLE_L
        return ProblemClass(
            kind=P_L,
            balanced_partition=split_separable(profile),
            separability_checked=checked,
        )

    kind = Q_L_PLUS if profile.a_e > profile.b_e else Q_L_MINUS
    return ProblemClass(kind=kind)


def split_separable(profile: CsitProfile) -> List[FrozenSet[int]]:
    """
    Splits a P_L instance into minimal balanced subband groups.

    The group holding the lowest remaining index is always the smallest balanced
    subset containing it (lexicographically first among equals). The complement of a
    balanced group is balanced, so the smallest one can hold no balanced proper subset.
    """
    if not is_balanced(profile):
        raise NotBalanced(
            f"split_separable needs a_e = b_e, got a_e={profile.a_e:.12g}, b_e={profile.b_e:.12g}"
        )

    if profile.L > MAX_SEPARABLE_L:
        logger.warning(
            f"L={profile.L} exceeds {MAX_SEPARABLE_L}; separability search skipped, returning one group."
        )
        return [frozenset(profile.subbands)]

    diff = {j: profile.a[j - 1] - profile.b[j - 1] for j in profile.subbands}
    remaining = list(profile.subbands)
    groups = []

    while remaining:
        head, rest = remaining[0], remaining[1:]
        found = None
        for size in range(0, len(rest) + 1):
            for combo in itertools.combinations(rest, size):
                total = math.fsum([diff[head]] + [diff[j] for j in combo])
                if abs(total) <= BALANCE_TOL:
                    found = (head,) + combo
                    break
            if found:
                break

        # The full remainder is balanced, so the search always ends.
        if found is None:
            found = tuple(remaining)

        groups.append(frozenset(found))
        remaining = [j for j in remaining if j not in found]

    return groups
