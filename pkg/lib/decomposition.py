import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

from lib.csit_model import CsitProfile, EQ_TOL, gaps, is_balanced
from lib.errors import InternalImbalance, Unbalanced, DofCsitError

logger = logging.getLogger(__name__)

# Residuals at or below this are treated as exhausted by the pairing loop.
RESIDUAL_TOL = 1e-12
REDUCE_TOL = 1e-9

LARGEST_GAP = "largest-gap"
LOWEST_INDEX = "lowest-index"
REDUCE_POLICIES = (LARGEST_GAP, LOWEST_INDEX)


@dataclass(frozen=True)
class SubchannelUse:
    subband: int
    pp: float
    pn: float
    np: float
    nn: float


@dataclass(frozen=True)
class U0Message:
    id: int
    rate_prelog: float
    donor: int
    receiver: int


@dataclass(frozen=True)
class U0Schedule:
    messages: Tuple[U0Message, ...]
    # subband -> message ids in decode order (highest power layer first)
    per_subband: Mapping[int, Tuple[int, ...]]

    def message(self, message_id: int) -> U0Message:
        return self.messages[message_id - 1]

    def layers(self, j: int) -> Tuple[int, ...]:
        return self.per_subband.get(j, ())

    def tau(self, j: int) -> List[float]:
        return [self.message(i).rate_prelog for i in self.layers(j)]

    @property
    def total_rate(self) -> float:
        return math.fsum(m.rate_prelog for m in self.messages)


@dataclass(frozen=True)
class Reduction:
    original: CsitProfile
    reduced: CsitProfile
    deltas: Mapping[int, float]
    # "a" when user 1's qualities were lowered, "b" for user 2, None for identity.
    side: Optional[str] = None
    policy: str = LARGEST_GAP


def decompose(profile: CsitProfile) -> List[SubchannelUse]:
    uses = []
    for j in profile.subbands:
        a_j, b_j = profile.pair(j)
        uses.append(
            SubchannelUse(
                subband=j,
                pp=min(a_j, b_j),
                pn=max(a_j - b_j, 0.0),
                np=max(b_j - a_j, 0.0),
                nn=1.0 - max(a_j, b_j),
            )
        )
    return uses


def pair_u0(profile: CsitProfile) -> U0Schedule:
    """
    Generates the common messages II of a balanced profile.

    Each step pairs the lowest-index subband with residual q+ against the
    lowest-index subband with residual q-, emits a message of the smaller residual
    and charges it to both. Messages are stacked in generation order, so an earlier
    message sits on a higher power layer in both of its subbands.
    """
    if not is_balanced(profile):
        raise Unbalanced(
            f"pair_u0 needs a_e = b_e (reduce first), got a_e={profile.a_e:.12g}, b_e={profile.b_e:.12g}"
        )

    summary = gaps(profile)
    residual_plus = dict(summary.q_plus)
    residual_minus = dict(summary.q_minus)

    messages = []
    per_subband: Dict[int, List[int]] = {}

    def first_open(residual):
        for j in sorted(residual):
            if residual[j] > RESIDUAL_TOL:
                return j
        return None

    while True:
        j1, j2 = first_open(residual_plus), first_open(residual_minus)
        if j1 is None or j2 is None:
            break

        rate = min(residual_plus[j1], residual_minus[j2])
        message = U0Message(id=len(messages) + 1, rate_prelog=rate, donor=j1, receiver=j2)
        messages.append(message)
        per_subband.setdefault(j1, []).append(message.id)
        per_subband.setdefault(j2, []).append(message.id)

        residual_plus[j1] -= rate
        residual_minus[j2] -= rate
        if residual_plus[j1] <= RESIDUAL_TOL:
            residual_plus[j1] = 0.0
        if residual_minus[j2] <= RESIDUAL_TOL:
            residual_minus[j2] = 0.0

    logger.debug(f"Generated {len(messages)} u0 messages over {len(per_subband)} subbands")
    return U0Schedule(
        messages=tuple(messages),
        per_subband={j: tuple(ids) for j, ids in sorted(per_subband.items())},
    )


def _reduce_surplus(a, b, surplus, policy):
    """Lowers entries of `a` by `surplus` in total; returns (new_a, leftover)."""
    a_new = list(a)
    remaining = surplus
    L = len(a)
    plus = [j for j in range(L) if a[j] - b[j] > EQ_TOL]
    others = [j for j in range(L) if a[j] - b[j] <= EQ_TOL]

    if policy == LARGEST_GAP:
        visits = [(j, b[j]) for j in sorted(plus, key=lambda j: (-(a[j] - b[j]), j))]
    elif policy == LOWEST_INDEX:
        # Donor-side gaps stay intact; the weaker subbands give first.
        visits = [(j, 0.0) for j in others] + [(j, b[j]) for j in plus]
    else:
        raise DofCsitError(f"unknown reduce policy '{policy}', expected one of {REDUCE_POLICIES}")

    for j, floor in visits:
        if remaining <= 0.0:
            break
        cut = min(remaining, a_new[j] - floor)
        if cut <= 0.0:
            continue
        a_new[j] -= cut
        remaining -= cut
        if abs(a_new[j] - floor) <= EQ_TOL:
            a_new[j] = floor

    return a_new, remaining


def reduce_to_balanced(profile: CsitProfile, policy: str = LARGEST_GAP) -> Reduction:
    """
    Turns a Q_L instance into the P_L instance its scheme is built on.
    The user with the larger total quality gives up the surplus; the other is untouched.
    """
    if policy not in REDUCE_POLICIES:
        raise DofCsitError(f"unknown reduce policy '{policy}', expected one of {REDUCE_POLICIES}")

    if is_balanced(profile):
        return Reduction(
            original=profile,
            reduced=profile,
            deltas={j: 0.0 for j in profile.subbands},
            side=None,
            policy=policy,
        )

    side = "a" if profile.a_e > profile.b_e else "b"
    strong, weak = (profile.a, profile.b) if side == "a" else (profile.b, profile.a)
    surplus = math.fsum(strong) - math.fsum(weak)

    lowered, leftover = _reduce_surplus(strong, weak, surplus, policy)
    if leftover > REDUCE_TOL:
        raise InternalImbalance(f"surplus {leftover:.3g} left after the {policy} pass")

    deltas = {j: strong[j - 1] - lowered[j - 1] for j in profile.subbands}
    if side == "a":
        reduced = CsitProfile(L=profile.L, a=tuple(lowered), b=profile.b)
    else:
        reduced = CsitProfile(L=profile.L, a=profile.a, b=tuple(lowered))

    logger.info(f"Reduced Q_L instance on user {'1' if side == 'a' else '2'} by {surplus:.6g} ({policy})")
    return Reduction(original=profile, reduced=reduced, deltas=deltas, side=side, policy=policy)
