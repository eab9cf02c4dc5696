import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

from lib.csit_model import CsitProfile, gaps
from lib.errors import NegativeWeight, OrderViolation, OutOfRange

logger = logging.getLogger(__name__)

VERTEX_TOL = 1e-12
WEIGHT_TOL = 1e-12

Point = Tuple[float, float]


@dataclass(frozen=True)
class DofRegion:
    """
    Polygon d1 <= s, d2 <= s, d1 + d2 <= s + min_avg in the nonnegative quadrant.
    `single_bound` (s) is 1 for every region built from a profile.
    """

    min_avg: float
    single_bound: float = 1.0

    @property
    def sum_bound(self) -> float:
        return self.single_bound + self.min_avg

    @property
    def halfplanes(self) -> List[Tuple[float, float, float]]:
        # (c1, c2, rhs) meaning c1*d1 + c2*d2 <= rhs
        return [
            (1.0, 0.0, self.single_bound),
            (0.0, 1.0, self.single_bound),
            (1.0, 1.0, self.sum_bound),
        ]

    @property
    def vertices(self) -> List[Point]:
        s, m = self.single_bound, self.min_avg
        raw = [(0.0, 0.0), (s, 0.0), (s, m), (m, s), (0.0, s)]
        return _dedup(raw)

    @property
    def corner_points(self) -> List[Point]:
        """The two points on the sum face: (s, min_avg) and its mirror."""
        s, m = self.single_bound, self.min_avg
        return _dedup([(s, m), (m, s)])


@dataclass(frozen=True)
class Weights:
    r_bar: float
    r_hat: float
    r_tilde: float
    r_hat_prime: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.r_bar, self.r_hat, self.r_tilde, self.r_hat_prime)


@dataclass(frozen=True)
class CompositionStages:
    pp_corner: Point
    pn_np_corners: Tuple[Point, Point]
    final_corners: Tuple[Point, Point]


@dataclass(frozen=True)
class SchemeUse:
    technique: str
    channel_uses: float
    sum_rate: float


def _dedup(points):
    out = []
    for p in points:
        if out and abs(out[-1][0] - p[0]) <= VERTEX_TOL and abs(out[-1][1] - p[1]) <= VERTEX_TOL:
            continue
        out.append(p)
    # Closing edge back to the origin.
    if len(out) > 1 and abs(out[-1][0] - out[0][0]) <= VERTEX_TOL and abs(out[-1][1] - out[0][1]) <= VERTEX_TOL:
        out.pop()
    return out


def dof_region(profile: CsitProfile) -> DofRegion:
    min_avg = min(math.fsum(profile.a), math.fsum(profile.b)) / profile.L
    return DofRegion(min_avg=min_avg)


def contains(region: DofRegion, point: Point, tol: float = 1e-9) -> bool:
    d1, d2 = point
    if d1 < -tol or d2 < -tol:
        return False
    return all(c1 * d1 + c2 * d2 <= rhs + tol for c1, c2, rhs in region.halfplanes)


def weights(profile: CsitProfile) -> Weights:
    summary = gaps(profile)
    total_plus, total_minus = summary.total_plus, summary.total_minus

    r_bar = math.fsum(min(a_j, b_j) for a_j, b_j in zip(profile.a, profile.b))
    r_hat = 2.0 * min(total_plus, total_minus)
    r_hat_prime = abs(total_plus - total_minus)
    # Leftover one-sided PN (or NP) use is merged with the NN subchannels.
    r_tilde = profile.L - math.fsum(max(a_j, b_j) for a_j, b_j in zip(profile.a, profile.b)) + r_hat_prime

    return Weights(r_bar=r_bar, r_hat=r_hat, r_tilde=r_tilde, r_hat_prime=r_hat_prime)


def compose_weighted(w: Weights, L: int) -> DofRegion:
    """
    Weighted sum (1/L)(r_bar*PP square + r_hat*PN/NP 3/2-region + r_tilde*NN simplex).

    Each basis region contributes its single-user bound and its sum bound scaled by
    its weight: square (1, 2), PN/NP (1, 3/2), simplex (1, 1).
    """
    for name, value in (("r_bar", w.r_bar), ("r_hat", w.r_hat), ("r_tilde", w.r_tilde)):
        if value < -WEIGHT_TOL:
            raise NegativeWeight(f"{name}={value} is negative")

    single = (w.r_bar + w.r_hat + w.r_tilde) / L
    corner = (w.r_bar + w.r_hat / 2.0) / L
    return DofRegion(min_avg=corner, single_bound=single)


def composition_residual(profile: CsitProfile) -> float:
    """Largest vertex/bound mismatch between the weighted sum and the direct region."""
    direct = dof_region(profile)
    composed = compose_weighted(weights(profile), profile.L)
    diffs = [abs(direct.single_bound - composed.single_bound), abs(direct.sum_bound - composed.sum_bound)]
    if len(direct.vertices) != len(composed.vertices):
        return max(diffs + [1.0])
    for p, q in zip(direct.vertices, composed.vertices):
        diffs.extend([abs(p[0] - q[0]), abs(p[1] - q[1])])
    return max(diffs)


def composition_stages(w: Weights, L: int) -> CompositionStages:
    square = w.r_bar / L
    low = (w.r_bar + w.r_hat / 2.0) / L
    mid = (w.r_bar + w.r_hat) / L
    high = (w.r_bar + w.r_hat + w.r_tilde) / L
    return CompositionStages(
        pp_corner=(square, square),
        pn_np_corners=((low, mid), (mid, low)),
        final_corners=((low, high), (high, low)),
    )


def dominant_face_point(region: DofRegion, share: float) -> Point:
    """Time-sharing between the two corners; `share` of the commons go to user 1."""
    if not 0.0 <= share <= 1.0:
        raise OutOfRange(f"share must lie in [0, 1], got {share}")
    s, m = region.single_bound, region.min_avg
    return (share * s + (1.0 - share) * m, share * m + (1.0 - share) * s)


# ==========================================
# SUB-OPTIMAL VS OPTIMAL (unmatched P_2)
# ==========================================


def _check_order(alpha, beta):
    for name, value in (("alpha", alpha), ("beta", beta)):
        if value < -VERTEX_TOL or value > 1.0 + VERTEX_TOL:
            raise OutOfRange(f"{name}={value} is outside [0, 1]")
    if beta < alpha:
        raise OrderViolation(f"expected alpha <= beta, got alpha={alpha}, beta={beta}")


def sum_dof_optimal(alpha: float, beta: float) -> float:
    _check_order(alpha, beta)
    return (2.0 + alpha + beta) / 2.0


def sum_dof_suboptimal(alpha: float, beta: float) -> float:
    _check_order(alpha, beta)
    fdma = max(2.0 - 3.0 * beta + alpha, 0.0)
    numerator = 2.0 * beta + 2.0 * alpha + 2.0 * (beta - alpha) + fdma
    denominator = 3.0 * beta - alpha + fdma
    return numerator / denominator


def scheme_channel_uses(alpha: float, beta: float) -> Dict[str, List[SchemeUse]]:
    """
    Channel uses and sum pre-log spent by each ingredient of the two P_2 schemes.
    The optimal scheme pairs ZFBF, the S_3^{3/2} scheme and FDMA; the sub-optimal one
    replaces S_3^{3/2} by MAT, which needs an extra beta - alpha channel use.
    """
    _check_order(alpha, beta)
    gap = beta - alpha
    fdma_sub = max(2.0 - 3.0 * beta + alpha, 0.0)
    return {
        "optimal": [
            SchemeUse("ZFBF", 2.0 * alpha, 4.0 * alpha),
            SchemeUse("S3/2", 2.0 * gap, 3.0 * gap),
            SchemeUse("FDMA", 2.0 - 2.0 * beta, 2.0 - 2.0 * beta),
        ],
        "suboptimal": [
            SchemeUse("ZFBF", 2.0 * alpha, 4.0 * alpha),
            SchemeUse("MAT", 3.0 * gap, 4.0 * gap),
            SchemeUse("FDMA", fdma_sub, fdma_sub),
        ],
    }


def sum_dof_from_uses(uses: List[SchemeUse]) -> float:
    total_uses = math.fsum(u.channel_uses for u in uses)
    return math.fsum(u.sum_rate for u in uses) / total_uses
