import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from lib.csit_model import CsitProfile
from lib.errors import DofCsitError, GridTooSmall, ZeroVector
from lib.scheme_synthesis import (
    ANTENNA_ONE,
    COMMON_I,
    COMMON_II,
    ORTHO_TO_GHAT,
    ORTHO_TO_HHAT,
    PRIVATE_U,
    PRIVATE_V,
    DofPair,
    TransmissionPlan,
    rate_accounting,
)

logger = logging.getLogger(__name__)

# Trials are drawn in fixed blocks so the random streams never depend on worker count.
TRIAL_BLOCK = 250
DEFAULT_SNR_GRID_DB = (20.0, 30.0, 40.0, 50.0, 60.0)
DEFAULT_FIT_POINTS = 3
_TINY = 1e-300


@dataclass(frozen=True)
class ChannelDraw:
    """True channels h, g and their CSIT estimates; arrays are (..., L, 2) complex."""

    h: np.ndarray
    g: np.ndarray
    h_hat: np.ndarray
    g_hat: np.ndarray
    sigma1_sq: np.ndarray
    sigma2_sq: np.ndarray


@dataclass(frozen=True)
class SimConfig:
    snr_grid_db: Tuple[float, ...] = DEFAULT_SNR_GRID_DB
    trials: int = 2000
    seed: int = 2024
    fit_points: int = DEFAULT_FIT_POINTS
    workers: int = 1

    def __post_init__(self):
        grid = tuple(float(x) for x in self.snr_grid_db)
        object.__setattr__(self, "snr_grid_db", grid)
        if not grid:
            raise GridTooSmall("the SNR grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DofCsitError(f"SNR grid must be strictly ascending, got {grid}")
        if grid[0] <= 0.0:
            # log_P of the CSIT error variance needs P > 1
            raise DofCsitError(f"SNR grid points must be above 0 dB, got {grid[0]:g} dB")
        if self.trials < 1:
            raise DofCsitError(f"trials must be >= 1, got {self.trials}")
        if self.fit_points < 2:
            raise DofCsitError(f"fit_points must be >= 2, got {self.fit_points}")
        if not 0 <= self.seed < 2**64:
            raise DofCsitError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise DofCsitError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class PlanEvaluation:
    P: float
    # (message, context) -> ergodic rate in bits per channel use
    context_rates: Mapping[Tuple[str, str], float]
    # (user, subband, symbol key) -> mean log2 SINR of that SIC step
    step_log_sinr: Mapping[Tuple[int, int, str], float]
    deliverable: Mapping[str, float]
    margins: Mapping[str, float]


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    message: str
    context: str
    rate_bits: float


@dataclass(frozen=True)
class SweepResult:
    config: SimConfig
    rows: Tuple[SweepRow, ...]
    # user -> R_k(P)/L per grid point
    user_rates: Mapping[int, Tuple[float, ...]]
    fitted: DofPair
    target: DofPair
    decode_margin: Mapping[str, float]

    def passed(self, tol: float = 0.1) -> bool:
        return abs(self.fitted.d1 - self.target.d1) <= tol and abs(self.fitted.d2 - self.target.d2) <= tol


# ==========================================
# CHANNELS
# ==========================================


def ortho(v: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to `v` (last axis of length 2): [-conj(v2), conj(v1)]/|v|."""
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise ZeroVector("cannot build the orthogonal direction of a zero vector")
    w = np.stack([-np.conj(v[..., 1]), np.conj(v[..., 0])], axis=-1)
    return w / norm


def _complex_gaussian(rng, shape, variance):
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channels(rng: np.random.Generator, profile: CsitProfile, P: float, size: Optional[int] = None) -> ChannelDraw:
    """
    Draws true channels uniformly on the complex unit sphere and their estimates
    as truth minus an independent CN(0, P^-quality I) error.
    """
    if P <= 1.0:
        raise DofCsitError(f"P must exceed 1, got {P}")

    shape = (profile.L, 2) if size is None else (size, profile.L, 2)
    sigma1_sq = P ** (-np.asarray(profile.a, dtype=float))
    sigma2_sq = P ** (-np.asarray(profile.b, dtype=float))

    h = _complex_gaussian(rng, shape, 1.0)
    g = _complex_gaussian(rng, shape, 1.0)
    h /= np.linalg.norm(h, axis=-1, keepdims=True)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)

    h_err = _complex_gaussian(rng, shape, sigma1_sq[:, None])
    g_err = _complex_gaussian(rng, shape, sigma2_sq[:, None])

    return ChannelDraw(h=h, g=g, h_hat=h - h_err, g_hat=g - g_err, sigma1_sq=sigma1_sq, sigma2_sq=sigma2_sq)


def _gain(channel, precoder):
    return np.abs(np.sum(np.conj(channel) * precoder, axis=-1)) ** 2


def _block_rng(seed, snr_index, block):
    return np.random.default_rng(np.random.SeedSequence([seed, snr_index, block]))


# ==========================================
# PLAN EVALUATION
# ==========================================


def _context_name(user, subband):
    return f"user{user}@subband{subband}"


def _evaluate_block(plan, P, n, rng):
    draw = draw_channels(rng, plan.original, P, size=n)
    e1 = np.array([1.0, 0.0], dtype=complex)

    rx = {1: {}, 2: {}}
    for j in plan.profile.subbands:
        k = j - 1
        precoders = {
            ANTENNA_ONE: e1,
            ORTHO_TO_GHAT: ortho(draw.g_hat[:, k]),
            ORTHO_TO_HHAT: ortho(draw.h_hat[:, k]),
        }
        channels = {1: draw.h[:, k], 2: draw.g[:, k]}
        for s in plan.subband_symbols(j):
            power = s.allocated_power(P)
            for user in (1, 2):
                rx[user][s.key] = power * _gain(channels[user], precoders[s.precoder])

    rate_sums, log_sums = {}, {}
    for (user, j), context in plan.decode_order.items():
        for step in context.steps:
            interference = 1.0 + sum((rx[user][key] for key in step.interference), np.zeros(n))
            sinr = rx[user][step.symbol] / interference
            rate_sums[(user, j, step.symbol)] = float(np.sum(np.log2(1.0 + sinr)))
            log_sums[(user, j, step.symbol)] = float(np.sum(np.log2(np.maximum(sinr, _TINY))))
    return rate_sums, log_sums


def evaluate_plan(
    plan: TransmissionPlan, P: float, trials: int, seed: int, snr_index: int = 0, workers: int = 1
) -> PlanEvaluation:
    """
    Ergodic per-message rates of a plan at SNR P.

    1. trials are split in TRIAL_BLOCK blocks, each with its own seeded stream;
    2. every SIC step of every (user, subband) context gets log2(1 + SINR);
    3. block sums are merged in block order with compensated summation.
    """
    if trials < 1:
        raise DofCsitError(f"trials must be >= 1, got {trials}")

    sizes = [min(TRIAL_BLOCK, trials - start) for start in range(0, trials, TRIAL_BLOCK)]

    def run(block):
        return _evaluate_block(plan, P, sizes[block], _block_rng(seed, snr_index, block))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, range(len(sizes))))
    else:
        blocks = [run(block) for block in range(len(sizes))]

    steps = blocks[0][0].keys()
    mean_rate = {key: math.fsum(b[0][key] for b in blocks) / trials for key in steps}
    mean_log = {key: math.fsum(b[1][key] for b in blocks) / trials for key in steps}

    context_rates = {}
    per_message: Dict[str, List[float]] = {}
    for (user, j, key), rate in sorted(mean_rate.items()):
        message = plan.symbol(key).message
        context_rates[(message, _context_name(user, j))] = rate
        per_message.setdefault(message, []).append(rate)

    log2_p = math.log2(P)
    deliverable, margins = {}, {}
    for message, rates in per_message.items():
        deliverable[message] = min(rates)
        target = _message_prelog(plan, message) * log2_p
        margins[message] = min(rates) - target

    return PlanEvaluation(
        P=P,
        context_rates=context_rates,
        step_log_sinr=mean_log,
        deliverable=deliverable,
        margins=margins,
    )


def _message_prelog(plan, message):
    for s in plan.symbols:
        if s.message == message:
            return s.rate_prelog
    raise KeyError(message)


def _user_rate(plan, evaluation, user):
    share = 1.0 if plan.common_owner == user else 0.0
    own_kind = PRIVATE_U if user == 1 else PRIVATE_V
    total = []
    seen = set()
    for s in plan.symbols:
        if s.message in seen:
            continue
        seen.add(s.message)
        rate = evaluation.deliverable[s.message]
        if s.kind == own_kind:
            total.append(rate)
        elif s.kind in (COMMON_I, COMMON_II):
            total.append(share * rate)
    return math.fsum(total) / plan.profile.L


def sweep(plan: TransmissionPlan, cfg: SimConfig) -> SweepResult:
    grid = cfg.snr_grid_db
    if len(grid) < cfg.fit_points:
        raise GridTooSmall(f"{len(grid)} SNR points cannot support a {cfg.fit_points}-point slope fit")

    rows = []
    user_rates = {1: [], 2: []}
    evaluation = None
    for index, snr_db in enumerate(grid):
        P = 10.0 ** (snr_db / 10.0)
        evaluation = evaluate_plan(plan, P, cfg.trials, cfg.seed, snr_index=index, workers=cfg.workers)
        for (message, context), rate in sorted(evaluation.context_rates.items()):
            rows.append(SweepRow(snr_db=snr_db, message=message, context=context, rate_bits=rate))
        for user in (1, 2):
            user_rates[user].append(_user_rate(plan, evaluation, user))
        logger.info(
            f"SNR {snr_db:g} dB: R1/L={user_rates[1][-1]:.4f}, R2/L={user_rates[2][-1]:.4f} bits/use"
        )

    top = slice(len(grid) - cfg.fit_points, len(grid))
    log2_p = np.log2(10.0 ** (np.asarray(grid) / 10.0))[top]
    slopes = [float(np.polyfit(log2_p, np.asarray(user_rates[user])[top], 1)[0]) for user in (1, 2)]

    return SweepResult(
        config=cfg,
        rows=tuple(rows),
        user_rates={user: tuple(rates) for user, rates in user_rates.items()},
        fitted=DofPair(d1=slopes[0], d2=slopes[1]),
        target=rate_accounting(plan),
        decode_margin=dict(evaluation.margins),
    )


def leakage_exponents(profile: CsitProfile, P: float, trials: int, seed: int) -> Dict[int, float]:
    """Mean log2|h^H ortho(h_hat)|^2 / log2 P per subband; tends to -a_j."""
    rng = _block_rng(seed, 0, 0)
    draw = draw_channels(rng, profile, P, size=trials)
    log2_p = math.log2(P)
    result = {}
    for j in profile.subbands:
        gain = _gain(draw.h[:, j - 1], ortho(draw.h_hat[:, j - 1]))
        result[j] = float(np.mean(np.log2(np.maximum(gain, _TINY)))) / log2_p
    return result
