import sys
import logging
import argparse
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

# --- LOCAL IMPORTS ---
from lib.decomposition import REDUCE_POLICIES, pair_u0, reduce_to_balanced
from lib.errors import ConfigError, DofCsitError, OrderViolation
from lib.link_simulator import sweep
from lib.profile_store import (
    checks_document,
    decompose_document,
    load_profile,
    plan_document,
    region_document,
    write_compare_csv,
    write_json,
    write_sweep_csv,
)
from lib.region_geometry import scheme_channel_uses, sum_dof_from_uses, sum_dof_optimal, sum_dof_suboptimal
from lib.scheme_synthesis import synthesize, validate_plan
from lib.settings import load_settings

# --- LOGGING SETUP ---
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger("dofcsit")

COMMANDS = ("region", "decompose", "synth", "simulate", "compare")
RESIDUAL_LIMIT = 1e-9
SIM_TOL = 0.1
GAP_TOL = 1e-12
EXIT_OK, EXIT_CHECKS_FAILED, EXIT_ERROR = 0, 1, 2


def _require_profile(settings):
    if not settings.profile:
        raise ConfigError("a profile is required (--profile, PROFILE in --config or DOFCSIT_PROFILE)")
    return load_profile(settings.profile)


def _report_checks(checks):
    failed = [c for c in checks if not c.passed]
    print(f"checks: {len(checks) - len(failed)}/{len(checks)} passed")
    for c in failed:
        print(f"  FAILED {c.name} at {c.location}: {c.detail}")
    return not failed


# ==========================================
# COMMANDS
# ==========================================


def cmd_region(settings, args):
    profile = _require_profile(settings)
    doc = region_document(profile)
    path = write_json(Path(settings.out) / "region.json", doc)

    w = doc["weights"]
    print(f"class {doc['class']}, min_avg={doc['min_avg']:.6g}")
    print("vertices: " + " ".join(f"({d1:.6g}, {d2:.6g})" for d1, d2 in doc["vertices"]))
    print(f"r_bar={w['r_bar']:.6g} r_hat={w['r_hat']:.6g} r_tilde={w['r_tilde']:.6g} r_hat'={w['r_hat_prime']:.6g}")
    print(f"composition residual {doc['composition_residual']:.3g} -> {path}")
    return EXIT_OK if doc["composition_residual"] <= RESIDUAL_LIMIT else EXIT_CHECKS_FAILED


def cmd_decompose(settings, args):
    profile = _require_profile(settings)
    reduction = reduce_to_balanced(profile, policy=settings.reduce_policy)
    schedule = pair_u0(reduction.reduced)
    doc = decompose_document(profile, reduction, schedule)
    path = write_json(Path(settings.out) / "decompose.json", doc)

    for row in doc["subchannels"]:
        print(f"subband {row['subband']}: PP={row['pp']:.6g} PN={row['pn']:.6g} NP={row['np']:.6g} NN={row['nn']:.6g}")
    if reduction.side:
        print(f"reduced user {'1' if reduction.side == 'a' else '2'} ({reduction.policy})")
    for m in schedule.messages:
        print(f"u0({m.id}): rate {m.rate_prelog:.6g}, subbands {m.donor} -> {m.receiver}")
    print(f"-> {path}")
    return EXIT_OK


def cmd_synth(settings, args):
    profile = _require_profile(settings)
    plan = synthesize(profile, common_owner=settings.owner, reduce_policy=settings.reduce_policy)
    checks = validate_plan(plan)
    doc = plan_document(plan, checks)
    path = write_json(Path(settings.out) / "synth.json", doc)

    dof = doc["rate_accounting"]
    print(f"plan: {len(plan.symbols)} symbols, {len(plan.schedule.messages)} u0 messages")
    print(f"rate accounting: d1={dof['d1']:.6g}, d2={dof['d2']:.6g}")
    ok = _report_checks(checks)
    print(f"-> {path}")
    return EXIT_OK if ok else EXIT_CHECKS_FAILED


def cmd_simulate(settings, args):
    profile = _require_profile(settings)
    cfg = settings.sim_config()
    plan = synthesize(profile, common_owner=settings.owner, reduce_policy=settings.reduce_policy)
    checks = validate_plan(plan)

    logger.info(f"Sweeping {len(cfg.snr_grid_db)} SNR points x {cfg.trials} trials (seed {cfg.seed})")
    result = sweep(plan, cfg)
    passed = result.passed(SIM_TOL)

    out = Path(settings.out)
    csv_path = write_sweep_csv(out / "sweep.csv", result.rows)
    write_json(
        out / "simulate.json",
        {
            "profile": settings.profile,
            "owner": settings.owner,
            "reduce_policy": settings.reduce_policy,
            "snr_db": list(cfg.snr_grid_db),
            "trials": cfg.trials,
            "seed": cfg.seed,
            "fit_points": cfg.fit_points,
            "user_rates": {f"user{k}": list(v) for k, v in result.user_rates.items()},
            "fitted": {"d1": result.fitted.d1, "d2": result.fitted.d2},
            "target": {"d1": result.target.d1, "d2": result.target.d2},
            "tolerance": SIM_TOL,
            "passed": passed,
            "decode_margin": dict(sorted(result.decode_margin.items())),
            "checks": checks_document(checks),
        },
    )

    print(f"fitted (d1, d2) = ({result.fitted.d1:.3f}, {result.fitted.d2:.3f})")
    print(f"target (d1, d2) = ({result.target.d1:.3f}, {result.target.d2:.3f})")
    print(f"{'PASS' if passed else 'FAIL'} at tolerance {SIM_TOL} -> {csv_path}")
    ok = _report_checks(checks)
    return EXIT_OK if (passed and ok) else EXIT_CHECKS_FAILED


def _compare_pairs(args):
    if args.pairs:
        pairs = []
        for item in args.pairs.split(","):
            try:
                alpha, beta = (float(x) for x in item.split(":"))
            except ValueError:
                raise ConfigError(f"--pairs entries look like alpha:beta, got {item!r}")
            pairs.append((alpha, beta))
        return pairs

    if not 0.0 < args.grid_step <= 1.0:
        raise ConfigError(f"--grid-step must lie in (0, 1], got {args.grid_step}")
    n = int(round(1.0 / args.grid_step))
    values = np.linspace(0.0, 1.0, n + 1)
    return [(float(alpha), float(beta)) for beta in values for alpha in values if alpha <= beta]


def cmd_compare(settings, args):
    rows = []
    skipped = 0
    for alpha, beta in _compare_pairs(args):
        try:
            d_sub = sum_dof_suboptimal(alpha, beta)
            d_opt = sum_dof_optimal(alpha, beta)
            uses = scheme_channel_uses(alpha, beta)
        except OrderViolation as e:
            logger.warning(f"⚠️ Skipping ({alpha}, {beta}): {e}")
            skipped += 1
            continue
        opt, sub = uses["optimal"], uses["suboptimal"]
        rows.append(
            {
                "alpha": alpha,
                "beta": beta,
                "d_sub": d_sub,
                "d_opt": d_opt,
                "gap": d_opt - d_sub,
                "strict_gap": 3.0 * beta - alpha > 2.0 + GAP_TOL,
                "opt_zfbf_uses": opt[0].channel_uses,
                "opt_s32_uses": opt[1].channel_uses,
                "opt_fdma_uses": opt[2].channel_uses,
                "sub_zfbf_uses": sub[0].channel_uses,
                "sub_mat_uses": sub[1].channel_uses,
                "sub_fdma_uses": sub[2].channel_uses,
            }
        )
        if abs(sum_dof_from_uses(opt) - d_opt) > 1e-9:
            logger.warning(f"⚠️ Channel-use breakdown disagrees with d_opt at ({alpha}, {beta})")

    out = Path(settings.out)
    csv_path = write_compare_csv(out / "compare.csv", rows)
    violations = [r for r in rows if r["d_opt"] < r["d_sub"] - GAP_TOL]
    write_json(
        out / "compare.json",
        {"rows": len(rows), "skipped": skipped, "strict_gap_rows": sum(r["strict_gap"] for r in rows),
         "max_gap": max((r["gap"] for r in rows), default=0.0), "violations": len(violations)},
    )

    print(f"compared {len(rows)} (alpha, beta) pairs, skipped {skipped}")
    if rows:
        worst = max(rows, key=lambda r: r["gap"])
        print(f"largest gap {worst['gap']:.6g} at alpha={worst['alpha']:g}, beta={worst['beta']:g}")
    print(f"-> {csv_path}")
    return EXIT_OK if not violations else EXIT_CHECKS_FAILED


HANDLERS = {
    "region": cmd_region,
    "decompose": cmd_decompose,
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


# ==========================================
# ENTRY POINT
# ==========================================


def build_parser():
    parser = argparse.ArgumentParser(prog="dofcsit", description="DoF region tools for the two-user MISO BC")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--profile", help="CSIT profile file (JSON with L, a, b)")
    parser.add_argument("--out", help="output directory (default ./out)")
    parser.add_argument("--owner", type=int, choices=(1, 2), help="user credited with the common messages")
    parser.add_argument("--reduce-policy", choices=REDUCE_POLICIES)
    parser.add_argument("--snr-db", help="comma-separated SNR grid in dB")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--fit-points", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--config", help="dotenv-style file with the same fields")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    parser.add_argument("--grid-step", type=float, default=0.1, help="compare: alpha/beta grid spacing")
    parser.add_argument("--pairs", help="compare: explicit alpha:beta list instead of a grid")
    return parser


def main(argv=None):
    load_dotenv()
    args = build_parser().parse_args(argv)

    cli = {
        "profile": args.profile,
        "out": args.out,
        "owner": args.owner,
        "reduce_policy": args.reduce_policy,
        "snr_db": args.snr_db,
        "trials": args.trials,
        "seed": args.seed,
        "fit_points": args.fit_points,
        "workers": args.workers,
        "log_level": "DEBUG" if args.verbose else None,
    }

    try:
        settings = load_settings(cli, config_path=args.config)
        logging.getLogger().setLevel(settings.log_level)
        return HANDLERS[args.command](settings, args)
    except DofCsitError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        logger.error(f"❌ {args.command} failed on I/O: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
