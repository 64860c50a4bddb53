"""Command-line front end.

Subcommands: ``plan | run | learn | verify | compare``. Every behavior
is a thin shell over library calls; all outputs (CSV, JSON metadata
sidecars, plain-text summaries) are deterministic for a fixed seed.

Exit codes: 0 success, 2 configuration or admissibility error,
3 numerical failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .budget import (
    LearnSpec,
    PreconditionerKind,
    format_budget_text,
    plan_learning,
    plan_ula_preconditioned,
    plan_underdamped_unpreconditioned,
    plan_ula_unpreconditioned,
)
from .errors import (
    ConfigError,
    NumericalFailureError,
    OracleUnsupportedError,
    ToolkitError,
)
from .estimators import empirical_covariance, empirical_fisher
from .flops import FlopLedger
from .kernels import KernelConfig, KernelFamily
from .linalg import GaussianLaw, save_spd_text
from .oracle import aiid_consequence_checks, exact_joint_law_from_schedule
from .rng import substream
from .sampler import (
    SamplingMode,
    run_learn_phase,
    run_preconditioned,
    run_thinned,
    save_ensemble,
    total_flops_forecast,
)
from .experiments import ExperimentSpec, run_complexity_comparison, run_thm5_frequency

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4

MODE_BY_NAME = {"unpre": SamplingMode.UNPRE, "cov": SamplingMode.COV, "fisher": SamplingMode.FISHER}


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=str, default=None, help="config file path")
    sub.add_argument("--seed", type=int, default=None, help="base RNG seed (uint64)")
    sub.add_argument("--out", type=str, default=None, help="output directory")
    sub.add_argument("--threads", type=int, default=None, help="worker thread count")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry, e.g. --set plan.eps=0.1 (repeatable)",
    )
    sub.add_argument("--target", type=str, default=None, help="inline target spec, e.g. gaussian:d=2,kappa=4")
    sub.add_argument("--mode", type=str, default=None, help="sampling mode: unpre | cov | fisher | underdamped")
    sub.add_argument("--eps", type=float, default=None, help="accuracy epsilon")
    sub.add_argument("--N", type=int, default=None, help="output ensemble size")
    sub.add_argument("--delta", type=float, default=None, help="learning failure probability")
    sub.add_argument("--Delta", type=float, default=None, help="learning relative-error target")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="precond-langevin",
        description="Langevin sampling with learned preconditioners: plan budgets, "
        "run chains, learn preconditioners, verify guarantees, compare costs.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, desc in [
        ("plan", "print and save the budget for a sampling mode"),
        ("run", "execute a sampling pipeline and write the ensemble CSV"),
        ("learn", "run the preconditioner learning phase only"),
        ("verify", "exact-oracle verification of the planned guarantee (Gaussian targets)"),
        ("compare", "planned FLOP comparison across ensemble sizes"),
    ]:
        sub = subs.add_parser(name, help=desc)
        _common_flags(sub)
        if name == "verify":
            sub.add_argument("--mc-draws", type=int, default=None, help="coupled draws per check")
            sub.add_argument(
                "--scale-burn",
                type=float,
                default=None,
                help="informational: scale k_burn before verifying (e.g. 0.5)",
            )
            sub.add_argument(
                "--scale-thin", type=float, default=None, help="informational: scale k_thin"
            )
        if name == "compare":
            sub.add_argument(
                "--N-grid", type=str, default=None, help="comma-separated ensemble sizes"
            )
    return parser


def _effective_config(args) -> dict:
    cfg = cfgmod.default_config()
    if args.config:
        cfgmod.load_config(args.config, cfg)
    if args.target:
        cfgmod.parse_target_spec(args.target, cfg)
    if args.mode is not None:
        cfg["plan"]["mode"] = args.mode
    if args.eps is not None:
        cfg["plan"]["eps"] = args.eps
    if args.N is not None:
        cfg["plan"]["n"] = args.N
    if args.delta is not None:
        cfg["plan"]["delta"] = args.delta
    if args.Delta is not None:
        cfg["plan"]["delta_rel"] = args.Delta
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    if args.out is not None:
        cfg["run"]["out"] = args.out
    if args.threads is not None:
        cfg["run"]["threads"] = args.threads
    if getattr(args, "mc_draws", None) is not None:
        cfg["verify"]["mc_draws"] = args.mc_draws
    if getattr(args, "scale_burn", None) is not None:
        cfg["verify"]["scale_burn"] = args.scale_burn
    if getattr(args, "scale_thin", None) is not None:
        cfg["verify"]["scale_thin"] = args.scale_thin
    if getattr(args, "N_grid", None):
        cfg["experiment"]["n_grid"] = [int(t) for t in args.N_grid.split(",") if t.strip()]
    cfgmod.apply_overrides(cfg, args.overrides)
    if not cfg["run"]["threads"]:
        cfg["run"]["threads"] = int(os.environ.get("PRECOND_LANGEVIN_THREADS", "1"))
    return cfg


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["run"]["out"] or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _plan_budget(cfg: dict, target):
    plan = cfg["plan"]
    mode = plan["mode"].strip().lower()
    if mode == "unpre":
        return plan_ula_unpreconditioned(target, plan["eps"], plan["n"]), mode
    if mode == "underdamped":
        return (
            plan_underdamped_unpreconditioned(
                target, plan["eps"], plan["n"], plan["d_bound"]
            ),
            mode,
        )
    if mode in ("cov", "fisher"):
        kind = PreconditionerKind.COVARIANCE if mode == "cov" else PreconditionerKind.FISHER
        return (
            plan_ula_preconditioned(
                target, None, plan["delta_rel"], plan["eps"], plan["n"], kind=kind
            ),
            mode,
        )
    raise ConfigError(f"unknown plan mode {plan['mode']!r}")


def cmd_plan(cfg: dict) -> int:
    target = cfgmod.build_target(cfg)
    plan = cfg["plan"]
    mode = plan["mode"].strip().lower()
    budget, mode = _plan_budget(cfg, target)
    if mode in ("cov", "fisher"):
        kind = PreconditionerKind.COVARIANCE if mode == "cov" else PreconditionerKind.FISHER
        learn_budget = plan_learning(
            target,
            LearnSpec(
                delta=plan["delta"],
                delta_rel=plan["delta_rel"],
                kind=kind,
                c_absolute=plan["c"],
            ),
        )
        forecast = total_flops_forecast(
            target,
            MODE_BY_NAME[mode],
            plan["eps"],
            plan["n"],
            delta=plan["delta"],
            delta_rel=plan["delta_rel"],
            c_absolute=plan["c"],
        )
        text = (
            format_budget_text(learn_budget, title=f"learning budget ({mode})")
            + "\n"
            + format_budget_text(budget, title=f"sampling budget ({mode})")
            + f"\nforecast_flops: learn={forecast.learn_flops} "
            + f"sample={forecast.sample_flops} total={forecast.total_flops}\n"
        )
        record = {
            "mode": mode,
            "learn_budget": learn_budget.as_dict(),
            "sample_budget": budget.as_dict(),
            "forecast": forecast.as_dict(),
        }
    else:
        family = (
            KernelFamily.UNDERDAMPED if mode == "underdamped" else KernelFamily.ULA
        )
        forecast = total_flops_forecast(
            target,
            SamplingMode.UNPRE,
            plan["eps"],
            plan["n"],
            family=family,
            initial_distance_bound=plan["d_bound"],
        )
        text = (
            format_budget_text(budget, title=f"sampling budget ({mode})")
            + f"\nforecast_flops: total={forecast.total_flops}\n"
        )
        record = {"mode": mode, "sample_budget": budget.as_dict(), "forecast": forecast.as_dict()}
    out = _out_dir(cfg)
    _write(out / "budget.txt", text)
    _write(out / "budget.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_run(cfg: dict) -> int:
    target = cfgmod.build_target(cfg)
    plan = cfg["plan"]
    mode = plan["mode"].strip().lower()
    rng = substream(cfg["run"]["seed"], 0)
    out = _out_dir(cfg)
    mu0 = target.mode
    if mu0 is None:
        raise ConfigError("target has no known mode; explicit initialization required")

    if mode in ("unpre", "underdamped"):
        budget, _ = _plan_budget(cfg, target)
        family = KernelFamily.UNDERDAMPED if mode == "underdamped" else KernelFamily.ULA
        kernel = KernelConfig(
            family=family, h=budget.h, initial_distance_bound=plan["d_bound"]
        )
        ensemble = run_thinned(kernel, target, mu0, budget, rng)
        summary = (
            f"mode: {mode}\nsamples: {ensemble.size}\n"
            f"kernel steps: {ensemble.meta['kernel_steps']}\n"
            f"flops: {ensemble.meta['ledger']['total']}\n"
        )
    elif mode in ("cov", "fisher"):
        kind = PreconditionerKind.COVARIANCE if mode == "cov" else PreconditionerKind.FISHER
        spec = LearnSpec(
            delta=plan["delta"], delta_rel=plan["delta_rel"], kind=kind, c_absolute=plan["c"]
        )
        result = run_preconditioned(target, spec, plan["eps"], plan["n"], mu0, rng)
        ensemble = result.ensemble
        _write(out / "preconditioner.spd", save_spd_text(result.preconditioner))
        cert = result.certificate.as_dict() if result.certificate else None
        summary = (
            f"mode: {mode}\nsamples: {ensemble.size}\n"
            f"learn flops: {result.learn_ledger.total()}\n"
            f"sample flops: {result.sample_ledger.total()}\n"
            f"certificate: {json.dumps(cert)}\n"
        )
    else:
        raise ConfigError(f"unknown run mode {plan['mode']!r}")

    save_ensemble(ensemble, out / "ensemble.csv", out / "ensemble.meta.json")
    _write(out / "summary.txt", summary)
    sys.stdout.write(summary)
    return EXIT_OK


def cmd_learn(cfg: dict) -> int:
    target = cfgmod.build_target(cfg)
    plan = cfg["plan"]
    mode = plan["mode"].strip().lower()
    kind = PreconditionerKind.FISHER if mode == "fisher" else PreconditionerKind.COVARIANCE
    spec = LearnSpec(
        delta=plan["delta"], delta_rel=plan["delta_rel"], kind=kind, c_absolute=plan["c"]
    )
    budget = plan_learning(target, spec)
    rng = substream(cfg["run"]["seed"], 0)
    ledger = FlopLedger(gradient_cost=target.gradient_cost)
    mu0 = target.mode
    if mu0 is None:
        raise ConfigError("target has no known mode; explicit initialization required")
    ensemble = run_learn_phase(target, budget, mu0, rng, ledger)
    if kind is PreconditionerKind.COVARIANCE:
        estimate = empirical_covariance(ensemble, ledger=ledger)
        reference = target.analytic_covariance
    else:
        estimate = empirical_fisher(ensemble, target, ledger=ledger)
        reference = target.analytic_fisher
    out = _out_dir(cfg)
    _write(out / "estimate.spd", save_spd_text(estimate))
    cert = None
    if reference is not None:
        from .estimators import certify

        cert = certify(estimate, reference, spec.delta_rel).as_dict()
    sidecar = {
        "kind": kind.value,
        "budget": budget.as_dict(),
        "ledger": ledger.as_dict(),
        "certificate": cert,
    }
    _write(out / "estimate.meta.json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    summary = (
        format_budget_text(budget, title=f"learning budget ({kind.value})")
        + f"certificate: {json.dumps(cert)}\n"
    )
    _write(out / "summary.txt", summary)
    sys.stdout.write(summary)
    return EXIT_OK


def cmd_verify(cfg: dict) -> int:
    target = cfgmod.build_target(cfg)
    if not target.is_gaussian:
        raise OracleUnsupportedError("oracle unsupported: verification needs a Gaussian target")
    plan = cfg["plan"]
    budget = plan_ula_unpreconditioned(target, plan["eps"], plan["n"])
    scale_burn, scale_thin = cfg["verify"]["scale_burn"], cfg["verify"]["scale_thin"]
    k_burn = max(0, int(budget.k_burn * scale_burn))
    k_thin = max(1, int(budget.k_thin * scale_thin))
    law = GaussianLaw(target.analytic_mean, target.analytic_covariance)
    chain = exact_joint_law_from_schedule(
        law, budget.h, k_burn, k_thin, budget.N, target.mode
    )
    import math

    w2 = chain.w2_to_product()
    bound = math.sqrt(budget.N) * plan["eps"]
    lines = [
        f"schedule: h={budget.h:.6g} k_burn={k_burn} k_thin={k_thin} N={budget.N}",
        f"aiid: W2(joint, product) = {w2:.9g}, bound sqrt(N)*eps = {bound:.9g}, "
        f"margin = {bound - w2:.9g} ({'OK' if w2 <= bound + 1e-8 else 'VIOLATED'})",
    ]
    ok = w2 <= bound + 1e-8
    csv_text = ""
    if ok:
        rng = substream(cfg["run"]["seed"], 0)
        report = aiid_consequence_checks(
            chain, law, plan["eps"], cfg["verify"]["mc_draws"], rng
        )
        csv_text = report.to_csv_text()
        for row in report.rows:
            lines.append(
                f"{row.name}: lhs={row.lhs:.6g} rhs={row.rhs:.6g} slack={row.slack:.6g} "
                f"margin={row.margin:.6g} [{row.method}] "
                f"({'OK' if row.passed else 'VIOLATED'})"
            )
        ok = report.passed
    else:
        lines.append("consequence checks skipped: approximate-IID precondition failed")
    text = "\n".join(lines) + "\n"
    out = _out_dir(cfg)
    _write(out / "verify_summary.txt", text)
    _write(out / "verify.csv", csv_text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_compare(cfg: dict) -> int:
    target = cfgmod.build_target(cfg)
    plan = cfg["plan"]
    n_grid = cfg["experiment"]["n_grid"] or [2**k for k in range(4, 21, 2)]
    spec = ExperimentSpec(
        name=cfg["experiment"]["name"],
        target=target,
        eps=plan["eps"],
        n_out=plan["n"],
        delta=plan["delta"],
        delta_rel=plan["delta_rel"],
        seed=cfg["run"]["seed"],
        threads=cfg["run"]["threads"],
        c_absolute=plan["c"],
    )
    report = run_complexity_comparison(spec, n_grid)
    out = _out_dir(cfg)
    _write(out / "compare.csv", report.to_csv_text())
    _write(out / "compare_summary.txt", report.summary_text())
    sys.stdout.write(report.summary_text())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        handler = {
            "plan": cmd_plan,
            "run": cmd_run,
            "learn": cmd_learn,
            "verify": cmd_verify,
            "compare": cmd_compare,
        }[args.command]
        return handler(cfg)
    except NumericalFailureError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except ToolkitError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
