"""``photon-gauntlet`` command-line entry point.

Exit codes: 0 success, 1 I/O error, 2 invalid input, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import analytic, montecarlo, oracle, stats
from .scenario import (
    Scenario,
    ScenarioError,
    ShellSpec,
    ValidatedScenario,
    load_scenario,
    scenario_to_dict,
    validate,
)

__all__ = ["main", "RunReport", "parse_sweep"]

EXIT_OK = 0
EXIT_IO = 1
EXIT_INPUT = 2
EXIT_VERIFY = 3

REPORT_HEADER = ("quantity", "path", "value", "ci_lo", "ci_hi")
SWEEP_COLUMNS = ("p_separate", "p_bunched", "p_vacuum", "vacuum_power_bound", "ordering_holds", "amplification")
# Wilson interval width for Monte Carlo rows
CI_Z = 3.0


class UsageError(ValueError):
    pass


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return f"{value:.17g}"


@dataclass
class RunReport:
    command: str
    scenario: dict
    rows: list[tuple] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    def add(self, quantity: str, path: str, value, ci: tuple[float, float] | None = None) -> None:
        self.rows.append((quantity, path, value, ci))

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for quantity, path, value, ci in self.rows:
            lo, hi = ("", "") if ci is None else (fmt(ci[0]), fmt(ci[1]))
            writer.writerow((quantity, path, fmt(value), lo, hi))
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "scenario": self.scenario,
            "values": [
                {
                    "quantity": q,
                    "path": p,
                    "value": v if not (isinstance(v, float) and math.isnan(v)) else None,
                    "ci": list(ci) if ci else None,
                }
                for q, p, v, ci in self.rows
            ],
            "extra": self.extra,
            "timing": {"elapsed_s": self.elapsed_s},
        }
        return json.dumps(doc, indent=2, default=str) + "\n"

    def emit(self, out_dir: str | None, csv_name: str = "report.csv") -> None:
        if out_dir is None:
            sys.stdout.write(self.csv_text())
            return
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / csv_name).write_text(self.csv_text(), encoding="utf-8")
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")


# -- shared pieces ---------------------------------------------------------


def _load(args) -> ValidatedScenario:
    scenario = load_scenario(args.scenario)
    seed = scenario.seed
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    elif os.environ.get("PHOTON_SEED"):
        try:
            seed = int(os.environ["PHOTON_SEED"])
        except ValueError as exc:
            raise UsageError(f"PHOTON_SEED is not an integer: {os.environ['PHOTON_SEED']!r}") from exc
    trials = scenario.trials
    if getattr(args, "trials", None) is not None:
        trials = args.trials
    return validate(replace(scenario, seed=seed, trials=trials))


def _analytic_counts(vs: ValidatedScenario, mode: str | None = None) -> analytic.CountDistribution:
    mode = mode or vs.mode
    if mode == "separate":
        return analytic.m_of_k_distribution(analytic.detect_probability_product(vs.qv), vs.k)
    return analytic.bunched_count_distribution(vs.qv, vs.k)


def _amplification(qv: analytic.QVector, k: int, m: int) -> float:
    sep = analytic.m_of_k_distribution(analytic.detect_probability_product(qv), k)
    bun = analytic.bunched_count_distribution(qv, k)
    try:
        return stats.bunching_amplification(sep, bun, m)
    except stats.UndefinedRatioError:
        return math.nan


def _add_verdict(report: RunReport, verdict, path: str) -> None:
    report.add("p_separate", path, float(verdict.p_separate))
    report.add("p_bunched", path, float(verdict.p_bunched))
    report.add("p_vacuum", path, float(verdict.p_vacuum))
    report.add("vacuum_power_bound", path, float(verdict.vacuum_power_bound))
    report.add("event_m", path, verdict.event_m)
    report.add("ordering_holds", path, verdict.ordering_holds)


def analytic_report(vs: ValidatedScenario) -> RunReport:
    qv, k = vs.qv, vs.k
    report = RunReport("analytic", scenario_to_dict(vs.scenario))
    for j, q in enumerate(qv.absorber_qs, start=1):
        report.add(f"absorber_q[{j}]", "analytic", q)
    report.add("detector_q", "analytic", qv.detector_q)
    for n in range(1, qv.n_absorbers + 2):
        report.add(f"reach_probability[{n}]", "analytic", analytic.reach_probability(qv, n))
    for n in range(1, qv.n_absorbers + 1):
        report.add(f"absorb_probability[{n}]", "analytic", analytic.absorb_probability(qv, n))
    p_n = analytic.detect_probability_recurrent(qv)
    report.add("detect_probability", "analytic", p_n)
    report.add("detect_probability_product", "analytic", analytic.detect_probability_product(qv))
    report.add("all_k_detect", "analytic", analytic.all_k_detect(p_n, k))

    counts = _analytic_counts(vs)
    for m, p in enumerate(counts.probabilities):
        report.add(f"count_pmf[{m}]", "analytic", p)
    summary = stats.summarize(counts)
    report.add("mean_detected", "analytic", summary.mean)
    report.add("fano", "analytic", summary.fano)
    report.add("mandel_q", "analytic", summary.mandel_q)
    for s, p in enumerate(analytic.bunched_survivor_distribution(qv, k).probabilities):
        report.add(f"survivor_pmf[{s}]", "analytic", p)

    verdict = analytic.inequality_report(qv, k)
    _add_verdict(report, verdict, "analytic")
    report.add("amplification", "analytic", _amplification(qv, k, verdict.event_m))
    report.extra["degenerate_vacuum"] = verdict.degenerate_vacuum
    return report


# -- commands --------------------------------------------------------------


def cmd_analytic(args) -> int:
    start = time.perf_counter()
    report = analytic_report(_load(args))
    report.elapsed_s = time.perf_counter() - start
    report.emit(args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    start = time.perf_counter()
    vs = _load(args)
    qv, k, trials, seed = vs.qv, vs.k, vs.scenario.trials, vs.scenario.seed
    if trials < 1:
        raise UsageError("empty-experiment: trials must be >= 1")
    result = montecarlo.run_experiment(qv, k, vs.mode, trials, seed, workers=args.workers)
    expected = _analytic_counts(vs)
    comparison = stats.compare_to_analytic(result.distribution, expected, tol_z=args.tol_z)

    report = RunReport("simulate", scenario_to_dict(vs.scenario))
    counts = result.distribution.counts
    for m, (c, p) in enumerate(zip(counts, expected.probabilities)):
        report.add(f"count_pmf[{m}]", "analytic", p)
        report.add(f"count_pmf[{m}]", "montecarlo", c / trials, stats.wilson_interval(c, trials, CI_Z))
    photons = k * trials
    if vs.mode == "separate":
        # photons are independent, so per-photon frequencies are binomial
        report.add("detect_probability", "analytic", analytic.detect_probability_product(qv))
        detected = result.photons_detected
        report.add(
            "detect_probability", "montecarlo", detected / photons, stats.wilson_interval(detected, photons, CI_Z)
        )
        for j, tot in enumerate(result.absorbed_totals, start=1):
            report.add(f"absorb_probability[{j}]", "analytic", analytic.absorb_probability(qv, j))
            report.add(
                f"absorb_probability[{j}]", "montecarlo", tot / photons, stats.wilson_interval(tot, photons, CI_Z)
            )
    else:
        survivors = analytic.bunched_survivor_distribution(qv, k).probabilities
        for s, (c, p) in enumerate(zip(result.survivor_counts, survivors)):
            report.add(f"survivor_pmf[{s}]", "analytic", p)
            report.add(f"survivor_pmf[{s}]", "montecarlo", c / trials, stats.wilson_interval(c, trials, CI_Z))
        report.add("min_survivors", "montecarlo", result.min_survivors)
    m = analytic.event_count(qv.n_absorbers, k)
    hits = result.distribution.at_least(m)
    report.add(f"detect_at_least[{m}]", "analytic", expected.at_least(m))
    report.add(f"detect_at_least[{m}]", "montecarlo", hits / trials, stats.wilson_interval(hits, trials, CI_Z))
    summary = stats.summarize(result.distribution)
    report.add("fano", "montecarlo", summary.fano)
    report.add("mandel_q", "montecarlo", summary.mandel_q)
    report.add("max_abs_z", "montecarlo", max(abs(z) for z in comparison.z_scores))
    report.add("chi_square", "montecarlo", comparison.chi_square)
    report.add("chi_square_dof", "montecarlo", comparison.dof)
    report.add("verdict_pass", "montecarlo", comparison.passed)

    report.extra.update(
        z_scores=list(comparison.z_scores),
        chi_square_p_value=comparison.p_value,
        tol_z=args.tol_z,
        workers=args.workers,
        absorbed_totals=list(result.absorbed_totals),
    )
    report.elapsed_s = time.perf_counter() - start
    report.emit(args.out)
    if not comparison.passed:
        print(f"statistical verdict failed: max |z| exceeds {args.tol_z}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_oracle(args) -> int:
    start = time.perf_counter()
    vs = _load(args)
    qv, k = vs.qv, vs.k
    check = oracle.cross_check(qv, k, tol=args.tol)
    sep = oracle.enumerate_separate(qv, k)
    bun = oracle.enumerate_bunched(qv, k)

    report = RunReport("oracle", scenario_to_dict(vs.scenario))
    for m, p in enumerate(sep.as_floats()):
        report.add(f"separate_pmf[{m}]", "oracle", p)
    for m, p in enumerate(bun.as_floats()):
        report.add(f"bunched_pmf[{m}]", "oracle", p)
    for s, p in enumerate(bun.survivors_as_floats()):
        report.add(f"survivor_pmf[{s}]", "oracle", p)
    _add_verdict(report, check.oracle, "oracle")
    _add_verdict(report, check.analytic, "analytic")
    report.add("max_deviation", "oracle", check.max_deviation)
    report.add("totals_exact", "oracle", check.totals_exact)
    report.add("cross_check_pass", "oracle", check.passed)
    report.extra.update(deviations=check.deviations, tol=args.tol)
    report.elapsed_s = time.perf_counter() - start
    report.emit(args.out)
    if not check.passed:
        print(f"oracle deviation {check.max_deviation:.3g} exceeds tol {args.tol:g}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_compare(args) -> int:
    start = time.perf_counter()
    vs = _load(args)
    qv, k = vs.qv, vs.k
    verdict = analytic.inequality_report(qv, k)
    amp = _amplification(qv, k, verdict.event_m)

    report = RunReport("compare", scenario_to_dict(vs.scenario))
    _add_verdict(report, verdict, "analytic")
    report.add("amplification", "analytic", amp)
    print(f"M={verdict.event_m} K={k} A={qv.n_absorbers}")
    print(verdict.line())
    print(f"amplification={amp:.6f}")
    if verdict.degenerate_vacuum:
        print("degenerate-vacuum: no shell absorbs, separate, bunched and vacuum paths coincide")

    trials, seed = vs.scenario.trials, vs.scenario.seed
    if trials > 0:
        m = verdict.event_m
        runs = {
            mode: montecarlo.run_experiment(qv, k, mode, trials, seed, workers=args.workers)
            for mode in montecarlo.MODES
        }
        values = {}
        for mode, run in runs.items():
            hits = run.distribution.at_least(m)
            values[mode] = hits / trials
            report.add(f"p_{mode}", "montecarlo", hits / trials, stats.wilson_interval(hits, trials, CI_Z))
        try:
            mc_amp = stats.bunching_amplification(runs["separate"].distribution, runs["bunched"].distribution, m)
        except stats.UndefinedRatioError:
            mc_amp = math.nan
        report.add("amplification", "montecarlo", mc_amp)
        print(
            f"montecarlo trials={trials} seed={seed} p_separate={values['separate']:.6f} "
            f"p_bunched={values['bunched']:.6f} amplification={mc_amp:.6f}"
        )
    report.elapsed_s = time.perf_counter() - start
    if args.out is not None:
        report.emit(args.out)
    return EXIT_OK


# -- sweeps ----------------------------------------------------------------


def _parse_values(text: str, integer: bool) -> list:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise UsageError(f"range {text!r} needs a positive step")
        n = math.floor((stop - start) / step + 1e-9) + 1
        values = [start + i * step for i in range(max(n, 0))]
        # decimal ranges print as typed, e.g. 0.30000000000000004 -> 0.3
        values = [round(v, 12) for v in values]
    else:
        values = [float(v) for v in text.split(",") if v.strip()]
    if integer:
        if any(v != int(v) for v in values):
            raise UsageError(f"range {text!r} must be integral")
        values = [int(v) for v in values]
    if not values:
        raise UsageError(f"empty range {text!r}")
    return values


def _field_kind(name: str) -> str:
    if name in ("K", "emission.photons_k"):
        return "k"
    if name in ("A", "absorbers"):
        return "a"
    if name in ("q_D", "detector.q"):
        return "qd"
    if name.startswith("shells[") and name.endswith("].q"):
        try:
            int(name[len("shells[") : -len("].q")])
        except ValueError:
            pass
        else:
            return "shell"
    raise UsageError(f"unknown sweep field {name!r}")


def parse_sweep(specs: list[str]) -> list[tuple[str, list]]:
    """``FIELD=RANGE`` items; RANGE is ``start:stop:step`` (inclusive) or a
    comma list. Fields: ``shells[i].q``, ``detector.q``, ``emission.photons_k``
    (alias ``K``), ``absorbers`` (alias ``A``, copies the last shell)."""
    if not specs:
        raise UsageError("no --sweep fields given")
    out = []
    for item in specs:
        name, sep, rng = item.partition("=")
        if not sep:
            raise UsageError(f"sweep item {item!r} must be FIELD=RANGE")
        name = name.strip()
        kind = _field_kind(name)
        out.append((name, _parse_values(rng.strip(), integer=kind in ("k", "a"))))
    return out


def _apply(scenario: Scenario, assignment: dict[str, object]) -> Scenario:
    shells = list(scenario.shells)
    detector, emission = scenario.detector, scenario.emission
    for name, value in assignment.items():
        if _field_kind(name) == "a":
            if value < 0:
                raise UsageError("absorber count must be >= 0")
            if value > len(shells):
                if not shells:
                    raise UsageError("sweeping the absorber count needs a template shell")
                template = shells[-1]
                if template.is_geometric:
                    raise UsageError("absorber-count sweeps need a template shell given by q")
                shells += [replace(template, label=f"{template.label}+{i}") for i in range(1, value - len(shells) + 1)]
            shells = shells[:value]
    for name, value in assignment.items():
        kind = _field_kind(name)
        if kind == "shell":
            i = int(name[len("shells[") : -len("].q")])
            if not 0 <= i < len(shells):
                raise UsageError(f"{name}: no shell {i} (scenario has {len(shells)})")
            shells[i] = ShellSpec(label=shells[i].label, q=float(value))
        elif kind == "qd":
            detector = replace(detector, q=float(value), radius_m=None, cross_section_m2=None)
        elif kind == "k":
            emission = replace(emission, photons_k=int(value))
    return replace(scenario, shells=tuple(shells), detector=detector, emission=emission)


def sweep_rows(scenario: Scenario, axes: list[tuple[str, list]]) -> list[list]:
    names = [n for n, _ in axes]
    rows = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        vs = validate(_apply(scenario, dict(zip(names, combo))))
        verdict = analytic.inequality_report(vs.qv, vs.k)
        rows.append(
            list(combo)
            + [
                verdict.p_separate,
                verdict.p_bunched,
                verdict.p_vacuum,
                verdict.vacuum_power_bound,
                verdict.ordering_holds,
                _amplification(vs.qv, vs.k, verdict.event_m),
            ]
        )
    return rows


def cmd_sweep(args) -> int:
    axes = parse_sweep(args.sweep)
    scenario = load_scenario(args.scenario)
    rows = sweep_rows(scenario, axes)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([n for n, _ in axes] + list(SWEEP_COLUMNS))
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    if args.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon-gauntlet",
        description="Detection statistics of photons crossing single-capacity absorbers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, trials=False, seed=False, workers=False):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory (CSV to stdout when omitted)")
        if trials:
            p.add_argument("--trials", type=int, default=None, help="override the scenario trial count")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override the scenario seed (and PHOTON_SEED)")
        if workers:
            p.add_argument("--workers", type=int, default=1, help="worker processes (output does not depend on it)")

    common(sub.add_parser("analytic", help="closed-form report"))
    p = sub.add_parser("simulate", help="Monte Carlo run checked against the closed forms")
    common(p, trials=True, seed=True, workers=True)
    p.add_argument("--tol-z", type=float, default=4.0, help="largest accepted |z| per count cell")
    p = sub.add_parser("oracle", help="exact enumeration cross-check")
    common(p)
    p.add_argument("--tol", type=float, default=analytic.ABS_TOL, help="largest accepted absolute deviation")
    p = sub.add_parser("compare", help="separate vs bunched vs vacuum ordering")
    common(p, trials=True, seed=True, workers=True)
    p = sub.add_parser("sweep", help="ordering verdict over a parameter grid")
    common(p)
    p.add_argument("--sweep", action="append", default=[], metavar="FIELD=RANGE")
    return parser


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, UsageError, oracle.InstanceTooLarge) as exc:
        print(f"photon-gauntlet: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"photon-gauntlet: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
