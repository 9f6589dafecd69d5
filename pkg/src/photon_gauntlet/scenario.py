"""Experiment descriptions: shells, detector, emission plan, and file I/O.

Scenario files are JSON documents::

    {
      "shells": [{"label": "a1", "q": 0.5},
                 {"label": "a2", "radius_m": 2.0, "cross_section_m2": 3.0}],
      "detector": {"label": "det", "q": 0.1, "mode": "multiphoton"},
      "emission": {"mode": "bunched", "photons_k": 3, "interval_t_s": 1e-9},
      "trials": 1000000,
      "seed": 42
    }

Each shell or detector gives its interaction probability either directly
(``q``) or through geometry (``radius_m`` + ``cross_section_m2``), never both.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .analytic import QVector

__all__ = [
    "DetectorSpec",
    "EmissionPlan",
    "Issue",
    "Scenario",
    "ScenarioError",
    "ShellSpec",
    "ValidatedScenario",
    "load_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "validate",
    "validation_issues",
    "vacuum_probability",
]

SEED_MAX = 2**64 - 1
DETECTOR_MODES = ("single", "multiphoton")
EMISSION_MODES = ("separate", "bunched")


@dataclass(frozen=True)
class Issue:
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.location}: {self.message}"


class ScenarioError(ValueError):
    """Raised when a scenario cannot be loaded or fails validation."""

    def __init__(self, issues: list[Issue] | Issue):
        if isinstance(issues, Issue):
            issues = [issues]
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))

    @property
    def codes(self) -> list[str]:
        return [i.code for i in self.issues]


def vacuum_probability(radius_m: float, cross_section_m2: float) -> float:
    """Probability that a photon crossing a sphere of ``radius_m`` hits an
    effective area ``cross_section_m2`` on it, ``a / (4 pi r^2)``.

    Raises ScenarioError (code ``invalid-geometry``) when the area exceeds
    the sphere surface or either argument is not positive.
    """
    if not radius_m > 0 or not cross_section_m2 > 0:
        raise ScenarioError(
            Issue("invalid-geometry", "geometry", "radius and cross-section must be positive")
        )
    q = cross_section_m2 / (4.0 * math.pi * radius_m**2)
    if q > 1.0:
        raise ScenarioError(
            Issue(
                "invalid-geometry",
                "geometry",
                f"cross-section {cross_section_m2} exceeds sphere area at r={radius_m} (q={q:.6g})",
            )
        )
    return q


@dataclass(frozen=True)
class ShellSpec:
    label: str
    q: float | None = None
    radius_m: float | None = None
    cross_section_m2: float | None = None

    @property
    def is_geometric(self) -> bool:
        return self.radius_m is not None

    def resolve(self) -> float:
        if self.q is not None:
            return self.q
        return vacuum_probability(self.radius_m, self.cross_section_m2)


@dataclass(frozen=True)
class DetectorSpec(ShellSpec):
    mode: str = "single"


@dataclass(frozen=True)
class EmissionPlan:
    mode: str
    photons_k: int
    # bookkeeping only, never enters a probability
    interval_t_s: float = 1.0


@dataclass(frozen=True)
class Scenario:
    shells: tuple[ShellSpec, ...]
    detector: DetectorSpec
    emission: EmissionPlan
    trials: int = 0
    seed: int = 0


@dataclass(frozen=True)
class ValidatedScenario:
    scenario: Scenario
    qv: QVector = field(repr=False)

    @property
    def k(self) -> int:
        return self.scenario.emission.photons_k

    @property
    def mode(self) -> str:
        return self.scenario.emission.mode


def _resolve(spec: ShellSpec, where: str, issues: list[Issue]) -> float | None:
    try:
        q = spec.resolve()
    except ScenarioError as exc:
        issues.extend(Issue(i.code, where, i.message) for i in exc.issues)
        return None
    if not 0.0 <= q <= 1.0:
        issues.append(Issue("probability-range", where, f"q={q!r} outside [0, 1]"))
        return None
    return q


def validation_issues(scenario: Scenario) -> list[Issue]:
    """Every violated scenario invariant; an empty list means valid."""
    issues: list[Issue] = []
    for shell in scenario.shells:
        _resolve(shell, f"shell {shell.label}", issues)
    _resolve(scenario.detector, f"detector {scenario.detector.label}", issues)

    last: ShellSpec | None = None
    for shell in scenario.shells:
        if not shell.is_geometric:
            continue
        if last is not None and not shell.radius_m > last.radius_m:
            issues.append(
                Issue(
                    "shells-not-increasing",
                    f"shell {shell.label}",
                    f"radius {shell.radius_m} does not exceed {last.radius_m} of shell {last.label}",
                )
            )
        last = shell
    det = scenario.detector
    if det.is_geometric and last is not None and not det.radius_m > last.radius_m:
        issues.append(
            Issue(
                "shells-not-increasing",
                f"detector {det.label}",
                f"detector radius {det.radius_m} does not exceed last shell radius {last.radius_m}",
            )
        )

    if det.mode not in DETECTOR_MODES:
        issues.append(Issue("detector-mode", f"detector {det.label}", f"unknown mode {det.mode!r}"))
    em = scenario.emission
    if em.mode not in EMISSION_MODES:
        issues.append(Issue("emission-mode", "emission", f"unknown mode {em.mode!r}"))
    if em.photons_k < 1:
        issues.append(Issue("photons-k", "emission", "photons_k must be >= 1"))
    if not em.interval_t_s > 0:
        issues.append(Issue("interval", "emission", "interval_t_s must be > 0"))
    if em.mode == "bunched" and em.photons_k > 1 and det.mode != "multiphoton":
        issues.append(
            Issue(
                "detector-mode",
                f"detector {det.label}",
                f"bunched emission with K={em.photons_k} needs a multiphoton detector",
            )
        )
    if scenario.trials < 0:
        issues.append(Issue("trials", "trials", "trials must be >= 0"))
    if not 0 <= scenario.seed <= SEED_MAX:
        issues.append(Issue("seed", "seed", "seed must be a 64-bit unsigned integer"))
    return issues


def validate(scenario: Scenario) -> ValidatedScenario:
    issues = validation_issues(scenario)
    if issues:
        raise ScenarioError(issues)
    qv = QVector(
        tuple(s.resolve() for s in scenario.shells),
        scenario.detector.resolve(),
    )
    return ValidatedScenario(scenario, qv)


# -- serialization ---------------------------------------------------------

_SHELL_KEYS = {"label", "q", "radius_m", "cross_section_m2"}
_DETECTOR_KEYS = _SHELL_KEYS | {"mode"}
_EMISSION_KEYS = {"mode", "photons_k", "interval_t_s"}
_TOP_KEYS = {"shells", "detector", "emission", "trials", "seed"}


def _schema_error(path: str, message: str, code: str = "schema-violation") -> ScenarioError:
    return ScenarioError(Issue(code, path, message))


def _check_keys(obj: Any, allowed: set[str], required: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise _schema_error(path, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise _schema_error(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")
    for key in sorted(required):
        if key not in obj:
            raise _schema_error(f"{path}.{key}" if path else key, "missing required key")


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _schema_error(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _schema_error(path, f"expected an integer, got {value!r}")
    return value


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise _schema_error(path, f"expected a string, got {value!r}")
    return value


def _probability_form(obj: dict, path: str) -> dict:
    has_q = "q" in obj
    geo = {"radius_m", "cross_section_m2"} & set(obj)
    if has_q and geo:
        raise _schema_error(path, "exclusive-fields: give either q or radius_m/cross_section_m2")
    if has_q:
        return {"q": _number(obj["q"], f"{path}.q")}
    if len(geo) != 2:
        missing = "q" if not geo else ({"radius_m", "cross_section_m2"} - geo).pop()
        raise _schema_error(f"{path}.{missing}", "missing required key")
    return {
        "radius_m": _number(obj["radius_m"], f"{path}.radius_m"),
        "cross_section_m2": _number(obj["cross_section_m2"], f"{path}.cross_section_m2"),
    }


def scenario_from_dict(data: Any) -> Scenario:
    """Build a Scenario from a parsed document, rejecting unknown keys."""
    _check_keys(data, _TOP_KEYS, _TOP_KEYS, "")
    if not isinstance(data["shells"], list):
        raise _schema_error("shells", "expected a list")
    shells = []
    for i, raw in enumerate(data["shells"]):
        path = f"shells[{i}]"
        _check_keys(raw, _SHELL_KEYS, {"label"}, path)
        shells.append(ShellSpec(label=_string(raw["label"], f"{path}.label"), **_probability_form(raw, path)))

    raw = data["detector"]
    _check_keys(raw, _DETECTOR_KEYS, {"label", "mode"}, "detector")
    detector = DetectorSpec(
        label=_string(raw["label"], "detector.label"),
        mode=_string(raw["mode"], "detector.mode"),
        **_probability_form(raw, "detector"),
    )

    raw = data["emission"]
    _check_keys(raw, _EMISSION_KEYS, {"mode", "photons_k"}, "emission")
    emission = EmissionPlan(
        mode=_string(raw["mode"], "emission.mode"),
        photons_k=_integer(raw["photons_k"], "emission.photons_k"),
        interval_t_s=_number(raw.get("interval_t_s", 1.0), "emission.interval_t_s"),
    )
    return Scenario(
        shells=tuple(shells),
        detector=detector,
        emission=emission,
        trials=_integer(data["trials"], "trials"),
        seed=_integer(data["seed"], "seed"),
    )


def _shell_dict(spec: ShellSpec) -> dict:
    out: dict[str, Any] = {"label": spec.label}
    if spec.q is not None:
        out["q"] = spec.q
    else:
        out["radius_m"] = spec.radius_m
        out["cross_section_m2"] = spec.cross_section_m2
    return out


def scenario_to_dict(scenario: Scenario) -> dict:
    detector = _shell_dict(scenario.detector)
    detector["mode"] = scenario.detector.mode
    em = scenario.emission
    return {
        "shells": [_shell_dict(s) for s in scenario.shells],
        "detector": detector,
        "emission": {"mode": em.mode, "photons_k": em.photons_k, "interval_t_s": em.interval_t_s},
        "trials": scenario.trials,
        "seed": scenario.seed,
    }


def load_scenario(path: str | Path) -> Scenario:
    """Read a JSON scenario file.

    Parse failures are reported as ScenarioError with code ``parse-error``
    and a ``line:column`` location; schema failures carry the field path.
    OSError from reading the file propagates unchanged.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(Issue("parse-error", f"line {exc.lineno}:{exc.colno}", exc.msg)) from exc
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n", encoding="utf-8")
