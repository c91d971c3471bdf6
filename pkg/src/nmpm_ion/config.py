"""Run configuration: flat ``key = value`` files overridden by CLI flags."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .ion_model import InitialStateSpec

OUTPUT_KINDS = ("csv", "svg", "deviation_report")
FIG1_LAMBDAS = (0.1, 0.2, 0.3, 0.4)

# config-file key -> RunConfig attribute
_KEYS = {
    "lambda": "lam",
    "eta": "eta",
    "kappa": "kappa",
    "alpha": "alpha",
    "order": "order",
    "cutoff": "fock_cutoff",
    "tau_max": "tau_max",
    "tau_steps": "tau_steps",
    "initial": "initial",
    "outputs": "outputs",
    "workers": "workers",
}


@dataclass(frozen=True)
class RunConfig:
    lam: float = 0.1
    eta: float = 0.1
    kappa: float = 0.0
    alpha: float = 4.0
    order: int = 2
    fock_cutoff: int = 128
    tau_max: float = 10.0
    tau_steps: int = 1000
    initial: InitialStateSpec | None = None
    outputs: frozenset = field(default_factory=lambda: frozenset(OUTPUT_KINDS))
    workers: int = 4

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if self.fock_cutoff < 16:
            raise ValueError("cutoff must be >= 16")
        if self.tau_steps < 2:
            raise ValueError("tau_steps must be >= 2")
        if self.tau_max <= 0:
            raise ValueError("tau_max must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        unknown = set(self.outputs) - set(OUTPUT_KINDS)
        if unknown:
            raise ValueError(f"unknown outputs {sorted(unknown)}")
        object.__setattr__(self, "outputs", frozenset(self.outputs))

    @property
    def initial_state(self) -> InitialStateSpec:
        """Explicit initial state, or ``|i alpha>|e>`` when none was given."""
        return self.initial or InitialStateSpec("coherent_excited", alpha=self.alpha)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_text(self) -> str:
        lines = []
        for key, attr in _KEYS.items():
            value = getattr(self, attr)
            if attr == "outputs":
                value = ",".join(k for k in OUTPUT_KINDS if k in value)
            elif attr == "initial":
                value = str(self.initial_state)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _convert(attr: str, text: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[attr]
    if attr == "initial":
        return InitialStateSpec.parse(text)
    if attr == "outputs":
        return frozenset(s.strip() for s in text.split(",") if s.strip())
    if kind == "int":
        return int(text)
    return float(text)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into RunConfig keyword arguments."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string("[run]\n" + text)
    out = {}
    for key, value in parser["run"].items():
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ValueError(f"unknown config key {key!r}")
        out[_KEYS[key]] = _convert(_KEYS[key], value)
    return out


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    base = parse_config_text(Path(path).read_text()) if path else {}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**base)
