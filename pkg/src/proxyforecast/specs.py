"""Declarative forecaster descriptions and their construction."""

from __future__ import annotations

from dataclasses import dataclass, field

from .base import Forecaster
from .core import ConfigError, ProblemSpaces
from .estimators import PRESETS as ESTIMATOR_PRESETS
from .neural import NEURAL_KINDS, NEURAL_PRESETS
from .tabular import DirectForecaster, FactoredForecaster, OracleForecaster

TABULAR_KINDS = {"tabular-df": DirectForecaster, "tabular-ff": FactoredForecaster}
KINDS = (*TABULAR_KINDS, *NEURAL_KINDS, "oracle")

NEURAL_OVERRIDES = {
    "hidden": lambda v: tuple(int(h) for h in str(v).replace(" ", "").split("/") if h),
    "lr": float, "g_lr": float, "l2": float, "capacity": int, "min_fill": int,
    "batch_size": int, "steps_per_trigger": int, "trigger_every": int,
}


@dataclass(frozen=True)
class ForecasterSpec:
    """``kind`` plus its option: an estimator for tabular kinds, a preset (and
    optional overrides) for neural kinds."""

    kind: str
    estimator: str = "laplace"
    preset: str = "github"
    overrides: tuple[tuple[str, str], ...] = field(default_factory=tuple)
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown forecaster kind {self.kind!r}; expected one of {list(KINDS)}")
        if self.estimator not in ESTIMATOR_PRESETS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; expected laplace or kt")
        if self.preset not in NEURAL_PRESETS:
            raise ConfigError(f"unknown neural preset {self.preset!r}; expected one of {sorted(NEURAL_PRESETS)}")
        for key, _ in self.overrides:
            if key not in NEURAL_OVERRIDES:
                raise ConfigError(f"unknown neural override {key!r}")
        if self.name is not None and ("," in self.name or not self.name):
            raise ConfigError(f"bad forecaster name {self.name!r}")

    @classmethod
    def parse(cls, text: str) -> "ForecasterSpec":
        """``tabular-ff``, ``tabular-df:kt``, ``nn-rff:marketplace``, ``oracle``."""
        kind, _, option = text.strip().partition(":")
        if not option:
            return cls(kind)
        if kind in TABULAR_KINDS:
            return cls(kind, estimator=option)
        if kind in NEURAL_KINDS:
            return cls(kind, preset=option)
        raise ConfigError(f"forecaster {kind!r} takes no option (got {text!r})")

    @property
    def is_neural(self) -> bool:
        return self.kind in NEURAL_KINDS

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind in TABULAR_KINDS and self.estimator != "laplace":
            return f"{self.kind}:{self.estimator}"
        if self.is_neural and self.preset != "github":
            return f"{self.kind}:{self.preset}"
        return self.kind

    def neural_config(self):
        cfg = NEURAL_PRESETS[self.preset]
        if self.overrides:
            try:
                cfg = cfg.replace(**{k: NEURAL_OVERRIDES[k](v) for k, v in self.overrides})
            except ValueError as exc:
                raise ConfigError(f"{self.label}: {exc}")
        return cfg

    def validate(self, spaces: ProblemSpaces) -> None:
        if self.is_neural:
            self.neural_config()

    def build(self, spaces: ProblemSpaces, seed: int = 0, task=None) -> Forecaster:
        if self.kind in TABULAR_KINDS:
            return TABULAR_KINDS[self.kind](spaces, self.estimator)
        if self.kind == "oracle":
            if task is None:
                raise ConfigError("oracle forecaster needs a synthetic task")
            return OracleForecaster(task.H, task.G)
        return NEURAL_KINDS[self.kind](spaces, self.neural_config(), seed)


def parse_forecasters(text: str) -> list[ForecasterSpec]:
    specs = [ForecasterSpec.parse(part) for part in text.split(",") if part.strip()]
    if not specs:
        raise ConfigError("empty forecaster list")
    return specs
