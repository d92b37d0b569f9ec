"""Flat ``key = value`` experiment configuration.

One assignment per line, ``#`` starts a comment, and repeating a key
appends to a list (list-valued keys also accept comma-separated values on
one line). Every value is validated before anything is computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .geometry import BoundaryProfile, ModelMetric
from .regions import SpectralParams

FIGURE_KINDS = ("l1-region", "lp-family", "envelope", "l1-both", "lp-both")


def _pair(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated numbers")
    return parts[0], parts[1]


def _complex(text: str) -> complex:
    return complex(text.replace(" ", "").replace("i", "j"))


# key -> (parser, is_list)
_SCHEMA = {
    "n": (int, False),
    "x1": (float, False),
    "c": (float, False),
    "alpha": (str, False),
    "compact_volume": (float, False),
    "alpha0": (float, False),
    "alpha1": (float, False),
    "alpha_sq": (_pair, True),
    "p": (float, True),
    "epsilon": (float, True),
    "L": (float, True),
    "A": (float, True),
    "s": (float, True),
    "smoothness": (int, False),
    "bump_order": (int, False),
    "c_pass": (float, False),
    "R": (float, True),
    "sl_epsilon": (float, False),
    "sl_gamma": (float, False),
    "sl_s": (float, False),
    "sl_t": (float, False),
    "u_max": (float, True),
    "du": (float, False),
    "ny": (int, False),
    "budget": (int, False),
    "probe_z": (_complex, True),
    "probe_p": (float, False),
    "probe_trials": (int, False),
    "figure": (str, True),
    "xrange": (_pair, False),
    "yrange": (_pair, False),
    "resolution": (int, False),
    "seed": (int, False),
}
_PAIR_LISTS = {"alpha_sq"}


@dataclass
class FigureSpec:
    kind: str
    xrange: tuple[float, float] | None = None
    yrange: tuple[float, float] | None = None
    resolution: int = 400

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ConfigError(f"unknown figure kind {self.kind!r}; expected one of {', '.join(FIGURE_KINDS)}")
        if self.resolution < 16:
            raise ConfigError("resolution must be >= 16")


@dataclass
class ExperimentConfig:
    n: int = 1
    x1: float = 1.0
    c: float = 0.0
    alpha: str = "constant:1"
    compact_volume: float = 0.0
    alpha0: float | None = None
    alpha1: float | None = None
    alpha_sq: list = field(default_factory=list)
    p: list = field(default_factory=lambda: [1.0])
    epsilon: list = field(default_factory=lambda: [0.1])
    L: list = field(default_factory=list)
    A: list = field(default_factory=list)
    s: list = field(default_factory=lambda: [0.0])
    smoothness: int = 2
    bump_order: int = 2
    c_pass: float = 3.0
    R: list = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0])
    sl_epsilon: float = 0.05
    sl_gamma: float | None = None
    sl_s: float = 1.0
    sl_t: float = 2.0
    u_max: list = field(default_factory=list)
    du: float = 0.05
    ny: int = 8
    budget: int = 2_000_000
    probe_z: list = field(default_factory=list)
    probe_p: float = 1.0
    probe_trials: int = 8
    figure: list = field(default_factory=list)
    xrange: tuple | None = None
    yrange: tuple | None = None
    resolution: int = 400
    seed: int = 0

    metric: ModelMetric = field(init=False, repr=False)
    params: SpectralParams = field(init=False, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(key, msg):
            raise ConfigError(f"key '{key}': {msg}")

        for p in self.p:
            if not 1.0 <= p <= 2.0:
                raise ConfigError("p must lie in [1,2]; use conjugateExponent for p>2")
        if self.n < 1:
            bad("n", "must be a positive integer")
        try:
            profile = BoundaryProfile.parse(self.n, self.alpha)
            self.metric = ModelMetric(profile, self.x1, self.c, self.compact_volume)
        except ValueError as exc:
            raise ConfigError(f"metric: {exc}") from exc
        a0 = profile.alpha0 if self.alpha0 is None else self.alpha0
        a1 = profile.alpha1 if self.alpha1 is None else self.alpha1
        try:
            ivs = tuple(self.alpha_sq) if self.alpha_sq else (
                profile.alpha_sq_intervals if self.alpha0 is None and self.alpha1 is None else ())
            self.params = SpectralParams(self.n, a0, a1, ivs, self.p[0] if self.p else 1.0)
        except ValueError as exc:
            raise ConfigError(f"region parameters: {exc}") from exc
        for e in self.epsilon:
            if not e > 0:
                bad("epsilon", "must be positive")
        for L in self.L:
            if not L > 0:
                bad("L", "must be positive")
        for A in self.A:
            if not A > 0:
                bad("A", "must be positive")
        if self.smoothness < 2:
            bad("smoothness", "must be >= 2")
        if self.bump_order < 1:
            bad("bump_order", "must be >= 1")
        if not self.c_pass > 0:
            bad("c_pass", "must be positive")
        if len(self.R) < 3:
            bad("R", "need at least 3 radii")
        if any(b <= a for a, b in zip(self.R, self.R[1:])) or self.R[0] <= 0:
            bad("R", "radii must be positive and strictly increasing")
        if not 0 <= self.sl_s <= self.sl_t:
            bad("sl_s", "need 0 <= sl_s <= sl_t")
        if not self.sl_epsilon > 0:
            bad("sl_epsilon", "must be positive")
        if self.sl_gamma is not None and self.sl_gamma < profile.alpha1 + self.sl_epsilon:
            bad("sl_gamma", "must be >= alpha1 + sl_epsilon")
        if any(u <= 0 for u in self.u_max):
            bad("u_max", "must be positive")
        if not self.du > 0:
            bad("du", "must be positive")
        if self.ny < 8:
            bad("ny", "must be >= 8")
        if not 1.0 <= self.probe_p <= 2.0:
            bad("probe_p", "must lie in [1,2]")
        if self.probe_trials < 1:
            bad("probe_trials", "must be >= 1")
        for kind in self.figure:
            FigureSpec(kind, self.xrange, self.yrange, self.resolution)
        if self.seed < 0:
            bad("seed", "must be non-negative")

    def figures(self) -> list[FigureSpec]:
        return [FigureSpec(k, self.xrange, self.yrange, self.resolution) for k in self.figure]

    def a_values(self) -> list[float]:
        if self.A:
            return list(self.A)
        return [self.metric.profile.alpha1**2]


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse configuration text; errors carry the line number and key."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}, line {lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value")
        key, _, val = (t.strip() for t in line.partition("="))
        if key not in _SCHEMA:
            raise ConfigError(f"{where}: unknown key '{key}'")
        conv, is_list = _SCHEMA[key]
        try:
            if is_list and key not in _PAIR_LISTS:
                items = [conv(v.strip().replace(" ", "")) for v in val.split(",") if v.strip()]
                if not items:
                    raise ValueError("empty value")
                values.setdefault(key, []).extend(items)
            elif is_list:
                values.setdefault(key, []).append(conv(val))
            else:
                if key in values:
                    raise ValueError("scalar key given twice")
                values[key] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"{where}: key '{key}': {exc}") from exc
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def config_keys() -> list[str]:
    return [f.name for f in fields(ExperimentConfig) if f.init]

