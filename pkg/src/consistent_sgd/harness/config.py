"""Experiment configuration: a flat ``key = value`` text format.

Blank lines and ``#`` comments are ignored; list values are comma
separated.  Parsing goes through :mod:`configparser` with an implicit
section header.  Every key is listed in :data:`SCHEMA_DOC` with its type, default
and meaning; unknown keys and malformed values are rejected with the key
named in the message.  The defaults reproduce the convex panel with the
consistent estimator; :data:`PRESETS` holds one config per figure panel.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from consistent_sgd.bounds import TheoremId
from consistent_sgd.estimators import MODES
from consistent_sgd.optimizer import RULES, TRACE_COLUMNS

PRESETS = ("fig1a", "fig1b", "fig1c", "fig1d")


@dataclass
class ExperimentConfig:
    # problem
    kind: str = "convex"
    n: int = 300
    p: float = 0.3
    d: int = 10
    d2: int = 5
    data_seed: int = 0
    region: str = "ball"
    # estimator
    estimator: str = "layered_consistent"
    n1: int | None = 30
    n2: int | None = 1
    n3: int | None = 1
    replacement: bool = False
    # step sizes
    rule: str = "inverse_lk"
    c: float = 0.05
    rho: float = 0.0
    delta: float = 0.0
    D_f: float | None = None
    G: float | None = None
    # run
    T: int = 3000
    seeds: list[int] = field(default_factory=lambda: [0])
    workers: int = 1
    iterate_stride: int = 0
    # outputs and verdicts
    output_dir: str = "out"
    bounds: list[str] = field(default_factory=list)
    bound_slack: float = 0.05
    rate_metric: str = "dist_sq"
    rate_target: float = -0.8
    rate_window: list[int] = field(default_factory=lambda: [100, 3000])
    plot: bool = True

    def validate(self) -> "ExperimentConfig":
        def bad(name, why):
            raise ValueError(f"invalid config field {name!r}: {why} (got {getattr(self, name)!r})")

        if self.kind not in ("convex", "nonconvex"):
            bad("kind", "must be convex or nonconvex")
        for name in ("n", "d", "d2", "T"):
            if getattr(self, name) < 1:
                bad(name, "must be >= 1")
        if not 0 <= self.p <= 1:
            bad("p", "must lie in [0, 1]")
        if self.data_seed < 0:
            bad("data_seed", "must be nonnegative")
        if self.region not in ("ball", "unconstrained"):
            bad("region", "must be ball or unconstrained")
        if self.estimator not in MODES:
            bad("estimator", f"must be one of {', '.join(MODES)}")
        for name in ("n1", "n2", "n3"):
            v = getattr(self, name)
            if v is not None and not 1 <= v <= self.n:
                bad(name, f"must lie in [1, n={self.n}]")
        if self.rule not in RULES:
            bad("rule", f"must be one of {', '.join(RULES)}")
        if not self.c > 0:
            bad("c", "must be positive")
        if self.rho < 0:
            bad("rho", "must be nonnegative")
        if not 0 <= self.delta < 1:
            bad("delta", "must lie in [0, 1)")
        if not self.seeds or any(s < 0 for s in self.seeds):
            bad("seeds", "need at least one nonnegative seed")
        if len(set(self.seeds)) != len(self.seeds):
            bad("seeds", "must be distinct")
        if self.workers < 1:
            bad("workers", "must be >= 1")
        if self.iterate_stride < 0:
            bad("iterate_stride", "must be >= 0")
        for b in self.bounds:
            try:
                TheoremId(b)
            except ValueError:
                bad("bounds", f"unknown theorem id {b!r}")
        if self.rate_metric and self.rate_metric not in TRACE_COLUMNS[2:7]:
            bad("rate_metric", f"must be one of {', '.join(TRACE_COLUMNS[2:7])} or empty")
        if len(self.rate_window) != 2 or not 1 <= self.rate_window[0] < self.rate_window[1] <= self.T:
            bad("rate_window", f"needs two values 1 <= lo < hi <= T={self.T}")
        if self.bound_slack < 0:
            bad("bound_slack", "must be nonnegative")
        return self

    def to_dict(self, include_output: bool = False) -> dict:
        out = dataclasses.asdict(self)
        if not include_output:
            out.pop("output_dir")
        return out

    def updated(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


SCHEMA_DOC = {
    "kind": "objective: convex (linear GCN) or nonconvex (one sigmoid hidden layer)",
    "n": "number of graph nodes",
    "p": "Erdos-Renyi edge probability",
    "d": "feature dimension",
    "d2": "hidden width (nonconvex only)",
    "data_seed": "seed for graph, features and planted optimum",
    "region": "ball (radius 100 d, or 100 (d+1) d2) or unconstrained",
    "estimator": "exact | minibatch_unbiased | layered_consistent",
    "n1": "input-layer sample count (empty = all nodes)",
    "n2": "output (convex) / middle (nonconvex) sample count",
    "n3": "output sample count (nonconvex)",
    "replacement": "sample index sets with replacement",
    "rule": "step rule: " + ", ".join(RULES),
    "c": "step constant (multiplier for inverse_lk, numerator for inverse_sqrt, value for constant)",
    "rho": "high-probability factor rho",
    "delta": "high-probability factor delta",
    "D_f": "nonconvex step constant; empty = computed per seed from f(w1) and L",
    "G": "gradient bound for the constant nonconvex rules",
    "T": "number of SGD updates",
    "seeds": "run seeds (initial iterate and estimator draws)",
    "workers": "parallel worker processes over seeds",
    "iterate_stride": "also keep every k-th iterate (0 = only k=1 and T)",
    "output_dir": "directory for traces, bounds, summary and plot",
    "bounds": "theorem ids to evaluate against the traces",
    "bound_slack": "relative slack for bound verdicts",
    "rate_metric": "metric for the log-log rate verdict (empty = none)",
    "rate_target": "pass iff fitted slope <= this",
    "rate_window": "fit window lo, hi",
    "plot": "write figure.svg",
}


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(ExperimentConfig)}


def _parse_value(name: str, raw: str, ftype: str):
    raw = raw.strip()
    try:
        if ftype.startswith("list[int]"):
            return [int(v) for v in raw.replace(" ", "").split(",") if v]
        if ftype.startswith("list[str]"):
            return [v.strip() for v in raw.split(",") if v.strip()]
        if "None" in ftype and raw.lower() in ("", "none", "null"):
            return None
        if ftype.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if ftype.startswith("int"):
            return int(raw)
        if ftype.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise ValueError(f"invalid config field {name!r}: cannot parse {raw!r} as {ftype}") from None


def apply_overrides(cfg: ExperimentConfig, pairs: dict[str, str]) -> ExperimentConfig:
    types = _field_types()
    changes = {}
    for key, raw in pairs.items():
        if key not in types:
            raise ValueError(f"unknown config field {key!r}")
        changes[key] = _parse_value(key, raw, types[key])
    return cfg.updated(**changes)


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None,
                                       empty_lines_in_values=False)
    parser.optionxform = str  # keep D_f, T
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ValueError(f"config line {lineno - 1}: expected key = value, got {line}") from None
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from None
    return apply_overrides(base or ExperimentConfig(), dict(parser["experiment"]))


def load_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("consistent_sgd.configs").joinpath(f"{name}.cfg").read_text()


def load_preset(name: str) -> ExperimentConfig:
    return parse_config_text(preset_text(name))


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, list):
            v = ", ".join(map(str, v))
        elif v is None:
            v = ""
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"# {SCHEMA_DOC[f.name]}\n{f.name} = {v}")
    return "\n".join(lines) + "\n"
