"""Experiment configuration files.

The format is INI-like text: ``[section]`` headers, then ``key = value``
lines; ``#`` and ``;`` start comments. Every key is optional except
``[run] experiment``. Lists are comma separated; a numeric list may also be
written ``start:stop:step`` (inclusive of ``stop``) or ``logspace(a, b, k)``
for ``k`` points from ``10**a`` to ``10**b``.

The base seed always comes from ``[run] seed``; every sweep derives its cell
seeds from it.
"""
from __future__ import annotations

import configparser
import enum
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from reponlab.autoencoder.model import Mode, ModelConfig
from reponlab.autoencoder.train import Optimizer, TrainConfig
from reponlab.relations import RelationKind, RelationSpec, load_relation


class ConfigError(ValueError):
    """Bad configuration; the message names the offending ``section.key``."""


class Experiment(str, enum.Enum):
    STATICS_CURVE = "statics_curve"
    STATICS_ANALYTIC = "statics_analytic"
    REPON_PHASE_SPACE = "repon_phase_space"
    REPON_PROBABILITY = "repon_probability"
    TRAIN_ONCE = "train_once"
    FRACTION_SWEEP = "fraction_sweep"
    LR_PHASE_DIAGRAM = "lr_phase_diagram"
    WD_PHASE_DIAGRAM = "wd_phase_diagram"
    GOLDILOCKS = "goldilocks"


@dataclass(frozen=True)
class StaticsSettings:
    fractions: tuple = tuple(round(i * 0.05, 10) for i in range(21))
    trials: int | None = None
    sequences: int = 1000
    alpha: float = 0.9


@dataclass(frozen=True)
class ReponSettings:
    eta_A: float = 1.0
    eta_x: float = 1.0
    a2_min: float = -3.0
    a2_max: float = 3.0
    c_min: float = -3.0
    c_max: float = 3.0
    grid: int = 41
    sigma_a: float = 1.0
    sigma_c: float = 1.0
    ratios: tuple = tuple(float(x) for x in np.logspace(-2, 2, 17))
    samples: int = 100_000


@dataclass(frozen=True)
class SweepSettings:
    fractions: tuple = tuple(round(i * 0.05, 10) for i in range(1, 20))
    repeats: int = 3
    enc_lrs: tuple = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    dec_lrs: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    wds: tuple = (0.0, 1e-3, 1e-2, 1e-1, 1.0)
    wd_eta_enc: float = 1e-5
    replicates: int = 1
    depths: tuple = (0, 1, 2, 3, 5, 8)
    goldilocks_width: int = 10
    goldilocks_fraction: float = 0.3


@dataclass(frozen=True)
class FigureSettings:
    id: str | None = None
    relations: tuple = ()
    svg: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    relation: RelationSpec = field(default_factory=lambda: RelationSpec.modulo(3, 30))
    relation_file: str | None = None
    model: ModelConfig = field(default_factory=lambda: ModelConfig(30))
    train: TrainConfig = TrainConfig()
    statics: StaticsSettings = StaticsSettings()
    repon: ReponSettings = ReponSettings()
    sweep: SweepSettings = SweepSettings()
    figure: FigureSettings = FigureSettings()
    seed: int = 0
    out: str | None = None

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, seed=seed, train=replace(self.train, seed=seed))

    def with_relation(self, spec: RelationSpec) -> ExperimentConfig:
        return replace(self, relation=spec, relation_file=None, model=replace(self.model, n=spec.n))


# value parsers --------------------------------------------------------------

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none", "default") else int(text)


def _optional_str(text: str):
    t = text.strip()
    return None if t.lower() in ("", "none") else t


_LOGSPACE = re.compile(r"^logspace\(\s*([^,]+),\s*([^,]+),\s*([^)]+)\)$")


def _float_list(text: str) -> tuple:
    t = text.strip()
    m = _LOGSPACE.match(t)
    if m:
        return tuple(float(x) for x in np.logspace(float(m[1]), float(m[2]), int(m[3])))
    if ":" in t:
        parts = [float(p) for p in t.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(np.round(start + i * step, 12)) for i in range(count))
    return tuple(float(p) for p in t.split(",") if p.strip())


def _int_list(text: str) -> tuple:
    return tuple(int(p) for p in text.split(",") if p.strip())


def _str_list(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (tuple, list, frozenset)):
        items = sorted(value) if isinstance(value, frozenset) else value
        return ", ".join(_fmt(v) for v in items)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


# schema: section -> key -> parser
_SCHEMA = {
    "run": {"experiment": Experiment, "seed": int, "out": _optional_str},
    "relation": {"kind": RelationKind, "n": int, "k": _optional_int, "part": _int_list, "file": _optional_str},
    "model": {"embed_dim": int, "depth": int, "width": int, "mode": Mode},
    "train": {
        "eta_enc": float,
        "eta_dec": float,
        "weight_decay_dec": float,
        "max_steps": int,
        "train_fraction": float,
        "optimizer": str,
        "beta1": float,
        "beta2": float,
        "eps": float,
        "init_scale": float,
        "eval_interval": int,
        "early_stop": _bool,
        "dtype": str,
    },
    "statics": {"fractions": _float_list, "trials": _optional_int, "sequences": int, "alpha": float},
    "repon": {
        "eta_A": float,
        "eta_x": float,
        "a2_min": float,
        "a2_max": float,
        "c_min": float,
        "c_max": float,
        "grid": int,
        "sigma_a": float,
        "sigma_c": float,
        "ratios": _float_list,
        "samples": int,
    },
    "sweep": {
        "fractions": _float_list,
        "repeats": int,
        "enc_lrs": _float_list,
        "dec_lrs": _float_list,
        "wds": _float_list,
        "wd_eta_enc": float,
        "replicates": int,
        "depths": _int_list,
        "goldilocks_width": int,
        "goldilocks_fraction": float,
    },
    "figure": {"id": _optional_str, "relations": _str_list, "svg": _bool},
}


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return lineno
        elif key is not None and current == section:
            name = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            if name == key:
                return lineno
    return None


def _where(text, section, key=None) -> str:
    lineno = _line_of(text, section, key)
    return f" (line {lineno})" if lineno else ""


def parse_relation_shorthand(text: str, n: int) -> RelationSpec:
    """``modulo:K``, ``greater_than``, ``bipartite`` (first half vs rest) or ``bipartite:i-j``."""
    name, _, arg = text.partition(":")
    name = name.strip()
    if name == "modulo":
        return RelationSpec.modulo(int(arg or 3), n)
    if name == "greater_than":
        return RelationSpec.greater_than(n)
    if name == "bipartite":
        if arg:
            lo, _, hi = arg.partition("-")
            part = range(int(lo), int(hi or lo) + 1)
        else:
            part = range(n // 2)
        return RelationSpec.bipartite(part, n)
    raise ValueError(f"unknown relation shorthand {text!r}")


def parse_config(text: str, base_dir=".") -> ExperimentConfig:
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",), empty_lines_in_values=False
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: expected a [section] header before {exc.line.strip()!r}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate key {exc.section}.{exc.option}") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0]
        line = text.splitlines()[lineno - 1].strip()
        raise ConfigError(f"line {lineno}: cannot parse {line!r} (expected key = value)") from None

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]{_where(text, section)}")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}{_where(text, section, key)}")
            try:
                values[section][key] = _SCHEMA[section][key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{section}.{key}{_where(text, section, key)}: bad value {raw!r}: {exc}") from None

    run = values.get("run", {})
    if "experiment" not in run:
        raise ConfigError("missing required key run.experiment")
    return _build(values, text, Path(base_dir))


def _section_obj(cls, values: dict, section: str, text: str):
    try:
        return cls(**values.get(section, {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}]{_where(text, section)}: {exc}") from None


def _build(values: dict, text: str, base_dir: Path) -> ExperimentConfig:
    run = values["run"]
    seed = run.get("seed", 0)

    rel = values.get("relation", {})
    kind = rel.get("kind", RelationKind.MODULO)
    relation_file = rel.get("file")
    try:
        if kind is RelationKind.CUSTOM:
            if not relation_file:
                raise ValueError("custom relation needs relation.file")
            path = Path(relation_file)
            matrix = load_relation(path if path.is_absolute() else base_dir / path)
            spec = RelationSpec.custom(matrix.entries)
        else:
            n = rel.get("n", 30)
            if kind is RelationKind.MODULO:
                spec = RelationSpec.modulo(rel.get("k") or 3, n)
            elif kind is RelationKind.GREATER_THAN:
                spec = RelationSpec.greater_than(n)
            else:
                spec = RelationSpec.bipartite(rel.get("part") or range(n // 2), n)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"[relation]{_where(text, 'relation')}: {exc}") from None

    model = _section_obj(ModelConfig, {"model": {"n": spec.n, **values.get("model", {})}}, "model", text)

    tr = dict(values.get("train", {}))
    opt_keys = {k: tr.pop(k) for k in ("optimizer", "beta1", "beta2", "eps") if k in tr}
    opt_kind = opt_keys.pop("optimizer", "gd")
    optimizer = _section_obj(Optimizer, {"train": {"kind": opt_kind, **opt_keys}}, "train", text)
    train = _section_obj(TrainConfig, {"train": {**tr, "optimizer": optimizer, "seed": seed}}, "train", text)

    statics = _section_obj(StaticsSettings, values, "statics", text)
    repon = _section_obj(ReponSettings, values, "repon", text)
    sweep = _section_obj(SweepSettings, values, "sweep", text)
    figure = _section_obj(FigureSettings, values, "figure", text)
    _validate(statics, repon, sweep, spec, figure, text)
    return ExperimentConfig(
        run["experiment"], spec, relation_file, model, train, statics, repon, sweep, figure, seed, run.get("out")
    )


def _validate(statics, repon, sweep, spec, figure, text):
    def bad(section, msg):
        raise ConfigError(f"{section}{_where(text, section.split('.')[0], section.split('.')[-1])}: {msg}")

    if any(not 0 <= f <= 1 for f in statics.fractions):
        bad("statics.fractions", "fractions must lie in [0, 1]")
    if not 0 < statics.alpha < 1:
        bad("statics.alpha", "alpha must lie in (0, 1)")
    if statics.sequences < 1 or (statics.trials is not None and statics.trials < 1):
        bad("statics.trials", "trials and sequences must be positive")
    if repon.grid < 2 or repon.samples < 1:
        bad("repon.grid", "grid must be >= 2 and samples >= 1")
    if repon.sigma_a <= 0 or repon.sigma_c <= 0 or repon.eta_A < 0 or repon.eta_x < 0:
        bad("repon.sigma_a", "init widths must be positive and rates non-negative")
    if any(r <= 0 for r in repon.ratios):
        bad("repon.ratios", "ratios must be positive")
    if any(not 0 <= f <= 1 for f in sweep.fractions):
        bad("sweep.fractions", "fractions must lie in [0, 1]")
    if any(x <= 0 for x in sweep.enc_lrs + sweep.dec_lrs) or sweep.wd_eta_enc < 0:
        bad("sweep.enc_lrs", "learning rate grids must be positive")
    if any(w < 0 for w in sweep.wds):
        bad("sweep.wds", "weight decays must be >= 0")
    if any(d < 0 for d in sweep.depths):
        bad("sweep.depths", "depths must be >= 0")
    if sweep.repeats < 1 or sweep.replicates < 1 or sweep.goldilocks_width < 1:
        bad("sweep.repeats", "repeats, replicates and widths must be positive")
    if not 0 <= sweep.goldilocks_fraction <= 1:
        bad("sweep.goldilocks_fraction", "fraction must lie in [0, 1]")
    for rel in figure.relations:
        try:
            parse_relation_shorthand(rel, spec.n)
        except ValueError as exc:
            bad("figure.relations", str(exc))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config(text, path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def serialize_config(cfg: ExperimentConfig) -> str:
    """Text that :func:`parse_config` turns back into an equal config."""
    out = ["[run]", f"experiment = {cfg.experiment.value}", f"seed = {cfg.seed}"]
    if cfg.out is not None:
        out.append(f"out = {cfg.out}")
    rel = cfg.relation
    out += ["", "[relation]", f"kind = {rel.kind.value}"]
    if rel.kind is RelationKind.CUSTOM:
        out.append(f"file = {cfg.relation_file}")
    else:
        out.append(f"n = {rel.n}")
    if rel.kind is RelationKind.MODULO:
        out.append(f"k = {rel.k}")
    if rel.kind is RelationKind.BIPARTITE:
        out.append(f"part = {_fmt(rel.part)}")
    out += ["", "[model]"] + [f"{k} = {_fmt(getattr(cfg.model, k))}" for k in _SCHEMA["model"]]
    out += ["", "[train]"]
    for k in _SCHEMA["train"]:
        if k == "optimizer":
            v = cfg.train.optimizer.kind
        elif k in ("beta1", "beta2", "eps"):
            v = getattr(cfg.train.optimizer, k)
        else:
            v = getattr(cfg.train, k)
        out.append(f"{k} = {_fmt(v)}")
    for name in ("statics", "repon", "sweep", "figure"):
        obj = getattr(cfg, name)
        out += ["", f"[{name}]"] + [f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(obj)]
    return "\n".join(out) + "\n"
