"""Experiment configuration: an INI file with fixed sections.

::

    [model]
    id = kuramoto
    kappa = 1.0
    frequencies = -0.5, 0.5

    [sweep]
    n = 128, 512, 2048
    p_rule = power        ; p(n) = c * n^(-gamma)
    c = 1.0
    gamma = 0.5
    ; p_rule = list with p = 0.1, 0.05 (one per n, or one n and several p)
    replicates = 8

    [run]
    T = 1.0
    dt = 0.001

    [seed]
    master = 0

Remaining sections ([distances], [norms], [mckv], [approx], [output]) have
defaults for every key.  Per-run seeds are
``SeedSequence(master, spawn_key=(n, replicate))``; see ``rng.run_seed``.
"""

import configparser
import re
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .model import get_model

SECTIONS = ("model", "sweep", "run", "distances", "norms", "mckv", "approx", "output", "seed")


class ConfigError(ValueError):
    """Invalid configuration; the message carries the source line when known."""


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt_float(x):
    return repr(float(x))


def _fmt_tuple(xs):
    return ", ".join(repr(x) for x in xs)


@dataclass
class SweepConfig:
    n: tuple = (128, 512)
    p_rule: str = "power"
    c: float = 1.0
    gamma: float = 0.5
    p: tuple = ()
    replicates: int = 2


@dataclass
class RunConfig:
    T: float = 1.0
    dt: float = 1e-3
    noise_scale: float = 1.0


@dataclass
class DistanceConfig:
    dbl_dictionary: int = 1000
    dbl_time_points: int = 8
    norm_restarts: int = 32


@dataclass
class NormConfig:
    bench_matrices: int = 200
    bench_max_n: int = 12
    bennett_n: int = 16
    bennett_p: tuple = (0.3, 0.6, 0.9)
    bennett_replicates: int = 500
    bennett_eta: tuple = tuple(np.round(np.arange(0.1, 4.001, 0.1), 2).tolist())


@dataclass
class McKVConfig:
    grid_points: int = 256
    media_atoms: int = 1
    T: float = 1.0
    dt_pde: float = 0.0
    checkpoints: tuple = (0.5, 1.0)
    n: int = 0


@dataclass
class ApproxConfig:
    epsilon: tuple = (0.1, 0.01)
    R: tuple = (8.0, 16.0, 32.0)
    n: int = 256


@dataclass
class OutputConfig:
    dir: str = "out"
    emit_plot_data: bool = False
    save_trajectories: bool = False


@dataclass
class ExperimentConfig:
    model_id: str = "kuramoto"
    model_params: dict = field(default_factory=lambda: {"kappa": 1.0})
    sweep: SweepConfig = field(default_factory=SweepConfig)
    run: RunConfig = field(default_factory=RunConfig)
    distances: DistanceConfig = field(default_factory=DistanceConfig)
    norms: NormConfig = field(default_factory=NormConfig)
    mckv: McKVConfig = field(default_factory=McKVConfig)
    approx: ApproxConfig = field(default_factory=ApproxConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def build_model(self):
        return get_model(self.model_id, **self.model_params)

    def schedule(self):
        """List of ``(n, p)`` pairs for the sweep."""
        s = self.sweep
        if s.p_rule == "power":
            return [(n, float(s.c * n ** (-s.gamma))) for n in s.n]
        if len(s.n) == 1:
            return [(s.n[0], float(p)) for p in s.p]
        return [(n, float(p)) for n, p in zip(s.n, s.p)]

    def to_ini(self):
        lines = ["[model]", f"id = {self.model_id}"]
        for k in sorted(self.model_params):
            v = self.model_params[k]
            lines.append(f"{k} = {_fmt_tuple(v) if isinstance(v, tuple) else repr(v)}")
        for section in ("sweep", "run", "distances", "norms", "mckv", "approx", "output"):
            lines += ["", f"[{section}]"]
            for name, value in asdict(getattr(self, section)).items():
                if isinstance(value, tuple):
                    text = _fmt_tuple(value)
                elif isinstance(value, bool):
                    text = "true" if value else "false"
                elif isinstance(value, float):
                    text = _fmt_float(value)
                else:
                    text = str(value)
                lines.append(f"{name} = {text}")
        lines += ["", "[seed]", f"master = {self.seed}", ""]
        return "\n".join(lines)


_SECTION_TYPES = {
    "sweep": SweepConfig, "run": RunConfig, "distances": DistanceConfig, "norms": NormConfig,
    "mckv": McKVConfig, "approx": ApproxConfig, "output": OutputConfig,
}


def _line_index(text):
    """Maps ``(section, key)`` to 1-based source line numbers."""
    index, section = {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            index[(section, None)] = lineno
            continue
        m = re.match(r"([^=:;#\s][^=:]*?)\s*[=:]", line)
        if m and section:
            index[(section, m.group(1).strip().lower())] = lineno
    return index


def _coerce(cls, name, text):
    ftype = {f.name: f for f in fields(cls)}[name]
    default = ftype.default
    if isinstance(default, bool):
        return _bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        if name == "n" and cls is SweepConfig:
            return _ints(text)
        return _floats(text)
    return text.strip()


def _model_value(text):
    parts = text.replace(",", " ").split()
    try:
        vals = [float(v) for v in parts]
    except ValueError:
        return text.strip()
    if len(vals) == 1 and "," not in text:
        return vals[0]
    return tuple(vals)


def parse_config(text, source="<config>", validate=True):
    lines = _line_index(text)

    def where(section, key=None):
        ln = lines.get((section, key)) or lines.get((section, None))
        return f"{source}:{ln}" if ln else source

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{where(section)}: unknown section [{section}]")
    cfg = ExperimentConfig()
    if parser.has_section("model"):
        items = dict(parser.items("model"))
        if "id" not in items:
            raise ConfigError(f"{where('model')}: [model] needs an id")
        cfg.model_id = items.pop("id").strip()
        cfg.model_params = {k: _model_value(v) for k, v in items.items()}
    for section, cls in _SECTION_TYPES.items():
        if not parser.has_section(section):
            continue
        known = {f.name.lower(): f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"{where(section, key)}: unknown key {key!r} in [{section}]")
            try:
                values[known[key]] = _coerce(cls, known[key], raw)
            except ValueError as exc:
                raise ConfigError(f"{where(section, key)}: [{section}] {key}: {exc}") from exc
        setattr(cfg, section, cls(**{**asdict(cls()), **values}))
    if parser.has_section("seed"):
        for key, raw in parser.items("seed"):
            if key != "master":
                raise ConfigError(f"{where('seed', key)}: unknown key {key!r} in [seed]")
            try:
                cfg.seed = int(raw)
            except ValueError as exc:
                raise ConfigError(f"{where('seed', key)}: [seed] master: {exc}") from exc
            if not 0 <= cfg.seed < 2**64:
                raise ConfigError(f"{where('seed', key)}: [seed] master must be an unsigned 64-bit integer")
    if validate:
        validate_config(cfg, where)
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def validate_config(cfg, where=lambda s, k=None: "<config>"):
    s = cfg.sweep
    if not s.n or any(n < 1 for n in s.n):
        raise ConfigError(f"{where('sweep', 'n')}: [sweep] n must list positive integers")
    if s.p_rule not in ("power", "list"):
        raise ConfigError(f"{where('sweep', 'p_rule')}: [sweep] p_rule must be 'power' or 'list'")
    if s.p_rule == "list" and not (len(s.p) == len(s.n) or (len(s.n) == 1 and s.p)):
        raise ConfigError(f"{where('sweep', 'p')}: [sweep] p must have one value per n (or several for a single n)")
    if s.replicates < 1:
        raise ConfigError(f"{where('sweep', 'replicates')}: [sweep] replicates must be >= 1")
    if cfg.run.T <= 0 or cfg.run.dt <= 0:
        raise ConfigError(f"{where('run')}: [run] T and dt must be positive")
    steps = cfg.run.T / cfg.run.dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"{where('run', 'dt')}: [run] T must be an integer multiple of dt")
    try:
        model = cfg.build_model()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where('model')}: [model] {exc}") from exc
    for n, p in cfg.schedule():
        if not 0 < p <= 1:
            raise ConfigError(f"{where('sweep')}: p(n={n}) = {p:.6g} is outside (0, 1]")
        if p * model.sup_W > 1:
            raise ConfigError(f"{where('sweep')}: p(n={n}) * sup W = {p * model.sup_W:.6g} exceeds 1")
    if any(e <= 0 or e > 1 for e in cfg.approx.epsilon):
        raise ConfigError(f"{where('approx', 'epsilon')}: [approx] epsilon values must lie in (0, 1]")
    if any(r <= 0 for r in cfg.approx.R):
        raise ConfigError(f"{where('approx', 'r')}: [approx] R values must be positive")
    return cfg
