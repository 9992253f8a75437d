"""Experiment configuration: INI text with one section per module.

Every key has a typed default in :data:`SCHEMA`; ``topkfs --print-defaults``
prints them all. Unknown sections or keys are rejected, never ignored.
"""

from __future__ import annotations

import configparser
import io
import json
from dataclasses import dataclass

from .errors import ConfigError
from .linear import Hyperparams
from .mlp import TrainConfig
from .selection import MODEL_KINDS, SelectConfig, fingerprint

COMMANDS = ("select", "sweep-k", "stability", "simulate", "gradcheck", "approx-study")

_INTS = "ints"
_OPT_INT = "optional int"
_OPT_FLOAT = "optional float"

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[object, object]]] = {
    "experiment": {
        "command": (str, "select"),
        "seed": (int, 0),
        "model_kind": (str, "enet"),
        "workers": (int, 1),
    },
    "data": {
        "source": (str, "synthetic"),  # synthetic | csv | preset
        "path": (str, ""),
        "target": (str, "-1"),
        "task": (str, "regression"),
        "preset": (str, "sim-paper"),
        "n": (int, 200),
        "m": (int, 100),
        "n_informative": (int, 25),
        "noise_sd": (float, 5.0),
        "n_classes": (int, 2),
        "class_sep": (float, 1.5),
        "inject_noise": (bool, False),
        "noise_subset": (int, 20),
        "noise_mean_scale": (float, 0.1),
        "noise_sd_scale": (float, 0.01),
        "train_ratio": (float, 0.8),
        "standardize": (bool, True),
    },
    "linear": {
        "lambda_l1": (float, 1.0),
        "lambda_l2": (float, 1.0),
        "lambda_topk": (float, 1.0),
        "l2_squared": (bool, False),
        "max_iters": (int, 10_000),
        "tol": (float, 1e-8),
        "step": (_OPT_FLOAT, None),
        "backtracking": (bool, True),
    },
    "mlp": {
        "lambda_l1": (float, 1e-2),
        "lambda_l2": (float, 1e-2),
        "lambda_topk": (float, 1.0),
        "l2_squared": (bool, False),
        "epochs": (int, 300),
        "batch_size": (_OPT_INT, None),
        "optimizer": (str, "adam"),
        "rate": (float, 1e-3),
        "beta1": (float, 0.9),
        "beta2": (float, 0.999),
        "eps": (float, 1e-8),
        "hidden": (_INTS, (64, 32)),
        "hidden_l2": (float, 0.0),
    },
    "selection": {
        "k": (int, 10),
        "topk": (bool, True),
        "n_trees": (int, 100),
    },
    "sweep": {
        "k_values": (_INTS, (10, 20, 30, 40, 50)),
    },
    "stability": {
        "n_splits": (int, 10),
    },
    "approx": {
        "target": (str, "sinusoid"),  # sinusoid | constant | linear
        "m": (int, 20),
        "support": (_INTS, (2, 7)),
        "constant": (float, 0.5),
        "radius": (float, 3.141592653589793),
        "widths": (_INTS, (16, 64, 256)),
        "seeds": (_INTS, (0, 1, 2, 3, 4)),
        "grid_size": (int, 41),
        "n_train": (int, 1000),
        "epochs": (int, 1000),
        "rate": (float, 1e-2),
        "lambda_topk": (float, 1.0),
        "lambda_l1": (float, 1e-2),
        "hidden_l2": (float, 1e-3),
        "polish_epochs": (int, 2000),
        "polish_rate": (float, 1e-3),
        "margin": (float, 1.1),
    },
    "gradcheck": {
        "linear_m": (int, 3),
        "mlp_m": (int, 6),
        "tol_linear": (float, 1e-6),
        "tol_mlp": (float, 1e-4),
    },
}


def _parse(kind, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind in (_OPT_INT, _OPT_FLOAT):
            if raw.lower() in ("", "none", "auto"):
                return None
            return int(raw) if kind == _OPT_INT else float(raw)
        if kind == _INTS:
            if ":" in raw:  # start:stop:step, stop inclusive
                a, b, c = (int(p) for p in raw.split(":"))
                return tuple(range(a, b + 1, c))
            return tuple(int(p) for p in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None
    raise AssertionError(kind)


def _render(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentConfig:
    values: dict[str, dict[str, object]]

    @classmethod
    def defaults(cls) -> "ExperimentConfig":
        return cls({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})

    @classmethod
    def from_text(cls, text: str, overrides=()) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        cfg = cls.defaults()
        unknown = []
        for section in cp.sections():
            if section not in SCHEMA:
                unknown.append(f"[{section}]")
                continue
            for key, raw in cp.items(section):
                if key not in SCHEMA[section]:
                    unknown.append(f"{section}.{key}")
                    continue
                cfg.values[section][key] = _parse(SCHEMA[section][key][0], raw, f"{section}.{key}")
        for item in overrides:
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise ConfigError(f"override {item!r} must look like section.key=value")
            lhs, raw = item.split("=", 1)
            section, key = lhs.strip().split(".", 1)
            if section not in SCHEMA or key not in SCHEMA[section]:
                unknown.append(lhs.strip())
                continue
            cfg.values[section][key] = _parse(SCHEMA[section][key][0], raw, lhs.strip())
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(unknown))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides=()) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, overrides)

    def to_text(self) -> str:
        buf = io.StringIO()
        for section, keys in self.values.items():
            buf.write(f"[{section}]\n")
            for key, v in keys.items():
                buf.write(f"{key} = {_render(v)}\n")
            buf.write("\n")
        return buf.getvalue()

    def __getitem__(self, section):
        return self.values[section]

    @property
    def command(self) -> str:
        return self.values["experiment"]["command"]

    @property
    def seed(self) -> int:
        return self.values["experiment"]["seed"]

    def validate(self):
        e = self.values["experiment"]
        if e["command"] not in COMMANDS:
            raise ConfigError(f"experiment.command must be one of {COMMANDS}, got {e['command']!r}")
        if e["model_kind"] not in MODEL_KINDS:
            raise ConfigError(f"experiment.model_kind must be one of {MODEL_KINDS}, got {e['model_kind']!r}")
        d = self.values["data"]
        if d["source"] not in ("synthetic", "csv", "preset"):
            raise ConfigError(f"data.source must be synthetic, csv or preset, got {d['source']!r}")
        if d["source"] == "csv" and not d["path"]:
            raise ConfigError("data.path is required when data.source = csv")
        if d["task"] not in ("regression", "binary", "multiclass"):
            raise ConfigError(f"data.task must be regression, binary or multiclass, got {d['task']!r}")
        if self.values["approx"]["target"] not in ("sinusoid", "constant", "linear"):
            raise ConfigError("approx.target must be sinusoid, constant or linear")
        try:
            self.select_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def fingerprint(self) -> str:
        """Hash of every setting; the seed is included since outputs depend on it."""
        return fingerprint(json.loads(json.dumps(self.values, default=list)))

    def select_config(self, seed: int | None = None) -> SelectConfig:
        lin, net, sel, data = self["linear"], self["mlp"], self["selection"], self["data"]
        linear = Hyperparams(
            lambda_l2=lin["lambda_l2"], lambda_l1=lin["lambda_l1"], lambda_topk=lin["lambda_topk"],
            k=sel["k"], max_iters=lin["max_iters"], tol=lin["tol"], step=lin["step"],
            backtracking=lin["backtracking"], l2_squared=lin["l2_squared"])
        train = TrainConfig(
            h=Hyperparams(lambda_l2=net["lambda_l2"], lambda_l1=net["lambda_l1"],
                          lambda_topk=net["lambda_topk"], k=sel["k"], l2_squared=net["l2_squared"]),
            epochs=net["epochs"], batch_size=net["batch_size"], optimizer=net["optimizer"],
            rate=net["rate"], beta1=net["beta1"], beta2=net["beta2"], eps=net["eps"],
            hidden=tuple(net["hidden"]), hidden_l2=net["hidden_l2"])
        return SelectConfig(k=sel["k"], topk=sel["topk"], seed=self.seed if seed is None else seed,
                            standardize=data["standardize"], linear=linear, mlp=train,
                            n_trees=sel["n_trees"], train_ratio=data["train_ratio"])
