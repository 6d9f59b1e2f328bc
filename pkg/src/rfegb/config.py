"""Run configuration: ``key = value`` lines with dotted keys.

Every key has a default; unknown keys are rejected.  Blank lines and text
after ``#`` are ignored.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Iterable, Optional

from rfegb.baselines import DT_CONFIG, GNB_VAR_SMOOTHING, KNN_K, LDA_SHRINKAGE
from rfegb.boosting import GbmConfig
from rfegb.dataset import AGE_UNITS
from rfegb.selection import CRITERIA, MarginConfig, SelectionConfig
from rfegb.tree import TreeConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t

    return parse


def _delimiter(text: str) -> str:
    t = text.strip()
    named = {"semicolon": ";", "comma": ",", ";": ";", ",": ","}
    if t not in named:
        raise ValueError(f"delimiter must be ';' or ',', got {t!r}")
    return named[t]


def _counts(text: str) -> Optional[list[int]]:
    """``all``, a list like ``1,2,5`` or a range like ``1-11``."""
    t = text.strip().lower()
    if t == "all":
        return None
    out: list[int] = []
    for part in t.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("empty feature-count list")
    return sorted(set(out))


def _text(text: str) -> str:
    return text.strip()


_GBM = GbmConfig()
_MARGIN = MarginConfig()

# key -> (parser, default)
KEYS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "seed": (int, 42),
    "data.input": (_text, ""),
    "data.delimiter": (_delimiter, ";"),
    "data.age_unit": (_choice(*AGE_UNITS), "auto"),
    "data.plausibility_filter": (_bool, False),
    "output.dir": (_text, "out"),
    "split.train_fraction": (float, 0.7),
    "split.stratify": (_bool, True),
    "gbm.n_stages": (int, _GBM.n_stages),
    "gbm.learning_rate": (float, _GBM.learning_rate),
    "gbm.max_depth": (int, _GBM.tree.max_depth),
    "gbm.min_samples_split": (int, _GBM.tree.min_samples_split),
    "gbm.min_samples_leaf": (int, _GBM.tree.min_samples_leaf),
    "dt.max_depth": (int, DT_CONFIG.max_depth),
    "dt.min_samples_split": (int, DT_CONFIG.min_samples_split),
    "dt.min_samples_leaf": (int, DT_CONFIG.min_samples_leaf),
    "knn.k": (int, KNN_K),
    "lda.shrinkage": (float, LDA_SHRINKAGE),
    "nb.var_smoothing": (float, GNB_VAR_SMOOTHING),
    "margin.regularization": (float, _MARGIN.regularization),
    "margin.epochs": (int, _MARGIN.epochs),
    "margin.batch_size": (int, _MARGIN.batch_size),
    "margin.initial_step": (float, _MARGIN.initial_step),
    "rfe.criterion": (_choice(*CRITERIA), "gb-importance"),
    "rfe.step": (int, 1),
    "rfe.counts": (_counts, None),
    "rfe.folds": (int, 10),
    "train.select_features": (_bool, False),
    "metrics.error_mode": (_choice("label", "proba"), "label"),
    "compare.baselines_use_selected": (_bool, False),
}


def _render(value: Any) -> str:
    if value is None:
        return "all"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


class RunConfig:
    def __init__(self, values: Optional[dict[str, Any]] = None):
        self.values = {k: default for k, (_, default) in KEYS.items()}
        if values:
            for k, v in values.items():
                if k not in KEYS:
                    raise ConfigError(f"unknown config key {k!r}")
                self.values[k] = v

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def set(self, key: str, raw: str) -> None:
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        parser = KEYS[key][0]
        try:
            self.values[key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    def apply_lines(self, lines: Iterable[str], source: str = "<config>") -> None:
        for n, line in enumerate(lines, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{source}:{n}: expected 'key = value'")
            key, raw = text.split("=", 1)
            try:
                self.set(key, raw)
            except ConfigError as exc:
                raise ConfigError(f"{source}:{n}: {exc}") from None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        cfg = cls()
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        cfg.apply_lines(text.splitlines(), str(p))
        return cfg

    def echo(self) -> str:
        return "\n".join(f"{k} = {_render(v)}" for k, v in sorted(self.values.items()))

    def as_dict(self) -> dict[str, str]:
        return {k: _render(v) for k, v in sorted(self.values.items())}

    # typed views, validated on access

    def _build(self, what: str, fn):
        try:
            return fn()
        except ValueError as exc:
            raise ConfigError(f"{what}: {exc}") from None

    def gbm(self) -> GbmConfig:
        v = self.values
        return self._build("gbm", lambda: GbmConfig(
            n_stages=v["gbm.n_stages"],
            learning_rate=v["gbm.learning_rate"],
            tree=TreeConfig(v["gbm.max_depth"], v["gbm.min_samples_split"], v["gbm.min_samples_leaf"]),
            seed=v["seed"],
        ))

    def dt(self) -> TreeConfig:
        v = self.values
        return self._build("dt", lambda: TreeConfig(
            v["dt.max_depth"], v["dt.min_samples_split"], v["dt.min_samples_leaf"]))

    def margin(self) -> MarginConfig:
        v = self.values
        return self._build("margin", lambda: MarginConfig(
            regularization=v["margin.regularization"],
            epochs=v["margin.epochs"],
            batch_size=v["margin.batch_size"],
            initial_step=v["margin.initial_step"],
            seed=v["seed"],
        ))

    def selection(self) -> SelectionConfig:
        return SelectionConfig(self.values["rfe.criterion"], self.gbm(), self.margin())

    def validate(self) -> "RunConfig":
        v = self.values
        self.gbm()
        self.dt()
        self.margin()
        if not 0.0 < v["split.train_fraction"] < 1.0:
            raise ConfigError("split.train_fraction out of range (0, 1)")
        if v["knn.k"] < 1:
            raise ConfigError("knn.k must be >= 1")
        if v["lda.shrinkage"] < 0:
            raise ConfigError("lda.shrinkage must be >= 0")
        if v["nb.var_smoothing"] <= 0:
            raise ConfigError("nb.var_smoothing must be > 0")
        if v["rfe.step"] < 1:
            raise ConfigError("rfe.step must be >= 1")
        if v["rfe.folds"] < 2:
            raise ConfigError("rfe.folds must be >= 2")
        return self
