"""TOML pipeline configuration: strict schema, defaults, fingerprinting.

Unknown keys are rejected (a typo must fail loudly, not silently fall back
to a default) and every missing required key is reported by its dotted
name. Relative paths resolve against the directory containing the config
file, so a corpus bundle can ship its own config.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .manifest import Condition
from .normalizer import NormalizationPolicy
from .scoring import CerSpaces
from .splitting import Rounding, SplitScheme


class DatasetKind:
    CHAT = "chat"
    WORDLIST = "wordlist"


@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    name: str
    paths: tuple[str, ...]
    audio_dir: str = "audio"
    speakers: tuple[str, ...] = ("PAR",)


@dataclass(frozen=True)
class SplitConfig:
    scheme: SplitScheme
    seed: int
    fraction: float = 0.10
    rounding: Rounding = Rounding.ROUND
    selection_base: str = "all"  # "all" | "filtered"; required for chat data
    si_valid_fraction: float = 0.10
    holdout_fraction: float = 0.10


@dataclass(frozen=True)
class ScoringConfig:
    custom_rules: Optional[str] = None
    cer_spaces: CerSpaces = CerSpaces.INCLUDE


@dataclass(frozen=True)
class MockConfig:
    enabled: bool = False
    seed: int = 0
    sub_rate: float = 0.0
    del_rate: float = 0.0
    ins_rate: float = 0.0
    offsets: tuple[tuple[str, float], ...] = ()

    def offset_for(self, condition: Condition) -> float:
        return dict(self.offsets).get(condition.value, 0.0)


@dataclass(frozen=True)
class PipelineConfig:
    dataset: DatasetConfig
    normalize: NormalizationPolicy
    filter_mode: str  # "si" | "none"
    split: SplitConfig
    scoring: ScoringConfig
    conditions: tuple[Condition, ...]
    evals: tuple[tuple[str, str], ...]  # (name, manifest path)
    mock: MockConfig
    output_dir: str
    median_base: str = "all"

    def fingerprint(self) -> str:
        payload = json.dumps(_config_dict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def _config_dict(config: PipelineConfig) -> dict:
    return {
        "dataset": {
            "kind": config.dataset.kind,
            "name": config.dataset.name,
            "paths": list(config.dataset.paths),
            "audio_dir": config.dataset.audio_dir,
            "speakers": list(config.dataset.speakers),
        },
        "normalize": config.normalize.to_dict(),
        "filter_mode": config.filter_mode,
        "split": {
            "scheme": config.split.scheme.value,
            "seed": config.split.seed,
            "fraction": config.split.fraction,
            "rounding": config.split.rounding.value,
            "selection_base": config.split.selection_base,
            "si_valid_fraction": config.split.si_valid_fraction,
            "holdout_fraction": config.split.holdout_fraction,
        },
        "scoring": {
            "custom_rules": config.scoring.custom_rules,
            "cer_spaces": config.scoring.cer_spaces.value,
        },
        "conditions": [c.value for c in config.conditions],
        "evals": [list(e) for e in config.evals],
        "mock": {
            "enabled": config.mock.enabled,
            "seed": config.mock.seed,
            "sub_rate": config.mock.sub_rate,
            "del_rate": config.mock.del_rate,
            "ins_rate": config.mock.ins_rate,
            "offsets": [list(o) for o in config.mock.offsets],
        },
        "output_dir": config.output_dir,
        "median_base": config.median_base,
    }


def _require(section: dict, key: str, prefix: str):
    if key not in section:
        raise ConfigError(f"missing required config key: {prefix}.{key}")
    return section[key]


def _check_unknown(section: dict, allowed: set[str], prefix: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key: {prefix}.{unknown[0]}")


def _enum(value, enum_cls, key: str):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{key} must be one of: {choices} (got {value!r})") from None


def _resolve(base: Path, path: str) -> str:
    candidate = Path(path)
    return str(candidate if candidate.is_absolute() else base / candidate)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse, validate and path-resolve a pipeline config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    base = path.resolve().parent
    _check_unknown(
        raw,
        {"dataset", "normalize", "filter", "split", "scoring", "conditions",
         "evals", "mock", "output", "report"},
        "config",
    )

    ds = raw.get("dataset", {})
    _check_unknown(ds, {"kind", "name", "paths", "audio_dir", "speakers"}, "dataset")
    kind = _require(ds, "kind", "dataset")
    if kind not in (DatasetKind.CHAT, DatasetKind.WORDLIST):
        raise ConfigError(f"dataset.kind must be 'chat' or 'wordlist' (got {kind!r})")
    paths = _require(ds, "paths", "dataset")
    if not isinstance(paths, list) or not paths:
        raise ConfigError("dataset.paths must be a non-empty list of path globs")
    dataset = DatasetConfig(
        kind=kind,
        name=_require(ds, "name", "dataset"),
        paths=tuple(_resolve(base, p) for p in paths),
        audio_dir=ds.get("audio_dir", "audio"),
        speakers=tuple(ds.get("speakers", ["PAR"])),
    )

    norm = raw.get("normalize", {})
    policy_fields = set(NormalizationPolicy().to_dict())
    _check_unknown(norm, policy_fields, "normalize")
    for key, value in norm.items():
        if not isinstance(value, bool):
            raise ConfigError(f"normalize.{key} must be a boolean")
    normalize = NormalizationPolicy(**norm)

    filt = raw.get("filter", {})
    _check_unknown(filt, {"mode"}, "filter")
    default_mode = "si" if kind == DatasetKind.CHAT else "none"
    filter_mode = filt.get("mode", default_mode)
    if filter_mode not in ("si", "none"):
        raise ConfigError(f"filter.mode must be 'si' or 'none' (got {filter_mode!r})")
    if kind == DatasetKind.WORDLIST and filter_mode != "none":
        raise ConfigError("filter.mode must be 'none' for word-list datasets")

    sp = raw.get("split", {})
    _check_unknown(
        sp,
        {"scheme", "seed", "fraction", "rounding", "selection_base",
         "si_valid_fraction", "holdout_fraction"},
        "split",
    )
    scheme = _enum(_require(sp, "scheme", "split"), SplitScheme, "split.scheme")
    if kind == DatasetKind.CHAT and "selection_base" not in sp:
        raise ConfigError(
            "missing required config key: split.selection_base "
            "(one of 'all', 'filtered'; conversational corpora must say which "
            "population the top-fraction selection ranks over)"
        )
    selection_base = sp.get("selection_base", "all")
    if selection_base not in ("all", "filtered"):
        raise ConfigError(
            f"split.selection_base must be 'all' or 'filtered' (got {selection_base!r})"
        )
    if kind == DatasetKind.WORDLIST and selection_base == "filtered":
        raise ConfigError("split.selection_base 'filtered' needs a filtered dataset")
    split = SplitConfig(
        scheme=scheme,
        seed=int(_require(sp, "seed", "split")),
        fraction=float(sp.get("fraction", 0.10)),
        rounding=_enum(sp.get("rounding", "round"), Rounding, "split.rounding"),
        selection_base=selection_base,
        si_valid_fraction=float(sp.get("si_valid_fraction", 0.10)),
        holdout_fraction=float(sp.get("holdout_fraction", 0.10)),
    )
    if not 0 < split.fraction <= 1:
        raise ConfigError("split.fraction must be in (0, 1]")

    sc = raw.get("scoring", {})
    _check_unknown(sc, {"custom_rules", "cer_spaces"}, "scoring")
    scoring = ScoringConfig(
        custom_rules=_resolve(base, sc["custom_rules"]) if "custom_rules" in sc else None,
        cer_spaces=_enum(sc.get("cer_spaces", "include"), CerSpaces, "scoring.cer_spaces"),
    )

    cond = raw.get("conditions", {})
    _check_unknown(cond, {"set"}, "conditions")
    condition_names = cond.get("set", [c.value for c in Condition])
    conditions = tuple(_enum(n, Condition, "conditions.set") for n in condition_names)
    if len(set(conditions)) != len(conditions):
        raise ConfigError("conditions.set contains duplicates")

    evals_raw = raw.get("evals", {})
    evals = tuple(
        (name, _resolve(base, p)) for name, p in sorted(evals_raw.items())
    )
    for name, _ in evals:
        if not name.replace("-", "").replace("_", "").isalnum():
            raise ConfigError(f"evals name {name!r} must be alphanumeric with - or _")

    mk = raw.get("mock", {})
    _check_unknown(
        mk, {"enabled", "seed", "sub_rate", "del_rate", "ins_rate", "offsets"}, "mock"
    )
    offsets_raw = mk.get("offsets", {})
    for key in offsets_raw:
        _enum(key, Condition, "mock.offsets")
    mock = MockConfig(
        enabled=bool(mk.get("enabled", False)),
        seed=int(mk.get("seed", 0)),
        sub_rate=float(mk.get("sub_rate", 0.0)),
        del_rate=float(mk.get("del_rate", 0.0)),
        ins_rate=float(mk.get("ins_rate", 0.0)),
        offsets=tuple(sorted((k, float(v)) for k, v in offsets_raw.items())),
    )

    out = raw.get("output", {})
    _check_unknown(out, {"dir"}, "output")
    output_dir = _resolve(base, _require(out, "dir", "output"))

    rep = raw.get("report", {})
    _check_unknown(rep, {"median_base"}, "report")
    median_base = rep.get("median_base", "all")
    if median_base not in ("all", "excl-ties"):
        raise ConfigError("report.median_base must be 'all' or 'excl-ties'")

    return PipelineConfig(
        dataset=dataset,
        normalize=normalize,
        filter_mode=filter_mode,
        split=split,
        scoring=scoring,
        conditions=conditions,
        evals=evals,
        mock=mock,
        output_dir=output_dir,
        median_base=median_base,
    )
