"""Flat `key = value` experiment configuration with strict schema validation."""

from __future__ import annotations

from .synthdata import ModalitySpec, SyntheticSpec
from .trainer import TrainConfig


class ConfigError(Exception):
    pass


# kind: int | float | bool | str | floatlist | strlist | choice(tuple)
_TRAIN_SCHEMA = {
    "epochs": ("int", "60"),
    "stage1_fraction": ("float", "0.5"),
    "batch_size": ("int", "128"),
    "lr": ("float", "0.03"),
    "optimizer": (("sgd", "adam"), "sgd"),
    "momentum": ("float", "0.9"),
    "weight_decay": ("float", "0.0"),
    "est_lr": ("float", "0.003"),
    "seed": ("int", "0"),
    "strategy": (("static", "pe", "udml"), "udml"),
    "nue_off": ("bool", "false"),
    "mc_off": ("bool", "false"),
    "pos_off": ("bool", "false"),
    "noise_levels": ("floatlist", "0,0.5,1,1.5,2,2.5,3,3.5,4,4.5,5,6,7,8,9,10,11,12"),
    "alpha_mode": (("ema", "eval_pass"), "ema"),
    "alpha_decay": ("float", "0.99"),
    "est_grad_scope": (("estimator_only",), "estimator_only"),
    "est_input_mode": (("variance", "raw"), "variance"),
    "eval_sample": ("bool", "false"),
    "stage2_dynamic_task": ("bool", "false"),
    "stage2_noisy_task": ("bool", "false"),
    "embed_dim": ("int", "32"),
    "hidden_dim": ("int", "128"),
    "plateau_patience": ("int", "5"),
}

_DATA_SCHEMA = {
    "num_classes": ("int", "6"),
    "num_modalities": ("int", "2"),
    "n_train": ("int", "6000"),
    "n_val": ("int", "1000"),
    "n_test": ("int", "2000"),
    "data_seed": ("int", "0"),
}

_HARNESS_SCHEMA = {
    "data_dir": ("str", ""),
    "run_dir": ("str", ""),
    "sweep_modality": ("int", "2"),
    "sweep_sigmas": ("floatlist", "0,1,2,3,4,5,6,7,8,9,10,11,12"),
    "compare_kinds": ("strlist", "salt,gaussian"),
    "compare_epsilons": ("floatlist", "5,10"),
    "compare_fraction": ("float", "0.5"),
}

# Defaults for the built-in asymmetric benchmark: modality 1 easy, the rest hard.
_MODALITY_DEFAULTS = {
    "feat_dim": ("int", "20"),
    "separation": ("float", None),  # 8.0 for m1, 2.0 otherwise
    "warp": (("none", "nonlinear"), None),  # none for m1, nonlinear otherwise
    "intra_class_std": ("float", "1.0"),
}


def _schema(num_modalities: int) -> dict:
    schema = {}
    schema.update(_TRAIN_SCHEMA)
    schema.update(_DATA_SCHEMA)
    schema.update(_HARNESS_SCHEMA)
    for i in range(1, num_modalities + 1):
        for name, (kind, default) in _MODALITY_DEFAULTS.items():
            if default is None:
                if name == "separation":
                    default = "3.0" if i == 1 else "2.0"
                else:
                    default = "none" if i == 1 else "nonlinear"
            schema[f"m{i}_{name}"] = (kind, default)
    return schema


def _canonicalize(key: str, kind, raw: str) -> str:
    raw = raw.strip()
    try:
        if kind == "int":
            return str(int(raw))
        if kind == "float":
            return repr(float(raw))
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return "true"
            if raw.lower() in ("false", "0", "no"):
                return "false"
            raise ValueError(raw)
        if kind == "str":
            return raw
        if kind == "floatlist":
            if not raw:
                return ""
            return ",".join(repr(float(v)) for v in raw.split(","))
        if kind == "strlist":
            return ",".join(v.strip() for v in raw.split(",") if v.strip())
        if isinstance(kind, tuple):
            if raw not in kind:
                raise ValueError(raw)
            return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: invalid value {raw!r}") from None
    raise ConfigError(f"config key {key!r}: unknown kind")  # pragma: no cover


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = body.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def parse_set_overrides(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def effective_config(file_values: dict[str, str] | None = None,
                     overrides: dict[str, str] | None = None,
                     seed: int | None = None) -> dict[str, str]:
    """Merge defaults < file < overrides < --seed into a canonical config."""
    file_values = file_values or {}
    overrides = overrides or {}
    merged_raw = dict(file_values)
    merged_raw.update(overrides)

    m_raw = merged_raw.get("num_modalities", _DATA_SCHEMA["num_modalities"][1])
    try:
        num_modalities = int(m_raw)
    except ValueError:
        raise ConfigError(f"config key 'num_modalities': invalid value {m_raw!r}") from None
    if num_modalities < 1:
        raise ConfigError("config key 'num_modalities': must be >= 1")

    schema = _schema(num_modalities)
    for key in merged_raw:
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r}")

    cfg = {key: _canonicalize(key, kind, default)
           for key, (kind, default) in schema.items()}
    for key, raw in merged_raw.items():
        cfg[key] = _canonicalize(key, schema[key][0], raw)
    if seed is not None:
        cfg["seed"] = str(int(seed))
    return cfg


def format_config(cfg: dict[str, str]) -> str:
    return "".join(f"{key} = {cfg[key]}\n" for key in sorted(cfg))


def load_config(path: str | None, set_pairs: list[str] | None = None,
                seed: int | None = None) -> dict[str, str]:
    file_values = None
    if path is not None:
        with open(path) as f:
            file_values = parse_config_text(f.read(), source=str(path))
    return effective_config(file_values, parse_set_overrides(set_pairs or []), seed)


def _floatlist(cfg: dict[str, str], key: str) -> tuple[float, ...]:
    raw = cfg[key]
    return tuple(float(v) for v in raw.split(",")) if raw else ()


def train_config_from(cfg: dict[str, str]) -> TrainConfig:
    tc = TrainConfig(
        epochs=int(cfg["epochs"]),
        stage1_fraction=float(cfg["stage1_fraction"]),
        batch_size=int(cfg["batch_size"]),
        lr=float(cfg["lr"]),
        optimizer=cfg["optimizer"],
        momentum=float(cfg["momentum"]),
        weight_decay=float(cfg["weight_decay"]),
        est_lr=float(cfg["est_lr"]),
        seed=int(cfg["seed"]),
        strategy=cfg["strategy"],
        nue_off=cfg["nue_off"] == "true",
        mc_off=cfg["mc_off"] == "true",
        pos_off=cfg["pos_off"] == "true",
        noise_levels=_floatlist(cfg, "noise_levels"),
        alpha_mode=cfg["alpha_mode"],
        alpha_decay=float(cfg["alpha_decay"]),
        est_grad_scope=cfg["est_grad_scope"],
        est_input_mode=cfg["est_input_mode"],
        eval_sample=cfg["eval_sample"] == "true",
        stage2_dynamic_task=cfg["stage2_dynamic_task"] == "true",
        stage2_noisy_task=cfg["stage2_noisy_task"] == "true",
        embed_dim=int(cfg["embed_dim"]),
        hidden_dim=int(cfg["hidden_dim"]),
        plateau_patience=int(cfg["plateau_patience"]),
    )
    try:
        tc.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return tc


def synth_spec_from(cfg: dict[str, str]) -> SyntheticSpec:
    num_modalities = int(cfg["num_modalities"])
    try:
        modalities = [
            ModalitySpec(
                feat_dim=int(cfg[f"m{i}_feat_dim"]),
                separation=float(cfg[f"m{i}_separation"]),
                warp=cfg[f"m{i}_warp"],
                intra_class_std=float(cfg[f"m{i}_intra_class_std"]),
            )
            for i in range(1, num_modalities + 1)
        ]
        return SyntheticSpec(
            num_classes=int(cfg["num_classes"]),
            modalities=modalities,
            n_train=int(cfg["n_train"]),
            n_val=int(cfg["n_val"]),
            n_test=int(cfg["n_test"]),
            seed=int(cfg["data_seed"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
