"""Model checkpoint plus a key=value architecture manifest beside it."""

from __future__ import annotations

from pathlib import Path

from ..errors import ConfigError, MissingPrerequisiteError
from ..tensor import checkpoint
from .model import PerceptConfig, PerceptionModel

ARCH_KEYS = ("K", "n_scales", "layers", "heads", "n_points", "resolution", "channels", "second_kernel",
             "use_mldm", "normalize_votes")


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def _format(v) -> str:
    return str(int(v)) if isinstance(v, bool) else str(v)


def save_model(model: PerceptionModel, path, stage: int) -> str:
    """Write weights and manifest; returns the archive checksum."""
    digest = checkpoint.save(path, model.reg.snapshot())
    fields = {k: model.config.manifest()[k] for k in ARCH_KEYS}
    fields.update(seed=model.config.seed, stage=stage, sha256=digest)
    manifest_path(path).write_text("".join(f"{k} = {_format(v)}\n" for k, v in fields.items()))
    return digest


def read_manifest(path) -> dict[str, str]:
    mpath = manifest_path(path)
    if not Path(path).exists() or not mpath.exists():
        raise MissingPrerequisiteError(f"missing checkpoint {path} (or its manifest)")
    out = {}
    for line in mpath.read_text().splitlines():
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def config_from_manifest(m: dict[str, str]) -> PerceptConfig:
    return PerceptConfig(
        K=int(m["K"]), n_scales=int(m["n_scales"]), layers=int(m["layers"]), heads=int(m["heads"]),
        n_points=int(m["n_points"]), resolution=int(m["resolution"]),
        channels=tuple(int(c) for c in m["channels"].split(",")), second_kernel=int(m["second_kernel"]),
        use_mldm=bool(int(m["use_mldm"])), normalize_votes=bool(int(m["normalize_votes"])), seed=int(m["seed"]))


def load_model(path, expect: PerceptConfig | None = None) -> tuple[PerceptionModel, int]:
    """Load a checkpoint; with ``expect``, refuse one whose architecture differs."""
    m = read_manifest(path)
    cfg = config_from_manifest(m)
    if expect is not None:
        want = expect.manifest()
        have = cfg.manifest()
        diff = [k for k in ARCH_KEYS if _format(want[k]) != _format(have[k])]
        if diff:
            raise ConfigError(f"checkpoint {path} architecture mismatch on {', '.join(diff)}")
    values = checkpoint.load(path)
    if values and m.get("sha256") and checkpoint.checksum(path) != m["sha256"]:
        raise ConfigError(f"checkpoint {path} does not match its manifest checksum")
    model = PerceptionModel(cfg)
    model.reg.load(values)
    return model, int(m["stage"])
