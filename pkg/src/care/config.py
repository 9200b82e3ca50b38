"""Model and training configuration, including the ablation switches."""

from dataclasses import asdict, dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass
class CareConfig:
    d_model: int = 64
    d_task: int = 64
    d_share: int = 64
    d_dist: int = 16
    distance_clamp_k: int = 10
    n_layers: int = 3
    kernel_size: int = 3
    use_distance: bool = True
    use_shared_in_classifier: bool = True
    use_coattention: bool = True
    encoder_provider: str = "toy"
    lr: float = 1e-3
    batch_size: int = 8
    epochs: int = 200
    seed: int = 0
    threshold: float = 0.5
    match_mode: str = "strict"

    def validate(self):
        for name in ("d_model", "d_task", "d_share"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        # d_dist = 0 is the distance-free degenerate case the ablation maps onto
        if self.d_dist < 0:
            raise ConfigError(f"d_dist must be >= 0, got {self.d_dist}")
        if self.distance_clamp_k < 1:
            raise ConfigError(f"distance_clamp_k must be positive, got {self.distance_clamp_k}")
        if self.n_layers not in (1, 2, 3, 4):
            raise ConfigError(f"n_layers must be in {{1, 2, 3, 4}}, got {self.n_layers}")
        if self.kernel_size not in (1, 3):
            raise ConfigError(f"kernel_size must be 1 or 3, got {self.kernel_size}")
        if not self.encoder_provider == "toy" and not self.encoder_provider.startswith("archive:"):
            raise ConfigError(
                f"encoder_provider must be 'toy' or 'archive:<path>', got {self.encoder_provider!r}"
            )
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.match_mode not in ("strict", "partial"):
            raise ConfigError(f"match_mode must be 'strict' or 'partial', got {self.match_mode!r}")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return CareConfig.from_dict(d)


def _coerce(name, raw, target_type):
    if target_type is bool:
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {name}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {raw!r} as {target_type.__name__}") from None


def read_config_file(path):
    """Parse a key=value config file into a dict of typed values."""
    types = {f.name: f.type for f in fields(CareConfig)}
    # dataclass fields carry the actual type objects here (no string annotations)
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, raw.strip(), types[key])
    return values
