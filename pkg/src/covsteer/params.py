from dataclasses import asdict, dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class DuvParams:
    """Size knobs of the MiniSRI crossbar model.

    M masters, S slaves, pipeline depth D per slave, per-beat wait cycles in
    [0, W] and burst lengths in [1, B].
    """

    M: int = 4
    S: int = 4
    D: int = 3
    W: int = 3
    B: int = 8

    def __post_init__(self):
        for name in ("M", "S", "D", "W", "B"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"DuvParams.{name} must be an integer >= 1, got {value!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"M", "S", "D", "W", "B"}
        if unknown:
            raise ConfigError(f"unknown DuvParams fields: {sorted(unknown)}")
        return cls(**d)
