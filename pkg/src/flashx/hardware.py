"""Accelerator resource descriptions and energy coefficients."""

import json
from dataclasses import asdict, dataclass, field

KB = 1024


class ConfigError(ValueError):
    """Raised for malformed hardware/energy configs; ``field`` names the culprit."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class EnergyTable:
    """Per-event energy coefficients.

    ``unit`` is ``"units"`` for relative coefficients or ``"pJ"`` when the
    numbers are absolute; only the latter is reported in mJ.
    """

    mac: float = 1.0
    s1_access: float = 1.0
    s2_access: float = 100.0
    noc_hop: float = 2.0
    unit: str = "units"

    def __post_init__(self):
        for name in ("mac", "s1_access", "s2_access", "noc_hop"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
                raise ConfigError(f"energy.{name}", f"must be a non-negative number, got {v!r}")
        if self.unit not in ("units", "pJ"):
            raise ConfigError("energy.unit", f"must be 'units' or 'pJ', got {self.unit!r}")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("energy", "must be an object")
        unknown = set(d) - {"mac", "s1_access", "s2_access", "noc_hop", "unit"}
        if unknown:
            raise ConfigError(f"energy.{sorted(unknown)[0]}", "unknown field")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


# Register-file-normalised ratios (MAC = RF access = 1, inter-PE hop = 2, global
# buffer = 6). Kept as a named preset; the default table weights S2 far more.
NORMALIZED_RF_ENERGY = EnergyTable(mac=1.0, s1_access=1.0, s2_access=6.0, noc_hop=2.0)


@dataclass(frozen=True)
class HardwareConfig:
    pe_count: int
    s1_bytes: int
    s2_bytes: int
    noc_bandwidth_bytes_per_cycle: float
    clock_hz: int = 1_000_000_000
    element_bytes: int = 1
    energy: EnergyTable = field(default_factory=EnergyTable)
    name: str = "custom"

    def __post_init__(self):
        for name in ("pe_count", "s1_bytes", "s2_bytes", "clock_hz", "element_bytes"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        bw = self.noc_bandwidth_bytes_per_cycle
        if not isinstance(bw, (int, float)) or isinstance(bw, bool) or not bw > 0:
            raise ConfigError("noc_bandwidth_bytes_per_cycle", f"must be positive, got {bw!r}")
        if self.s1_bytes % self.element_bytes:
            raise ConfigError("s1_bytes", "not a multiple of element_bytes")
        if self.s2_bytes % self.element_bytes:
            raise ConfigError("s2_bytes", "not a multiple of element_bytes")
        if self.s1_bytes < 3 * self.element_bytes:
            raise ConfigError("s1_bytes", "must hold at least one element of each operand")
        if not isinstance(self.energy, EnergyTable):
            raise ConfigError("energy", "must be an EnergyTable")

    @property
    def alpha_elems(self):
        return self.s1_bytes // self.element_bytes

    @property
    def beta_elems(self):
        return self.s2_bytes // self.element_bytes

    @property
    def peak_flops(self):
        return self.pe_count * self.clock_hz

    def replace(self, **changes):
        d = {**self.__dict__, **changes}
        return HardwareConfig(**d)

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "energy"}
        d["energy"] = self.energy.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("<root>", "hardware config must be an object")
        allowed = {
            "pe_count", "s1_bytes", "s2_bytes", "noc_bandwidth_bytes_per_cycle",
            "clock_hz", "element_bytes", "energy", "name",
        }
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        for req in ("pe_count", "s1_bytes", "s2_bytes", "noc_bandwidth_bytes_per_cycle"):
            if req not in d:
                raise ConfigError(req, "missing required field")
        kw = dict(d)
        kw["energy"] = EnergyTable.from_dict(d["energy"]) if "energy" in d else EnergyTable()
        return cls(**kw)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", str(exc)) from None
        return cls.from_dict(d)


def builtin_hardware(hw_id):
    """Edge and cloud configurations at 1 GHz (NoC bandwidth in bytes/cycle)."""
    key = hw_id.lower()
    if key == "edge":
        return HardwareConfig(
            pe_count=256, s1_bytes=512, s2_bytes=100 * KB,
            noc_bandwidth_bytes_per_cycle=32.0, name="edge",
        )
    if key == "cloud":
        return HardwareConfig(
            pe_count=2048, s1_bytes=512, s2_bytes=800 * KB,
            noc_bandwidth_bytes_per_cycle=256.0, name="cloud",
        )
    raise KeyError(f"unknown hardware id {hw_id!r}; expected 'edge' or 'cloud'")


# PE-array shapes of the original chips; the evaluation gives every style the
# same resources, so these are informational only.
ORIGINAL_ARRAY_SHAPES = {
    "eyeriss": (12, 14),
    "nvdla": (64, 8),
    "tpu": (128, 128),
    "shidiannao": (8, 8),
    "maeri": (256, 1),
}
