"""World description: geometry, access points, candidate grid, users, dynamics.

Scenarios are immutable after loading; per-run mutable state (user positions,
demands) lives in plain arrays owned by whoever steps the simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

import numpy as np
import yaml

from .channel import ChannelParams
from .kernels import BAND_MMWAVE, BAND_SUB6, KIND_MAP, KIND_MBS

PRESET_NAMES = ("smallscale", "mediumscale")


class ScenarioError(ValueError):
    """Configuration rejected, with the offending field path in the message."""


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class GridLocation:
    id: int
    position: Vec3
    owner_eligible: bool = True


@dataclass(frozen=True)
class AccessPointConfig:
    """One radio head.  Id 0 is reserved for the fixed MBS."""

    id: int
    kind: int  # KIND_MBS or KIND_MAP
    band: int  # BAND_SUB6 or BAND_MMWAVE
    carrier_ghz: float
    tx_power_dbm: float
    bandwidth_hz: float
    antenna_gain_max_dbi: float
    antenna_gain_min_dbi: float
    beamwidth_deg: float
    aperture_deg: float
    capacity: int
    position: Vec3 | None = None  # fixed position (MBS only)


@dataclass
class UserState:
    id: int
    position: Vec3
    demand_bps: float
    qos_target: float


@dataclass(frozen=True)
class MobilityModel:
    kind: str = "RandomWalk"
    step_length_m: float = 1.0


@dataclass(frozen=True)
class TrafficModel:
    kind: str = "Poisson"
    mean_demand_bps: float = 200e6


@dataclass(frozen=True)
class CostModel:
    energy_unit_cost: float = 0.001  # cost per joule
    energy_per_meter_j: float = 20.0  # joules per meter travelled
    rent_cost: float = 1.0
    max_per_map_cost: float = math.inf


@dataclass(frozen=True)
class Scenario:
    name: str
    area_m: tuple[float, float]
    aps: tuple[AccessPointConfig, ...]
    grid: tuple[GridLocation, ...]
    num_users: int
    qos_target: float
    horizon: int
    rng_seed: int
    mobility: MobilityModel
    traffic: TrafficModel
    channel: ChannelParams
    cost: CostModel = field(default_factory=CostModel)

    @property
    def mbs(self) -> AccessPointConfig:
        return self.aps[0]

    @property
    def maps(self) -> tuple[AccessPointConfig, ...]:
        return self.aps[1:]

    @property
    def k_max(self) -> int:
        return len(self.aps) - 1

    def grid_positions(self):
        return np.array([g.position.as_array() for g in self.grid])

    def staging_point(self):
        """Undeployed MAPs wait on the ground next to the MBS."""
        return np.array([self.mbs.position.x, self.mbs.position.y, 0.0])

    def with_users(self, num_users: int) -> "Scenario":
        return replace(self, num_users=num_users)

    def with_map_count(self, count: int) -> "Scenario":
        """Resize the MAP fleet (clones the template MAP config)."""
        if count < 0:
            raise ScenarioError("maps.count: must be >= 0")
        template = self.aps[1] if len(self.aps) > 1 else None
        if count > 0 and template is None:
            raise ScenarioError("maps.count: scenario has no MAP template to clone")
        maps = tuple(replace(template, id=i + 1) for i in range(count))
        return replace(self, aps=(self.aps[0],) + maps)


# ---------------------------------------------------------------------------
# Geometry

def elevation_angle(ue: Vec3, ap: Vec3) -> float:
    """Elevation of the AP as seen from the UE, degrees in (0, 90].

    An AP directly overhead (zero horizontal offset) is 90 degrees.
    """
    if ap.z <= ue.z:
        raise ValueError("elevation_angle requires ap.z > ue.z")
    horiz = math.hypot(ap.x - ue.x, ap.y - ue.y)
    return math.degrees(math.atan2(ap.z - ue.z, horiz))


def in_coverage(map_position: Vec3, aperture_deg: float, ue: Vec3) -> bool:
    """True iff the UE lies inside the downward cone of half-angle aperture/2."""
    if not 0.0 < aperture_deg <= 180.0:
        raise ValueError("aperture must be in (0, 180] degrees")
    alt = map_position.z - ue.z
    if alt < 0.0:
        return False
    horiz = math.hypot(map_position.x - ue.x, map_position.y - ue.y)
    if aperture_deg >= 180.0:
        return True
    return horiz <= alt * math.tan(math.radians(aperture_deg / 2.0))


# ---------------------------------------------------------------------------
# Dynamics

def sample_user_positions(scenario: Scenario, rng: np.random.Generator):
    """Uniform initial drop of ground users, shape (P, 3) with z = 0."""
    w, h = scenario.area_m
    pos = np.zeros((scenario.num_users, 3))
    pos[:, 0] = rng.uniform(0.0, w, scenario.num_users)
    pos[:, 1] = rng.uniform(0.0, h, scenario.num_users)
    return pos


def step_mobility(positions, scenario: Scenario, rng: np.random.Generator):
    """One random-walk step, reflecting at the area boundary.  Returns a new array.

    Each user moves ``step_length_m`` in a uniformly random direction; z is
    untouched.  Reflection keeps the uniform density near edges.
    """
    step = scenario.mobility.step_length_m
    out = positions.copy()
    n = positions.shape[0]
    if n == 0 or step == 0.0:
        # Draw nothing so a zero-step world stays on the same stream.
        return out
    angle = rng.uniform(0.0, 2.0 * math.pi, n)
    out[:, 0] += step * np.cos(angle)
    out[:, 1] += step * np.sin(angle)
    w, h = scenario.area_m
    out[:, 0] = _reflect(out[:, 0], w)
    out[:, 1] = _reflect(out[:, 1], h)
    return out


def _reflect(x, limit):
    # Fold coordinates into [0, limit] (period 2*limit triangular wave).
    x = np.mod(x, 2.0 * limit)
    return np.where(x > limit, 2.0 * limit - x, x)


def sample_demand(traffic: TrafficModel, rng: np.random.Generator, size=None):
    """Poisson traffic demand in bit/s with the configured mean.

    The Poisson variate is drawn in Mbit/s so its mean equals
    ``mean_demand_bps`` after scaling back to bit/s.
    """
    mean_mbps = traffic.mean_demand_bps / 1e6
    return rng.poisson(mean_mbps, size=size) * 1e6


# ---------------------------------------------------------------------------
# Loading and validation

def _require(mapping, key, path, kind=None):
    if key not in mapping:
        raise ScenarioError(f"{path}.{key}: missing required field")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise ScenarioError(f"{path}.{key}: expected {kind}, got {type(value).__name__}")
    return value


def _grid_from_config(cfg, area):
    w, h = area
    points = []
    if "points_m" in cfg:
        for idx, p in enumerate(cfg["points_m"]):
            if len(p) != 3:
                raise ScenarioError(f"grid.points_m[{idx}]: expected [x, y, z]")
            points.append(tuple(float(v) for v in p))
    else:
        lattice = _require(cfg, "lattice", "grid")
        altitudes = _require(cfg, "altitudes_m", "grid")
        nx, ny = int(lattice[0]), int(lattice[1])
        if nx < 1 or ny < 1:
            raise ScenarioError("grid.lattice: entries must be >= 1")
        xs = [(2 * i + 1) * w / (2 * nx) for i in range(nx)]
        ys = [(2 * j + 1) * h / (2 * ny) for j in range(ny)]
        for z in altitudes:
            for y in ys:
                for x in xs:
                    points.append((x, y, float(z)))
    grid = []
    for idx, (x, y, z) in enumerate(points):
        if not (0.0 <= x <= w and 0.0 <= y <= h):
            raise ScenarioError(f"grid[{idx}]: grid point outside area ({x}, {y}, {z})")
        if z < 0:
            raise ScenarioError(f"grid[{idx}]: altitude must be >= 0")
        grid.append(GridLocation(id=idx, position=Vec3(x, y, z)))
    if not grid:
        raise ScenarioError("grid: at least one candidate location is required")
    return tuple(grid)


def scenario_from_dict(cfg: dict) -> Scenario:
    """Build and validate a Scenario from a parsed configuration mapping."""
    name = str(cfg.get("name", "custom"))
    area_raw = _require(cfg, "area_m", "scenario")
    if len(area_raw) != 2 or any(float(v) <= 0 for v in area_raw):
        raise ScenarioError("area_m: expected two positive extents [width, height]")
    area = (float(area_raw[0]), float(area_raw[1]))

    mbs_cfg = _require(cfg, "mbs", "scenario", dict)
    mbs_pos = mbs_cfg.get("position_m", [area[0] / 2, area[1] / 2, 25.0])
    if len(mbs_pos) != 3:
        raise ScenarioError("mbs.position_m: expected [x, y, z]")
    mbs = AccessPointConfig(
        id=0,
        kind=KIND_MBS,
        band=_band_code(mbs_cfg.get("band", "sub6"), "mbs.band"),
        carrier_ghz=float(mbs_cfg.get("carrier_ghz", 2.0)),
        tx_power_dbm=float(mbs_cfg.get("tx_power_dbm", 46.0)),
        bandwidth_hz=float(mbs_cfg.get("bandwidth_hz", 10e6)),
        antenna_gain_max_dbi=float(mbs_cfg.get("antenna_gain_dbi", 17.0)),
        antenna_gain_min_dbi=float(mbs_cfg.get("antenna_gain_dbi", 17.0)),
        beamwidth_deg=360.0,
        aperture_deg=180.0,
        capacity=int(mbs_cfg.get("capacity", 1)),
        position=Vec3(*(float(v) for v in mbs_pos)),
    )
    if mbs.capacity < 1:
        raise ScenarioError("mbs.capacity: must be >= 1")

    maps_cfg = _require(cfg, "maps", "scenario", dict)
    n_maps = int(_require(maps_cfg, "count", "maps"))
    if n_maps < 0:
        raise ScenarioError("maps.count: must be >= 0")
    map_capacity = int(maps_cfg.get("capacity", 10))
    if n_maps > 0 and map_capacity < 1:
        raise ScenarioError("maps.capacity: must be >= 1")
    aperture = float(maps_cfg.get("aperture_deg", 120.0))
    if not 0.0 < aperture <= 180.0:
        raise ScenarioError("maps.aperture_deg: must be in (0, 180]")
    map_template = dict(
        kind=KIND_MAP,
        band=_band_code(maps_cfg.get("band", "mmwave"), "maps.band"),
        carrier_ghz=float(maps_cfg.get("carrier_ghz", 28.0)),
        tx_power_dbm=float(maps_cfg.get("tx_power_dbm", 20.0)),
        bandwidth_hz=float(maps_cfg.get("bandwidth_hz", 500e6)),
        antenna_gain_max_dbi=float(maps_cfg.get("antenna_gain_max_dbi", 20.0)),
        antenna_gain_min_dbi=float(maps_cfg.get("antenna_gain_min_dbi", -10.0)),
        beamwidth_deg=float(maps_cfg.get("beamwidth_deg", 30.0)),
        aperture_deg=aperture,
        capacity=map_capacity,
    )
    aps = (mbs,) + tuple(
        AccessPointConfig(id=i + 1, **map_template) for i in range(n_maps)
    )

    users_cfg = _require(cfg, "users", "scenario", dict)
    num_users = int(_require(users_cfg, "count", "users"))
    if num_users < 0:
        raise ScenarioError("users.count: must be >= 0")
    qos_target = float(users_cfg.get("qos_target", 1.0))
    if not 0.0 <= qos_target <= 1.0:
        raise ScenarioError("users.qos_target: must be in [0, 1]")

    mob_cfg = cfg.get("mobility", {})
    mobility = MobilityModel(
        kind=str(mob_cfg.get("kind", "RandomWalk")),
        step_length_m=float(mob_cfg.get("step_length_m", 1.0)),
    )
    if mobility.kind != "RandomWalk":
        raise ScenarioError(f"mobility.kind: unsupported model {mobility.kind!r}")
    if mobility.step_length_m < 0:
        raise ScenarioError("mobility.step_length_m: must be >= 0")

    traffic_cfg = cfg.get("traffic", {})
    traffic = TrafficModel(
        kind=str(traffic_cfg.get("kind", "Poisson")),
        mean_demand_bps=float(traffic_cfg.get("mean_demand_mbps", 200.0)) * 1e6,
    )
    if traffic.kind != "Poisson":
        raise ScenarioError(f"traffic.kind: unsupported model {traffic.kind!r}")
    if traffic.mean_demand_bps < 0:
        raise ScenarioError("traffic.mean_demand_mbps: must be >= 0")

    channel = ChannelParams.from_dict(cfg.get("channel", {}))

    cost_cfg = cfg.get("cost", {})
    cost = CostModel(
        energy_unit_cost=float(cost_cfg.get("energy_unit_cost", 0.001)),
        energy_per_meter_j=float(cost_cfg.get("energy_per_meter_j", 20.0)),
        rent_cost=float(cost_cfg.get("rent_cost", 1.0)),
        max_per_map_cost=float(cost_cfg.get("max_per_map_cost", math.inf)),
    )
    if min(cost.energy_unit_cost, cost.energy_per_meter_j, cost.rent_cost) < 0:
        raise ScenarioError("cost: all cost coefficients must be >= 0")

    grid = _grid_from_config(_require(cfg, "grid", "scenario", dict), area)

    return Scenario(
        name=name,
        area_m=area,
        aps=aps,
        grid=grid,
        num_users=num_users,
        qos_target=qos_target,
        horizon=int(cfg.get("horizon_steps", 150)),
        rng_seed=int(cfg.get("rng_seed", 0)),
        mobility=mobility,
        traffic=traffic,
        channel=channel,
        cost=cost,
    )


def _band_code(label, path):
    table = {"sub6": BAND_SUB6, "mmwave": BAND_MMWAVE}
    if label not in table:
        raise ScenarioError(f"{path}: expected one of {sorted(table)}, got {label!r}")
    return table[label]


def load_scenario(path_or_name: str) -> Scenario:
    """Load a scenario from a YAML file path or a bundled preset name."""
    if path_or_name in PRESET_NAMES:
        text = (
            resources.files("skycell.presets")
            .joinpath(f"{path_or_name}.yaml")
            .read_text()
        )
    else:
        with open(path_or_name, "r") as fh:
            text = fh.read()
    cfg = yaml.safe_load(text)
    if not isinstance(cfg, dict):
        raise ScenarioError("scenario: top-level document must be a mapping")
    return scenario_from_dict(cfg)
