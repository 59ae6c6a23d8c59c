"""Deployment cost model, constraint checking, and the placement algorithms.

Planning happens on a frozen per-seed world snapshot: user positions and the
per-(location, user) channel realization are drawn once, and the planning
demand is the traffic mean.  That makes every candidate evaluation a pure
function of the chosen location subset, so the exhaustive optimum is
well-defined and all three algorithms compete on identical footing.
User mobility and traffic dynamics play out afterwards, in the association
phase (see :mod:`skycell.marl.training`).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .association import qos_vector
from .channel import (
    ApArrays,
    ChannelRealization,
    LinkStats,
    compute_link_stats,
)
from .scenario import CostModel, Scenario

# SeedSequence domain tags (stable across runs).
_TAG_WORLD = 101
_TAG_SIMBA = 102
_TAG_RANDOM = 103

_QOS_EPS = 1e-12

CONSTRAINT_NAMES = ("C1", "C2", "C3", "C4", "C5", "C6", "C7")


class EnumerationBudgetError(RuntimeError):
    """Exhaustive search refused: the subset count exceeds the budget."""

    def __init__(self, count: int, budget: int):
        super().__init__(
            f"exhaustive search would evaluate {count} subsets "
            f"(budget {budget}); raise the budget or shrink the grid"
        )
        self.count = count
        self.budget = budget


def subset_count(n_locations: int, k_max: int) -> int:
    """Number of location subsets of size 0..k_max (binomial sum)."""
    return sum(math.comb(n_locations, i) for i in range(min(k_max, n_locations) + 1))


# ---------------------------------------------------------------------------
# Costs

def move_cost(from_pos, to_pos, cost: CostModel) -> float:
    """Cost of relocating one MAP: distance-linear energy plus fixed rent."""
    dist = float(np.linalg.norm(np.asarray(to_pos, dtype=float) - np.asarray(from_pos, dtype=float)))
    return cost.energy_per_meter_j * dist * cost.energy_unit_cost + cost.rent_cost


@dataclass(frozen=True)
class DeploymentPlan:
    """Placement of the MAP fleet: map id -> grid location, plus cost breakdown."""

    placements: dict[int, int]  # MAP id -> grid location id
    coordinates: dict[int, tuple[float, float, float]]  # MAP id -> location xyz
    origins: dict[int, tuple[float, float, float]]  # MAP id -> previous xyz
    per_map_cost: dict[int, float]
    total_cost: float

    @property
    def deployed_count(self) -> int:
        return len(self.placements)

    @property
    def location_ids(self) -> tuple[int, ...]:
        return tuple(self.placements[i] for i in sorted(self.placements))


def build_plan(scenario: Scenario, location_ids, cost: CostModel | None = None,
               previous: DeploymentPlan | None = None) -> DeploymentPlan:
    """Assign MAPs (lowest ids first) to the given grid locations.

    Undeployed MAPs contribute nothing.  A MAP's movement origin is its
    placement in ``previous``, or the staging point next to the MBS for the
    first deployment epoch.
    """
    cost = cost or scenario.cost
    staging = tuple(scenario.staging_point())
    placements, coords, origins, per_map = {}, {}, {}, {}
    total = 0.0
    for idx, loc_id in enumerate(location_ids):
        map_id = idx + 1
        loc = scenario.grid[loc_id]
        origin = staging
        if previous is not None and map_id in previous.coordinates:
            origin = previous.coordinates[map_id]
        c = move_cost(origin, loc.position.as_array(), cost)
        placements[map_id] = loc_id
        coords[map_id] = (loc.position.x, loc.position.y, loc.position.z)
        origins[map_id] = origin
        per_map[map_id] = c
        total += c
    return DeploymentPlan(
        placements=placements,
        coordinates=coords,
        origins=origins,
        per_map_cost=per_map,
        total_cost=total,
    )


def total_cost(plan: DeploymentPlan, cost: CostModel) -> float:
    """Recompute the plan's total cost from stored coordinates."""
    return sum(
        move_cost(plan.origins[i], plan.coordinates[i], cost) for i in plan.placements
    )


# ---------------------------------------------------------------------------
# Constraint checking

@dataclass(frozen=True)
class ConstraintReport:
    ok: bool
    results: dict[str, bool]
    offenders: dict[str, list]

    def failed(self) -> list[str]:
        return [name for name in CONSTRAINT_NAMES if not self.results[name]]


def check_constraints(plan: DeploymentPlan, serving, kappa, scenario: Scenario,
                      loads=None) -> ConstraintReport:
    """Evaluate C1-C7 and name the offending entities; never raises."""
    serving = np.asarray(serving)
    kappa = np.asarray(kappa)
    results: dict[str, bool] = {}
    offenders: dict[str, list] = {name: [] for name in CONSTRAINT_NAMES}

    # C1: decision variables binary by construction.
    results["C1"] = True

    over_budget = [
        i for i, c in plan.per_map_cost.items()
        if c > scenario.cost.max_per_map_cost + _QOS_EPS
    ]
    results["C2"] = not over_budget
    offenders["C2"] = over_budget

    capacities = np.array([ap.capacity for ap in scenario.aps[: plan.deployed_count + 1]])
    if loads is None:
        loads = np.bincount(serving[serving >= 0], minlength=len(capacities))
    over_cap = [int(i) for i in np.where(loads > capacities)[0]]
    results["C3"] = not over_cap
    offenders["C3"] = over_cap

    unassoc = [int(j) for j in np.where(serving < 0)[0]]
    results["C4"] = not unassoc
    offenders["C4"] = unassoc

    unsatisfied = [
        int(j) for j in np.where(kappa < scenario.qos_target - _QOS_EPS)[0]
    ]
    results["C5"] = not unsatisfied
    offenders["C5"] = unsatisfied

    used = list(plan.placements.values())
    dupes = sorted({loc for loc in used if used.count(loc) > 1})
    results["C6"] = not dupes
    offenders["C6"] = dupes

    results["C7"] = plan.deployed_count <= scenario.k_max
    offenders["C7"] = [] if results["C7"] else [plan.deployed_count]

    return ConstraintReport(
        ok=all(results.values()), results=results, offenders=offenders
    )


# ---------------------------------------------------------------------------
# Planning world

@dataclass
class DeploymentWorld:
    """Per-seed planning context.

    The per-(location, user) channel realization and the planning demand
    (traffic mean) are frozen, but users follow a deterministic random-walk
    trajectory indexed by the episode number: ``positions(t)`` is the user
    layout after t walk steps from the seed drop.  Episode-indexed link
    statistics are cached, so all algorithms sharing a world (and a seed)
    see identical geometry at identical indices.  With the scenario's
    mobility step at 0 every index collapses to the epoch snapshot.
    """

    scenario: Scenario
    seed: int
    demand_bps: np.ndarray  # (P,) planning demand (traffic mean)
    grid_aps: ApArrays  # rows: [MBS] + one hypothetical MAP per grid location
    realization: ChannelRealization  # frozen per (row, user)
    _walk_rng: np.random.Generator | None = None
    _positions: dict = field(default_factory=dict)
    _links: dict = field(default_factory=dict)

    @property
    def n_locations(self) -> int:
        return len(self.scenario.grid)

    @property
    def ue_pos(self) -> np.ndarray:
        """Epoch-snapshot user positions (walk index 0)."""
        return self.positions(0)

    @property
    def links(self) -> LinkStats:
        """Epoch-snapshot link statistics (walk index 0)."""
        return self.link_stats(0)

    def positions(self, t: int = 0) -> np.ndarray:
        from .scenario import step_mobility

        if t not in self._positions:
            last = max(self._positions)
            rng = self._walk_rng
            pos = self._positions[last]
            for step in range(last, t):
                pos = step_mobility(pos, self.scenario, rng)
                self._positions[step + 1] = pos
        return self._positions[t]

    def link_stats(self, t: int = 0) -> LinkStats:
        if t not in self._links:
            if self.scenario.mobility.step_length_m == 0.0 and 0 in self._links:
                self._links[t] = self._links[0]
            else:
                self._links[t] = compute_link_stats(
                    self.grid_aps, self.positions(t), self.scenario.channel,
                    self.realization,
                )
        return self._links[t]


def build_world(scenario: Scenario, seed: int) -> DeploymentWorld:
    from .scenario import sample_user_positions  # local import; no cycle at module load

    rng_pos = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _TAG_WORLD, 0])))
    rng_chan = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _TAG_WORLD, 1])))
    ue_pos = sample_user_positions(scenario, rng_pos)
    demand = np.full(scenario.num_users, scenario.traffic.mean_demand_bps)

    mbs = scenario.mbs
    rows = [(mbs, mbs.position.as_array())]
    template = scenario.aps[1] if len(scenario.aps) > 1 else None
    for loc in scenario.grid:
        ap = template if template is not None else mbs
        rows.append((ap, loc.position.as_array()))
    grid_aps = ApArrays.build(rows)
    realization = ChannelRealization.draw(rng_chan, grid_aps.n, scenario.num_users)
    world = DeploymentWorld(
        scenario=scenario,
        seed=seed,
        demand_bps=demand,
        grid_aps=grid_aps,
        realization=realization,
        _walk_rng=np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, _TAG_WORLD, 2]))
        ),
    )
    world._positions[0] = ue_pos
    return world


def _select_rows(aps: ApArrays, rows) -> ApArrays:
    idx = np.asarray(rows)
    return ApArrays(
        ids=tuple(aps.ids[i] for i in rows),
        pos=aps.pos[idx],
        kind=aps.kind[idx],
        band=aps.band[idx],
        tx_dbm=aps.tx_dbm[idx],
        gain_dbi=aps.gain_dbi[idx],
        gain_min_dbi=aps.gain_min_dbi[idx],
        beamwidth_deg=aps.beamwidth_deg[idx],
        beam_cos_half=aps.beam_cos_half[idx],
        aperture_deg=aps.aperture_deg[idx],
        carrier_ghz=aps.carrier_ghz[idx],
        bw_hz=aps.bw_hz[idx],
        capacity=aps.capacity[idx],
    )


@dataclass
class CandidateEval:
    serving: np.ndarray  # (P,) rows into [MBS] + subset order
    kappa: np.ndarray
    rate_bps: np.ndarray
    loads: np.ndarray
    feasible_fast: bool
    qos_fraction: float


def evaluate_subset(world: DeploymentWorld, location_ids, t: int = 0) -> CandidateEval:
    """MAX-SNR association and QoS of the MBS plus MAPs at the given locations,
    against the world's user layout at walk index ``t``."""
    rows = [0] + [1 + int(l) for l in location_ids]
    links = world.link_stats(t).rows(rows)
    aps = _select_rows(world.grid_aps, rows)
    serving = kernels.greedy_max_snr(links.snr_db, links.in_cov, aps.capacity)
    _, rate, _ = kernels.served_sinr_rate(
        links.rss_dbm,
        links.pathloss_db,
        links.in_cov,
        serving,
        aps.pos,
        aps.kind,
        aps.band,
        aps.tx_dbm,
        aps.gain_dbi,
        aps.gain_min_dbi,
        aps.beam_cos_half,
        aps.bw_hz,
        world.positions(t),
        world.scenario.channel.ue_rx_gain_dbi,
        world.scenario.channel.noise_dbm_hz,
    )
    kappa = qos_vector(rate, world.demand_bps, serving)
    loads = np.bincount(serving[serving >= 0], minlength=len(rows))
    target = world.scenario.qos_target
    n = world.scenario.num_users
    satisfied = kappa >= target - _QOS_EPS
    feasible = bool((serving >= 0).all()) and bool(satisfied.all()) if n else True
    return CandidateEval(
        serving=serving,
        kappa=kappa,
        rate_bps=rate,
        loads=loads,
        feasible_fast=feasible,
        qos_fraction=float(satisfied.mean()) if n else 1.0,
    )


def _plan_cost_components(world: DeploymentWorld, location_ids, cost: CostModel):
    staging = world.scenario.staging_point()
    per = [
        move_cost(staging, world.scenario.grid[l].position.as_array(), cost)
        for l in location_ids
    ]
    return per, float(sum(per))


@dataclass
class DeploymentResult:
    plan: DeploymentPlan | None
    feasible: bool
    best_cost: float
    trace: np.ndarray  # best-so-far feasible cost per iteration (inf before first)
    evaluations: int
    report: ConstraintReport | None
    best_effort_plan: DeploymentPlan | None = None
    best_effort_qos: float = 0.0
    algorithm: str = ""
    certified_step: int = 0  # walk index the returned plan was checked against


@dataclass(frozen=True)
class SimbaConfig:
    monte_carlo_iters: int = 10  # M
    episodes: int = 100  # T
    rng_seed: int = 0

    def __post_init__(self):
        if self.monte_carlo_iters < 1 or self.episodes < 1:
            raise ValueError("monte_carlo_iters and episodes must be >= 1")


@dataclass
class LocationScore:
    """Running mean of per-deployment scores for one grid location."""

    total: float = 0.0
    visits: int = 0

    def update(self, deployment_score: float) -> float:
        self.total += deployment_score
        self.visits += 1
        return self.value

    @property
    def value(self) -> float:
        return self.total / self.visits if self.visits else 0.0


def location_score_update(kappa_served, score: LocationScore) -> float:
    """Fold one deployment's served-QoS mean into the location's running score."""
    kappa_served = np.asarray(kappa_served, dtype=float)
    dep = float(kappa_served.mean()) if kappa_served.size else 0.0
    return score.update(dep)


def _better(cost_a, count_a, cost_b, count_b) -> bool:
    """Plan (a) beats (b): lower cost, or same cost with fewer MAPs."""
    if cost_a < cost_b - 1e-12:
        return True
    return abs(cost_a - cost_b) <= 1e-12 and count_a < count_b


def simba(scenario: Scenario, config: SimbaConfig, cost: CostModel | None = None,
          world: DeploymentWorld | None = None) -> DeploymentResult:
    """Iterative Monte-Carlo placement: explore random completions, commit the
    best-scoring location, stop as soon as C1-C7 hold, keep the cheapest
    feasible episode.

    Location scores are running means of the served-QoS score, persisted
    across all episodes; the candidate pool is restored at each episode
    start.  Within an episode a committed location leaves the pool, and on
    constraint failure another location is committed (one fewer remains for
    the exploration draws).
    """
    cost = cost or scenario.cost
    if world is None:
        world = build_world(scenario, config.rng_seed)
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.rng_seed, _TAG_SIMBA]))
    )
    n_loc = world.n_locations
    k_max = scenario.k_max
    scores = [LocationScore() for _ in range(n_loc)]
    # Cheaper locations win score ties (supports the joint cost minimization).
    tie_cost = _plan_cost_components(world, range(n_loc), cost)[0]

    best_cost = math.inf
    best_locs: tuple[int, ...] | None = None
    best_t = 0
    best_effort: tuple[float, float, tuple[int, ...], int] | None = None  # (-qos, cost, locs, t)
    trace = np.empty(config.episodes)
    evaluations = 0

    for t in range(config.episodes):
        pool = list(range(n_loc))
        committed: list[int] = []
        k = k_max
        feasible = False
        ep_cost = math.inf
        ep_qos = 0.0
        for _ in range(k_max):
            if k <= 0 or not pool:
                break
            n_sample = min(k, len(pool))
            for _ in range(config.monte_carlo_iters):
                sampled = rng.choice(len(pool), size=n_sample, replace=False)
                sampled_locs = [pool[i] for i in sampled]
                ev = evaluate_subset(world, committed + sampled_locs, t)
                evaluations += 1
                base = 1 + len(committed)
                for offset, p in enumerate(sampled_locs):
                    served = np.where(ev.serving == base + offset)[0]
                    location_score_update(ev.kappa[served], scores[p])
            p_star = max(pool, key=lambda p: (scores[p].value, -tie_cost[p], -p))
            committed.append(p_star)
            pool.remove(p_star)
            ev = evaluate_subset(world, committed, t)
            evaluations += 1
            per_map, ep_cost = _plan_cost_components(world, committed, cost)
            ep_qos = ev.qos_fraction
            within_budget = all(c <= cost.max_per_map_cost + 1e-12 for c in per_map)
            if ev.feasible_fast and within_budget:
                feasible = True
                break
            k -= 1
        if feasible and _better(ep_cost, len(committed), best_cost,
                                len(best_locs) if best_locs is not None else math.inf):
            best_cost = ep_cost
            best_locs = tuple(committed)
            best_t = t
        effort_key = (-ep_qos, ep_cost, tuple(committed), t)
        if committed and (best_effort is None or effort_key[:3] < best_effort[:3]):
            best_effort = effort_key
        trace[t] = best_cost

    return _finalize(scenario, world, cost, best_locs, best_cost, best_t, trace,
                     evaluations, best_effort, "simba")


def _finalize(scenario, world, cost, best_locs, best_cost, best_t, trace,
              evaluations, best_effort, algorithm) -> DeploymentResult:
    if best_locs is not None:
        plan = build_plan(scenario, best_locs, cost)
        ev = evaluate_subset(world, best_locs, best_t)
        report = check_constraints(plan, ev.serving, ev.kappa, scenario, ev.loads)
        return DeploymentResult(
            plan=plan,
            feasible=True,
            best_cost=best_cost,
            trace=np.asarray(trace),
            evaluations=evaluations,
            report=report,
            best_effort_plan=plan,
            best_effort_qos=ev.qos_fraction,
            algorithm=algorithm,
            certified_step=best_t,
        )
    effort_plan = None
    effort_qos = 0.0
    report = None
    effort_t = 0
    if best_effort is not None:
        locs = best_effort[2]
        effort_t = best_effort[3]
        effort_plan = build_plan(scenario, locs, cost)
        ev = evaluate_subset(world, locs, effort_t)
        effort_qos = ev.qos_fraction
        report = check_constraints(effort_plan, ev.serving, ev.kappa, scenario, ev.loads)
    return DeploymentResult(
        plan=None,
        feasible=False,
        best_cost=math.inf,
        trace=np.asarray(trace),
        evaluations=evaluations,
        report=report,
        best_effort_plan=effort_plan,
        best_effort_qos=effort_qos,
        algorithm=algorithm,
        certified_step=effort_t,
    )


def exhaustive_search(scenario: Scenario, cost: CostModel | None = None,
                      world: DeploymentWorld | None = None, seed: int = 0,
                      max_subset_size: int | None = None,
                      budget: int = 200_000) -> DeploymentResult:
    """Enumerate every location subset up to the fleet size; exact optimum.

    Subsets are visited by increasing size, lexicographically within a size,
    so the best-so-far trace is deterministic.  Refuses (with the computed
    combination count) when the enumeration exceeds ``budget``.
    """
    cost = cost or scenario.cost
    if world is None:
        world = build_world(scenario, seed)
    k_max = scenario.k_max if max_subset_size is None else min(max_subset_size, scenario.k_max)
    n_loc = world.n_locations
    count = subset_count(n_loc, k_max)
    if count > budget:
        raise EnumerationBudgetError(count, budget)

    best_cost = math.inf
    best_locs = None
    best_effort = None
    trace = np.empty(count)
    evaluations = 0
    for size in range(k_max + 1):
        for subset in itertools.combinations(range(n_loc), size):
            ev = evaluate_subset(world, subset, 0)
            per_map, c = _plan_cost_components(world, subset, cost)
            within = all(pc <= cost.max_per_map_cost + 1e-12 for pc in per_map)
            if ev.feasible_fast and within and _better(
                c, size, best_cost, len(best_locs) if best_locs is not None else math.inf
            ):
                best_cost = c
                best_locs = subset
            effort_key = (-ev.qos_fraction, c, subset, 0)
            if best_effort is None or effort_key[:3] < best_effort[:3]:
                best_effort = effort_key
            trace[evaluations] = best_cost
            evaluations += 1
    return _finalize(scenario, world, cost, best_locs, best_cost, 0, trace,
                     evaluations, best_effort, "exhaustive")


def random_deployment(scenario: Scenario, iterations: int,
                      cost: CostModel | None = None,
                      world: DeploymentWorld | None = None,
                      seed: int = 0) -> DeploymentResult:
    """Uniform-random baseline: each MAP deploys with probability 1/2 to a
    uniformly chosen free location; the cheapest feasible draw so far wins."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    cost = cost or scenario.cost
    if world is None:
        world = build_world(scenario, seed)
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, _TAG_RANDOM]))
    )
    n_loc = world.n_locations
    k_max = scenario.k_max

    best_cost = math.inf
    best_locs = None
    best_t = 0
    best_effort = None
    trace = np.empty(iterations)
    evaluations = 0
    for it in range(iterations):
        chosen: list[int] = []
        free = list(range(n_loc))
        for _ in range(k_max):
            deploy = rng.random() < 0.5
            if deploy and free:
                pick = int(rng.integers(len(free)))
                chosen.append(free.pop(pick))
        ev = evaluate_subset(world, chosen, it)
        evaluations += 1
        per_map, c = _plan_cost_components(world, chosen, cost)
        within = all(pc <= cost.max_per_map_cost + 1e-12 for pc in per_map)
        if ev.feasible_fast and within and _better(
            c, len(chosen), best_cost, len(best_locs) if best_locs is not None else math.inf
        ):
            best_cost = c
            best_locs = tuple(chosen)
            best_t = it
        effort_key = (-ev.qos_fraction, c, tuple(chosen), it)
        if best_effort is None or effort_key[:3] < best_effort[:3]:
            best_effort = effort_key
        trace[it] = best_cost
    return _finalize(scenario, world, cost, best_locs, best_cost, best_t, trace,
                     evaluations, best_effort, "random")


def active_network(scenario: Scenario, plan: DeploymentPlan | None) -> ApArrays:
    """MBS plus the deployed MAPs of a plan, as kernel-ready arrays."""
    mbs = scenario.mbs
    rows = [(mbs, mbs.position.as_array())]
    if plan is not None:
        for map_id in sorted(plan.placements):
            ap = scenario.aps[map_id]
            rows.append((ap, np.asarray(plan.coordinates[map_id], dtype=float)))
    return ApArrays.build(rows)
