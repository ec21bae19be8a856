"""Deterministic tick-loop orchestration of twins and the network manager.

Per tick: evolve the plant-floor requirements, let every twin report its
iteration requirement and forecast, run the active allocation policy, step
every twin's controller with its grant, then record metrics. All randomness
comes from named substreams of one master seed, so requirement trajectories
are identical across policies and independent of execution order.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (DEFAULT_MAX_DEVIATION, AllocationConstraints,
                   NetworkDynamics, NetworkState, ScenarioConfig,
                   ScenarioValidationError, compute_residual,
                   validate_scenario)
from .manager import (EventHistory, PolicyKind, allocate_equal,
                      allocate_event, allocate_online, allocate_static,
                      estimate_event_horizon, should_trigger)
from .twin import (DigitalTwin, compute_requirement, forecast_requirements,
                   step_control, update_regret)

# substream domains under the master seed
_DOMAIN_RESOURCE_WALK = 0
_DOMAIN_TWIN_TARGETS = 1
_DOMAIN_SCENARIO = 2


class SimulationError(RuntimeError):
    """A tick-loop failure, annotated with the tick where it happened."""

    def __init__(self, tick: int, message: str):
        self.tick = tick
        super().__init__(f"tick {tick}: {message}")


def _stream(seed: int, domain: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((seed, domain, index))))


def draw_initial_requirements(config: ScenarioConfig, seed: int) -> np.ndarray:
    """Integer starting requirements from the scenario's own substream."""
    lo, hi = config.initial_requirement_range
    rng = _stream(seed, _DOMAIN_SCENARIO, 0)
    return rng.integers(lo, hi, endpoint=True, size=config.n_resources)


def evolve_requirements(current, tick: int, config: ScenarioConfig,
                        rng_streams) -> np.ndarray:
    """One tick of the bounded integer random walk per resource.

    Stationary during the prefix (no draws consumed, so trajectories agree
    across any code path that skips those ticks); afterwards each resource
    adds an independent uniform integer step in [-d, d] and clamps to the
    requirement range.
    """
    if tick < 0:
        raise ValueError("tick must be nonnegative")
    current = np.asarray(current)
    if tick < config.stationary_prefix:
        return current.copy()
    d = config.requirement_step_bound
    lo, hi = config.requirement_range
    steps = np.array([int(rng.integers(-d, d, endpoint=True))
                      for rng in rng_streams])
    return np.clip(current + steps, lo, hi)


@dataclass(frozen=True)
class SimResult:
    """Everything one (config, policy, seed) run produced."""

    policy: PolicyKind
    seed: int
    capacity_b: float
    residual_inf_series: np.ndarray        # (n_ticks,)
    mean_residual_after_prefix: float
    reallocation_ticks: tuple[int, ...]    # re-solve ticks (t >= 1)
    regret_series: np.ndarray              # (n_ticks, n) cumulative per twin
    requirement_series: np.ndarray         # (n_ticks, n) integer k'
    allocation_series: np.ndarray          # (n_ticks, n)

    @property
    def n_ticks(self) -> int:
        return self.residual_inf_series.size


def _stack_forecasts(twins, horizon: int) -> np.ndarray:
    return np.column_stack([forecast_requirements(tw, horizon)
                            for tw in twins])


def run_scenario(config: ScenarioConfig, policy: PolicyKind,
                 seed: int) -> SimResult:
    """Simulate one policy for the whole scenario.

    Equal and Static allocate once at tick 0 and hold. EventTriggered starts
    from the static solve and re-solves only when the regret trigger fires,
    resetting every tracker at that tick. OnlineDynamic re-solves the
    receding-horizon problem every tick.
    """
    validate_scenario(config)
    policy = PolicyKind(policy)
    n = config.n_resources
    n_ticks = config.n_ticks

    resource_rngs = [_stream(seed, _DOMAIN_RESOURCE_WALK, i) for i in range(n)]
    twins = [DigitalTwin(i, _stream(seed, _DOMAIN_TWIN_TARGETS, i),
                         requirement_gap=config.gap,
                         epsilon_per_step=config.epsilon_per_step)
             for i in range(n)]
    requirements = draw_initial_requirements(config, seed)
    capacity = (float(config.capacity_b) if config.capacity_b is not None
                else float(requirements.sum()))
    dynamics = NetworkDynamics.identity_gain(n)
    xi = NetworkState.zeros(n)

    residual_series = np.empty(n_ticks)
    regret_series = np.empty((n_ticks, n))
    requirement_series = np.empty((n_ticks, n), dtype=np.int64)
    allocation_series = np.empty((n_ticks, n))
    realloc_ticks: list[int] = []

    trackers = None
    history = EventHistory()
    held_alloc = None         # current fixed allocation (equal/static/event)
    tau_last = 0              # tick of the last reallocation event

    for t in range(n_ticks):
        try:
            if t > 0:
                requirements = evolve_requirements(
                    requirements, t, config, resource_rngs)
            requirement_series[t] = requirements

            for twin, req in zip(twins, requirements):
                twin.assign_task(t, int(req))
            reports = [compute_requirement(tw) for tw in twins]
            k_prime = np.array([kp for kp, _ in reports], dtype=float)
            k_lower = np.array([kl for _, kl in reports], dtype=float)
            if trackers is None:
                trackers = [tw.make_tracker(0) for tw in twins]
            constraints = AllocationConstraints(
                capacity_b=capacity, lower_bounds=k_lower,
                requested=k_prime, max_deviation=DEFAULT_MAX_DEVIATION,
                slack_penalty_rho=config.rho)

            if policy is PolicyKind.EQUAL:
                if held_alloc is None:
                    held_alloc = allocate_equal(n, capacity)
                alloc = held_alloc
            elif policy is PolicyKind.STATIC:
                if held_alloc is None:
                    held_alloc = allocate_static(k_prime, constraints).allocation
                alloc = held_alloc
            elif policy is PolicyKind.EVENT_TRIGGERED:
                if held_alloc is None:
                    held_alloc = allocate_static(k_prime, constraints).allocation
                elif should_trigger(trackers, t - tau_last,
                                    history.max_reallocation_period):
                    horizon = estimate_event_horizon(history)
                    forecast = _stack_forecasts(twins, horizon)
                    held_alloc = allocate_event(
                        xi, forecast, dynamics, constraints, horizon).allocation
                    history.record(t)
                    realloc_ticks.append(t)
                    tau_last = t
                    for tracker in trackers:
                        tracker.reset(t)
                alloc = held_alloc
            else:
                forecast = _stack_forecasts(twins, 1)
                alloc = allocate_online(
                    xi, forecast, dynamics, constraints, N=1).allocation
                if t >= 1:
                    realloc_ticks.append(t)

            for i, twin in enumerate(twins):
                out = step_control(twin, float(alloc[i]))
                update_regret(trackers[i], out.sample)

            residual_series[t] = compute_residual(k_prime, alloc)[1]
            regret_series[t] = [tr.cumulative_regret_R for tr in trackers]
            allocation_series[t] = alloc
            xi = NetworkState(dynamics.step(xi.xi, alloc))
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(t, str(exc)) from exc

    after = residual_series[config.stationary_prefix:]
    mean_after = float(after.mean()) if after.size else float("nan")
    for arr in (residual_series, regret_series, requirement_series,
                allocation_series):
        arr.flags.writeable = False
    return SimResult(policy=policy, seed=seed, capacity_b=capacity,
                     residual_inf_series=residual_series,
                     mean_residual_after_prefix=mean_after,
                     reallocation_ticks=tuple(realloc_ticks),
                     regret_series=regret_series,
                     requirement_series=requirement_series,
                     allocation_series=allocation_series)


def compare_policies(config: ScenarioConfig, seed: int,
                     workers: int = 1) -> dict[PolicyKind, SimResult]:
    """Run all four policies on identical requirement trajectories.

    Per-policy runs are fully independent (separate twins, separate RNG
    streams rebuilt from the same seed), so optional thread workers cannot
    change any result.
    """
    kinds = list(PolicyKind)
    if workers <= 1:
        results = [run_scenario(config, kind, seed) for kind in kinds]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(kinds))) as pool:
            futures = [pool.submit(run_scenario, config, kind, seed)
                       for kind in kinds]
            results = [f.result() for f in futures]
    return dict(zip(kinds, results))


# -- scenario files ---------------------------------------------------------

_SCENARIO_FIELDS = tuple(f.name for f in dataclasses.fields(ScenarioConfig))
_RANGE_FIELDS = ("requirement_range", "initial_requirement_range")
_INT_FIELDS = ("n_resources", "n_ticks", "stationary_prefix",
               "requirement_step_bound", "master_seed")
_OPTIONAL_FLOAT_FIELDS = ("capacity_b", "epsilon_per_step")
_FLOAT_FIELDS = ("gap", "rho")


def _as_int(key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError([f"{key} must be an integer"])
    if float(value) != int(value):
        raise ScenarioValidationError([f"{key} must be an integer"])
    return int(value)


def _as_float(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError([f"{key} must be a number"])
    return float(value)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a key/value tree.

    Unknown keys are rejected; missing keys fall back to defaults.
    """
    if not isinstance(data, dict):
        raise ScenarioValidationError(["scenario document must be an object"])
    unknown = sorted(set(data) - set(_SCENARIO_FIELDS))
    if unknown:
        raise ScenarioValidationError(
            [f"unknown scenario key: {k}" for k in unknown])
    kwargs = {}
    for key, value in data.items():
        if key in _RANGE_FIELDS:
            if (not isinstance(value, (list, tuple)) or len(value) != 2):
                raise ScenarioValidationError(
                    [f"{key} must be a [min, max] pair"])
            kwargs[key] = (_as_int(key, value[0]), _as_int(key, value[1]))
        elif key in _INT_FIELDS:
            kwargs[key] = _as_int(key, value)
        elif key in _OPTIONAL_FLOAT_FIELDS:
            kwargs[key] = None if value is None else _as_float(key, value)
        elif key in _FLOAT_FIELDS:
            kwargs[key] = _as_float(key, value)
    return validate_scenario(ScenarioConfig(**kwargs))


def scenario_to_dict(config: ScenarioConfig) -> dict:
    data = dataclasses.asdict(config)
    for key in _RANGE_FIELDS:
        data[key] = list(data[key])
    return data


def load_scenario(path) -> ScenarioConfig:
    """Read a scenario JSON file; OSError and validation errors propagate."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioValidationError(
                [f"scenario file is not valid JSON: {exc}"]) from exc
    return scenario_from_dict(data)


def save_scenario(config: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
