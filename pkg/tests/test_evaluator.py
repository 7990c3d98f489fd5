import json
import math
import random
import time

import pytest

from sdse.evaluator import (
    _FNV_OFFSET,
    _SYNTH_SEED,
    alloc_churn_job,
    calibrate_synthetic_cost,
    evaluate_mapping,
    full_subset,
    scenario_energy,
    scenario_makespan,
    scenario_metrics,
    synthetic_job,
)
from sdse.model import Mapping, parse_config, random_mapping

from conftest import random_dyadic_spec


def _single_proc_spec(speed=1, power=2):
    return parse_config(
        json.dumps(
            {
                "applications": [{"name": "a", "processes": ["P"]}],
                "architecture": {
                    "processors": [{"name": "c", "speed": speed, "power": power}],
                    "interconnect": {"bandwidth": 1, "energy_per_unit": 0},
                },
                "scenarios": [{"name": "s", "active_apps": ["a"], "comp": {"P": 100}}],
            }
        )
    )


def test_makespan_single_process():
    spec = _single_proc_spec(speed=1)
    assert scenario_makespan(spec, Mapping(genes=(0,)), spec.scenarios[0]) == 100.0


def test_makespan_shared_processor():
    spec = parse_config(
        json.dumps(
            {
                "applications": [{"name": "a", "processes": ["A", "B"]}],
                "architecture": {
                    "processors": [{"name": "c", "speed": 2, "power": 1}],
                    "interconnect": {"bandwidth": 1, "energy_per_unit": 0},
                },
                "scenarios": [
                    {"name": "s", "active_apps": ["a"], "comp": {"A": 60, "B": 40}}
                ],
            }
        )
    )
    assert scenario_makespan(spec, Mapping(genes=(0, 0)), spec.scenarios[0]) == 50.0


def test_makespan_with_external_channel(two_proc_spec):
    # A(60), B(40) on distinct speed-1 processors, channel data 30 at bandwidth 3
    assert scenario_makespan(two_proc_spec, Mapping(genes=(0, 1)), two_proc_spec.scenarios[0]) == 70.0


def test_energy_single_process():
    spec = _single_proc_spec(speed=1, power=2)
    assert scenario_energy(spec, Mapping(genes=(0,)), spec.scenarios[0]) == 200.0


def test_energy_zero_demands(two_proc_spec):
    scen = two_proc_spec.scenarios[0]
    zero = type(scen)(name="z", active_apps=scen.active_apps, comp={}, data={})
    assert scenario_energy(two_proc_spec, Mapping(genes=(0, 1)), zero) == 0.0
    assert scenario_makespan(two_proc_spec, Mapping(genes=(0, 1)), zero) == 0.0


def test_energy_with_external_channel(two_proc_spec):
    # busy 60 + 40 at power 1 each, plus 0.5 energy/unit for 30 data units
    assert scenario_energy(two_proc_spec, Mapping(genes=(0, 1)), two_proc_spec.scenarios[0]) == 115.0


def _two_scenario_spec():
    """Scenario makespans are 50 and 70 for the all-on-cpu0 mapping."""
    return parse_config(
        json.dumps(
            {
                "applications": [{"name": "a", "processes": ["A"]}],
                "architecture": {
                    "processors": [{"name": "c", "speed": 1, "power": 1}],
                    "interconnect": {"bandwidth": 1, "energy_per_unit": 0},
                },
                "scenarios": [
                    {"name": "s0", "active_apps": ["a"], "comp": {"A": 50}},
                    {"name": "s1", "active_apps": ["a"], "comp": {"A": 70}},
                ],
            }
        )
    )


def test_evaluate_mapping_average():
    spec = _two_scenario_spec()
    assert evaluate_mapping(spec, Mapping(genes=(0,)), [0, 1], "average").value == 60.0


def test_evaluate_mapping_worst():
    spec = _two_scenario_spec()
    assert evaluate_mapping(spec, Mapping(genes=(0,)), [0, 1], "worst").value == 70.0


def test_evaluate_mapping_empty_subset():
    spec = _two_scenario_spec()
    with pytest.raises(ValueError, match="empty scenario subset"):
        evaluate_mapping(spec, Mapping(genes=(0,)), [])


def test_evaluate_mapping_unknown_aggregate():
    spec = _two_scenario_spec()
    with pytest.raises(ValueError, match="aggregate"):
        evaluate_mapping(spec, Mapping(genes=(0,)), [0], "median")


# --- evaluator invariants on randomized instances --------------------------

N_INSTANCES = 150  # the acceptance suite re-runs these at 1000 instances


def check_lower_bound(spec, mapping, scen):
    got = scenario_makespan(spec, mapping, scen)
    procs = spec.architecture.processors
    busy = [0.0] * len(procs)
    for i, p in enumerate(spec.processes):
        busy[mapping.genes[i]] += scen.comp.get(p, 0.0) / procs[mapping.genes[i]].speed
    total_ext = sum(
        d
        for (f, t), d in scen.data.items()
        if mapping.genes[spec.process_index[f]] != mapping.genes[spec.process_index[t]]
    )
    assert got >= max(busy)
    assert got >= total_ext / spec.architecture.interconnect.bandwidth


def check_all_on_fastest(spec, scen):
    speeds = [p.speed for p in spec.architecture.processors]
    fastest = speeds.index(max(speeds))
    mapping = Mapping(genes=tuple(fastest for _ in spec.processes))
    expected = sum(scen.comp.get(p, 0.0) for p in spec.processes) / max(speeds)
    assert scenario_makespan(spec, mapping, scen) == expected
    # no channel crosses the interconnect
    ic = spec.architecture.interconnect
    energy = scenario_energy(spec, mapping, scen)
    busy_energy = spec.architecture.processors[fastest].power * expected
    assert energy == busy_energy + ic.energy_per_unit * 0.0


def check_symmetry(spec, mapping, scen):
    procs = spec.architecture.processors
    pairs = [
        (i, j)
        for i in range(len(procs))
        for j in range(i + 1, len(procs))
        if procs[i].speed == procs[j].speed and procs[i].power == procs[j].power
    ]
    if not pairs:
        return
    i, j = pairs[0]
    swapped = Mapping(
        genes=tuple(j if g == i else i if g == j else g for g in mapping.genes)
    )
    assert scenario_metrics(spec, mapping, scen) == scenario_metrics(spec, swapped, scen)


def check_monotonicity(spec, mapping, scen, rng):
    base = scenario_makespan(spec, mapping, scen)
    if scen.comp:
        p = rng.choice(sorted(scen.comp))
        bumped = dict(scen.comp)
        bumped[p] = bumped[p] + rng.randint(1, 100)
        scen2 = type(scen)(name=scen.name, active_apps=scen.active_apps, comp=bumped, data=scen.data)
        assert scenario_makespan(spec, mapping, scen2) >= base
    if scen.data:
        ch = rng.choice(sorted(scen.data))
        bumped = dict(scen.data)
        bumped[ch] = bumped[ch] + rng.randint(1, 100)
        scen2 = type(scen)(name=scen.name, active_apps=scen.active_apps, comp=scen.comp, data=bumped)
        assert scenario_makespan(spec, mapping, scen2) >= base


def run_invariant_instances(n_instances: int, seed: int = 1337):
    rng = random.Random(seed)
    for _ in range(n_instances):
        spec = random_dyadic_spec(rng, duplicate_processor=rng.random() < 0.5)
        mapping = random_mapping(spec, rng)
        scen = spec.scenarios[rng.randrange(len(spec.scenarios))]
        check_lower_bound(spec, mapping, scen)
        check_all_on_fastest(spec, scen)
        check_symmetry(spec, mapping, scen)
        check_monotonicity(spec, mapping, scen, rng)


def test_invariants_randomized():
    run_invariant_instances(N_INSTANCES)


# --- synthetic job bodies ---------------------------------------------------


def test_synthetic_job_zero_cost_returns_seed():
    assert synthetic_job(0) == int.from_bytes(_SYNTH_SEED[:8], "little")


def test_synthetic_job_deterministic():
    assert synthetic_job(17) == synthetic_job(17)
    assert synthetic_job(17) != synthetic_job(18)


def test_synthetic_job_rejects_negative():
    with pytest.raises(ValueError):
        synthetic_job(-1)


def test_calibrated_cost_hits_one_millisecond():
    cost = calibrate_synthetic_cost(1e-3)
    # time a few jobs and take the fastest, to dodge scheduler noise
    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        synthetic_job(cost)
        best = min(best, time.perf_counter() - t0)
    assert 0.5e-3 <= best <= 1.5e-3, f"calibrated job took {best * 1e3:.2f} ms"


def test_alloc_churn_zero_rounds():
    assert alloc_churn_job(0) == _FNV_OFFSET


def test_alloc_churn_deterministic():
    assert alloc_churn_job(20, (64, 256)) == alloc_churn_job(20, (64, 256))
    assert alloc_churn_job(20, (64, 256)) != alloc_churn_job(21, (64, 256))


def test_alloc_churn_rejects_bad_args():
    with pytest.raises(ValueError):
        alloc_churn_job(-1)
    with pytest.raises(ValueError):
        alloc_churn_job(1, (0,))


def test_full_subset(two_proc_spec):
    assert full_subset(two_proc_spec) == (0,)
