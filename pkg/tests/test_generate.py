import numpy as np
import pytest

from src.errors import ConfigError, ErrorCode
from src.generate import (
    FOREST_SHAPES,
    GeneratorParams,
    forest_declarations,
    generate_instance,
    generate_raw,
    nested_quotas,
    root_path,
)
from src.io import instance_to_dict


def test_same_seed_same_instance():
    a = generate_instance(42)
    b = generate_instance(42)
    assert instance_to_dict(a) == instance_to_dict(b)
    assert generate_raw(42) != generate_raw(43)


def test_zero_individuals():
    inst = generate_instance(0, GeneratorParams(individuals=0))
    assert inst.individuals == {}
    assert len(inst.institutions) == 2


@pytest.mark.parametrize(
    "bad",
    [
        {"individuals": -1},
        {"min_capacity": 5, "max_capacity": 2},
        {"forest_shape": "spiral"},
        {"type_rate": 1.5},
        {"membership_shares": {"XYZ": 0.1}},
    ],
)
def test_bad_params(bad):
    with pytest.raises(ConfigError) as e:
        GeneratorParams(**bad).validated()
    assert e.value.code == ErrorCode.BAD_PARAMS


def test_unknown_param_key():
    with pytest.raises(ConfigError):
        GeneratorParams.from_dict({"individuals": 3, "colour": "red"})
    assert GeneratorParams.from_dict({"individuals": 3}).individuals == 3


@pytest.mark.parametrize("shape", FOREST_SHAPES)
def test_forest_shapes(shape):
    decls = forest_declarations(np.random.default_rng(1), 4, shape)
    assert [d["id"] for d in decls] == ["h1", "h2", "h3", "h4"]
    if shape == "chain":
        assert root_path(decls, "h4") == ["h4", "h3", "h2", "h1"]
    if shape == "flat":
        assert all(d["parent"] is None for d in decls)


def test_nested_quotas_respect_parents():
    decls = forest_declarations(np.random.default_rng(0), 5, "random")
    parents = {d["id"]: d["parent"] for d in decls}
    for seed in range(30):
        quotas = nested_quotas(np.random.default_rng(seed), decls, 4, 3)
        assert sum(k for h, k in quotas.items() if parents[h] is None) <= 4
        for h, k in quotas.items():
            if parents[h] is not None:
                assert k <= quotas[parents[h]]


def test_generated_instances_are_valid():
    for seed in range(25):
        params = GeneratorParams(types=3, forest_shape=FOREST_SHAPES[seed % 3], max_quota=2)
        inst = generate_instance(seed, params)
        assert all(w.code == ErrorCode.QUOTA_EXCEEDS_CAPACITY for w in inst.warnings)
        for s in inst.institutions.values():
            assert s.open_capacity + sum(s.vertical_capacities.values()) == s.total_capacity
        for ind in inst.individuals.values():
            types = set(ind.horizontal_types)
            for h in types:
                assert set(inst.forest.ancestors(h)) <= types


@pytest.mark.slow
def test_large_instance():
    inst = generate_instance(7, GeneratorParams(individuals=2000, institutions=50, types=4, forest_shape="random"))
    assert len(inst.individuals) == 2000
    assert len(inst.institutions) == 50
