import json

import numpy as np
import pytest

from hybridfem import (
    Dataset,
    FormatError,
    Mlp,
    ModelStamp,
    SourceParams,
    SplitMix64,
    build_hierarchy,
    error_vs_reference,
    eval_source,
    fe_solve,
    generate_dataset,
    load_dataset,
    load_model,
    mlp_init,
    sample_source,
    save_dataset,
    save_model,
    source_fn,
)
from hybridfem.fem import FeFunction


def test_source_with_zero_phases():
    p = SourceParams(0.0, 0.0, 0.0, 0.0)
    xs = np.linspace(0, 1, 17)
    expected = np.sin(2 * np.pi * xs) + 0.2 * np.sin(4 * np.pi * xs)
    for y in (0.0, 0.3, 1.0):  # the verbatim family depends on x only
        assert np.allclose(eval_source(p, xs, np.full_like(xs, y)), expected)
    assert eval_source(p, 0.0, 0.5) == 0.0


def test_source_is_bounded():
    rng = SplitMix64(3)
    xs = np.linspace(0, 1, 101)
    for _ in range(20):
        p = sample_source(rng)
        vals = eval_source(p, xs, xs)
        assert np.all(np.abs(vals) <= 1.2 + 1e-12)


def test_xy_family_swaps_terms_two_and_four():
    p = SourceParams(0.1, 0.2, 0.3, 0.4)
    x, y = 0.35, 0.8
    expected = (
        0.5 * np.sin(2 * np.pi * (x + 0.1))
        + 0.5 * np.sin(2 * np.pi * (y + 0.2))
        + 0.1 * np.sin(4 * np.pi * (x + 0.3))
        + 0.1 * np.sin(4 * np.pi * (y + 0.4))
    )
    assert np.isclose(eval_source(p, x, y, family="xy"), expected)
    with pytest.raises(ValueError):
        source_fn(p, family="diagonal")


def test_sample_source_reproducible_and_in_range():
    a = sample_source(SplitMix64(42))
    b = sample_source(SplitMix64(42))
    assert a == b
    rng = SplitMix64(1)
    for _ in range(100):
        p = sample_source(rng)
        assert 0.0 <= p.c1 <= 1.0 and 0.0 <= p.c2 <= 1.0
        assert 0.0 <= p.c3 <= 0.5 and 0.0 <= p.c4 <= 0.5


def test_sample_source_uniform_means():
    rng = SplitMix64(6)
    draws = np.array([sample_source(rng).as_tuple() for _ in range(10_000)])
    se_unit = 1.0 / np.sqrt(12.0) / 100.0  # stderr of the mean of U[0,1]
    means = draws.mean(axis=0)
    for mean, target, scale in zip(means, (0.5, 0.5, 0.25, 0.25), (1.0, 1.0, 0.5, 0.5)):
        assert abs(mean - target) <= 3 * se_unit * scale


def test_generate_dataset_deterministic():
    m = build_hierarchy(2, 1)
    a = generate_dataset(m, 3, seed=5)
    b = generate_dataset(m, 3, seed=5)
    for sa, sb in zip(a.samples, b.samples):
        assert sa.params == sb.params
        assert np.array_equal(sa.uH, sb.uH)
        assert np.array_equal(sa.uh, sb.uh)


def test_generate_dataset_disjoint_seeds_distinct():
    m = build_hierarchy(2, 1)
    a = generate_dataset(m, 8, seed=1)
    b = generate_dataset(m, 8, seed=2)
    tuples = {s.params.as_tuple() for s in a.samples} | {
        s.params.as_tuple() for s in b.samples
    }
    assert len(tuples) == 16


def test_generate_dataset_rejects_zero_count():
    with pytest.raises(ValueError):
        generate_dataset(build_hierarchy(2, 1), 0, seed=1)


def test_fine_solution_beats_coarse_against_reference():
    m = build_hierarchy(4, 1)
    ds = generate_dataset(m, 4, seed=9)
    m_ref = build_hierarchy(4, 2)
    for s in ds.samples:
        u_ref = fe_solve(m_ref, 2, source_fn(s.params))
        err_H = error_vs_reference(FeFunction(m, 0, s.uH), u_ref)
        err_h = error_vs_reference(FeFunction(m, 1, s.uh), u_ref)
        assert err_h < err_H


def test_dataset_round_trip(tmp_path):
    m = build_hierarchy(2, 2)
    ds = generate_dataset(m, 3, seed=17)
    path = tmp_path / "ds.json"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert (back.n0, back.levels, back.seed, back.family) == (2, 2, 17, "verbatim")
    for sa, sb in zip(ds.samples, back.samples):
        assert sa.params == sb.params
        assert np.array_equal(sa.uH, sb.uH)  # 17 significant digits round-trip
        assert np.array_equal(sa.uh, sb.uh)


def test_dataset_float_round_trip_is_exact(tmp_path):
    m = build_hierarchy(1, 1)
    awkward = np.zeros(9)
    awkward[4] = 0.1 + 0.2  # not exactly representable as a short decimal
    ds = Dataset(
        n0=1, levels=1, seed=0, family="verbatim",
        samples=[type(generate_dataset(m, 1, seed=0).samples[0])(
            params=SourceParams(0.1, 2.0 / 3.0, 0.3, 0.4999999999999999),
            uH=np.zeros(4), uh=awkward,
        )],
    )
    path = tmp_path / "ds.json"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.samples[0].uh[4] == awkward[4]
    assert back.samples[0].params.c2 == 2.0 / 3.0


def test_truncated_dataset_fails_loudly(tmp_path):
    m = build_hierarchy(2, 1)
    path = tmp_path / "ds.json"
    save_dataset(generate_dataset(m, 2, seed=3), path)
    raw = path.read_text()
    path.write_text(raw[: len(raw) // 2])
    with pytest.raises(FormatError, match="JSON"):
        load_dataset(path)


def test_tampered_vector_length_names_sample(tmp_path):
    m = build_hierarchy(2, 1)
    path = tmp_path / "ds.json"
    save_dataset(generate_dataset(m, 3, seed=3), path)
    doc = json.loads(path.read_text())
    doc["samples"][1]["uh"] = doc["samples"][1]["uh"][:-1]
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="sample 1"):
        load_dataset(path)


def test_boundary_violation_names_sample(tmp_path):
    m = build_hierarchy(2, 1)
    path = tmp_path / "ds.json"
    save_dataset(generate_dataset(m, 2, seed=3), path)
    doc = json.loads(path.read_text())
    doc["samples"][0]["uH"][0] = 1.0
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="sample 0.*boundary"):
        load_dataset(path)


def test_version_mismatch_rejected(tmp_path):
    m = build_hierarchy(2, 1)
    path = tmp_path / "ds.json"
    save_dataset(generate_dataset(m, 2, seed=3), path)
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="format_version"):
        load_dataset(path)


def test_model_round_trip_bit_exact(tmp_path):
    net = mlp_init([13, 32, 9], seed=77)
    path = tmp_path / "model.json"
    save_model(net, path, stamp=ModelStamp(n0=4, level=1))
    back, stamp = load_model(path)
    assert back.dims == net.dims
    assert stamp == ModelStamp(n0=4, level=1, coarse_input="patch")
    for wa, wb in zip(net.weights, back.weights):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(net.biases, back.biases):
        assert np.array_equal(ba, bb)


def test_model_schema_keys(tmp_path):
    net = mlp_init([4, 8, 2], seed=1)
    path = tmp_path / "model.json"
    save_model(net, path)
    doc = json.loads(path.read_text())
    assert doc["dims"] == [4, 8, 2]
    assert doc["activation"] == "tanh"
    assert len(doc["weights"]) == 2 and len(doc["weights"][0]) == 32  # row-major flat
    assert len(doc["biases"][1]) == 2


def test_model_rejects_bad_documents(tmp_path):
    net = mlp_init([4, 8, 2], seed=1)
    path = tmp_path / "model.json"
    save_model(net, path)
    doc = json.loads(path.read_text())
    doc["weights"][0] = doc["weights"][0][:-1]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="layer 0"):
        load_model(bad)
    doc = json.loads(path.read_text())
    doc["activation"] = "relu"
    bad.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="activation"):
        load_model(bad)


def test_model_without_stamp_loads_as_none(tmp_path):
    net = mlp_init([4, 8, 2], seed=1)
    path = tmp_path / "model.json"
    save_model(net, path)
    _, stamp = load_model(path)
    assert stamp is None
