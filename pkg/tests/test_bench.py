import dataclasses
import json
import math
import statistics

import numpy as np
import pytest

from fidreg.bench import (
    CSV_HEADER,
    SceneSpec,
    TrialRecord,
    _record_row,
    _status_token,
    generate_scene,
    parse_scene_grid,
    run_benchmark,
    summarize,
    target_registration_error,
    write_records_csv,
    write_summary_json,
)
from fidreg.config import ConfigError
from fidreg.errors import (
    DegenerateTriangleError,
    InsufficientMarkersError,
    NoMatchError,
)
from fidreg.rigid import RigidTransform, axis_angle_rotation
from fidreg.rng import SplitMix64


def test_generate_scene_is_deterministic():
    spec = SceneSpec(n_markers=7, noise_sigma_mm=1.0, dropout_count=2, decoy_count=3, seed=42)
    ct_a, dev_a, truth_a = generate_scene(spec)
    ct_b, dev_b, truth_b = generate_scene(spec)
    np.testing.assert_array_equal(ct_a.points, ct_b.points)
    np.testing.assert_array_equal(dev_a.points, dev_b.points)
    assert dev_a.ids == dev_b.ids
    assert truth_a == truth_b


def test_noiseless_scene_maps_ids_exactly():
    spec = SceneSpec(n_markers=6, seed=9)
    ct, device, truth = generate_scene(spec)
    mapped = truth.apply(ct.points)
    for row, marker_id in enumerate(device.ids):
        assert marker_id is not None
        np.testing.assert_array_equal(device.points[row], mapped[marker_id])


def test_device_ids_track_dropout_and_decoys():
    spec = SceneSpec(n_markers=8, dropout_count=3, decoy_count=4, seed=4)
    ct, device, _ = generate_scene(spec)
    assert len(ct) == 8 and ct.ids == tuple(range(8))
    assert len(device) == 8 - 3 + 4
    real = [i for i in device.ids if i is not None]
    assert len(real) == 5 and len(set(real)) == 5
    assert set(real) <= set(range(8))
    assert device.ids.count(None) == 4


def test_noise_sigma_matches_request():
    spec = SceneSpec(n_markers=10000, noise_sigma_mm=5.0, seed=123)
    ct, device, truth = generate_scene(spec)
    mapped = truth.apply(ct.points)
    residuals = np.array(
        [device.points[row] - mapped[i] for row, i in enumerate(device.ids)]
    )
    for axis in range(3):
        assert residuals[:, axis].std() == pytest.approx(5.0, rel=0.03)
        assert abs(residuals[:, axis].mean()) < 0.2


def test_placement_extent_bounds_ct_points():
    spec = SceneSpec(n_markers=500, seed=3, placement_extent=(100.0, 40.0, 10.0))
    ct, _, _ = generate_scene(spec)
    for axis, half in enumerate((50.0, 20.0, 5.0)):
        assert np.all(np.abs(ct.points[:, axis]) <= half)
        assert ct.points[:, axis].max() > half * 0.9  # actually fills the box


def test_draw_order_contract_replicated_from_the_raw_stream():
    # Full independent replication of the documented stream layout.
    spec = SceneSpec(
        n_markers=8, noise_sigma_mm=1.5, dropout_count=2, decoy_count=3, seed=77
    )
    ct, device, truth = generate_scene(spec)

    rng = SplitMix64(77)
    extent = np.array(spec.placement_extent)
    ct_expected = (rng.uniforms(24).reshape(8, 3) - 0.5) * extent
    rotation = rng.rotation()
    translation = (rng.uniforms(3) - 0.5) * np.array(spec.translation_extent)
    noise = rng.normals(24).reshape(8, 3)
    device_expected = ct_expected @ rotation.T + translation + 1.5 * noise
    order = list(range(8))
    rng.shuffle(order)
    survivors = [i for i in range(8) if i not in set(order[:2])]
    corners = np.array(
        [
            [sx * extent[0] / 2, sy * extent[1] / 2, sz * extent[2] / 2]
            for sx in (-1, 1)
            for sy in (-1, 1)
            for sz in (-1, 1)
        ]
    )
    moved = corners @ rotation.T + translation
    lo, hi = moved.min(axis=0), moved.max(axis=0)
    decoys = lo + rng.uniforms(9).reshape(3, 3) * (hi - lo)
    rows = [(device_expected[i], i) for i in survivors] + [(p, None) for p in decoys]
    rng.shuffle(rows)

    np.testing.assert_array_equal(ct.points, ct_expected)
    np.testing.assert_array_equal(truth.rotation, rotation)
    np.testing.assert_array_equal(truth.translation, translation)
    assert device.ids == tuple(i for _, i in rows)
    np.testing.assert_array_equal(device.points, np.array([p for p, _ in rows]))


def test_identity_and_explicit_transforms_skip_the_pose_draws():
    base = SceneSpec(n_markers=5, noise_sigma_mm=0.5, seed=11, true_transform="identity")
    ct, device, truth = generate_scene(base)
    assert truth == RigidTransform.identity()
    rng = SplitMix64(11)
    ct_expected = (rng.uniforms(15).reshape(5, 3) - 0.5) * np.array(base.placement_extent)
    noise = rng.normals(15).reshape(5, 3)
    np.testing.assert_array_equal(ct.points, ct_expected)
    # same seed, explicit transform: identical ct points and noise stream
    explicit = RigidTransform(axis_angle_rotation([0, 0, 1], 0.3), np.array([1.0, 2.0, 3.0]))
    spec = SceneSpec(n_markers=5, noise_sigma_mm=0.5, seed=11, true_transform=explicit)
    ct2, device2, truth2 = generate_scene(spec)
    assert truth2 == explicit
    np.testing.assert_array_equal(ct2.points, ct_expected)
    rows = [(p, i) for i, p in enumerate(explicit.apply(ct_expected) + 0.5 * noise)]
    rng.shuffle(rows)  # device rows always get one final shuffle
    assert device2.ids == tuple(i for _, i in rows)
    np.testing.assert_array_equal(device2.points, np.array([p for p, _ in rows]))


def test_spec_validation():
    with pytest.raises(ConfigError, match="n_markers"):
        SceneSpec(n_markers=2)
    with pytest.raises(ConfigError, match="at least 3 device markers"):
        SceneSpec(n_markers=5, dropout_count=3)
    with pytest.raises(ConfigError, match="noise_sigma_mm"):
        SceneSpec(n_markers=4, noise_sigma_mm=-0.1)
    with pytest.raises(ConfigError, match="true_transform"):
        SceneSpec(n_markers=4, true_transform="mirror")
    with pytest.raises(ConfigError, match="placement_extent"):
        SceneSpec(n_markers=4, placement_extent=(10.0, 0.0, 10.0))
    assert SceneSpec(n_markers=4, seed=-1).seed == (1 << 64) - 1  # wraps like the rng


def test_spec_text_round_trip():
    spec = SceneSpec(
        n_markers=9,
        noise_sigma_mm=2.5,
        dropout_count=1,
        decoy_count=2,
        seed=314,
        placement_extent=(250.0, 250.0, 100.0),
    )
    assert SceneSpec.from_text(spec.to_text()) == spec
    identity = SceneSpec(n_markers=4, true_transform="identity")
    again = SceneSpec.from_text(identity.to_text())
    assert again.true_transform == RigidTransform.identity()
    explicit = SceneSpec(
        n_markers=4,
        true_transform=RigidTransform(axis_angle_rotation([1, 0, 0], 0.1), np.zeros(3)),
    )
    with pytest.raises(ConfigError, match="text form"):
        explicit.to_text()


def test_parse_scene_grid_blocks_and_errors():
    grid = parse_scene_grid(
        "n_markers = 4\nseed = 1\n\n\nn_markers = 6\nnoise_sigma_mm = 2.0\n"
    )
    assert [s.n_markers for s in grid] == [4, 6]
    with pytest.raises(ConfigError, match="scene block 2"):
        parse_scene_grid("n_markers = 4\n\nn_markers = 2\n")
    with pytest.raises(ConfigError, match="no scene blocks"):
        parse_scene_grid("\n\n")


def test_tre_pure_translation():
    truth = RigidTransform.identity()
    estimate = RigidTransform(np.eye(3), np.array([2.0, 0.0, 0.0]))
    targets = np.array([[0.0, 0.0, 0.0], [50.0, -20.0, 10.0]])
    assert target_registration_error(estimate, truth, targets) == 2.0


def test_tre_lever_arm():
    theta = 0.005
    truth = RigidTransform.identity()
    estimate = RigidTransform(axis_angle_rotation([0, 0, 1], theta), np.zeros(3))
    targets = np.array([[100.0, 0.0, 0.0]])
    expected = 2.0 * 100.0 * math.sin(theta / 2.0)
    assert target_registration_error(estimate, truth, targets) == pytest.approx(
        expected, abs=1e-9
    )
    with pytest.raises(ValueError, match="at least one"):
        target_registration_error(estimate, truth, np.zeros((0, 3)))


def test_status_tokens_are_kebab_case():
    assert _status_token(NoMatchError("x")) == "no-match"
    assert _status_token(InsufficientMarkersError(found=2)) == "insufficient-markers"
    assert _status_token(DegenerateTriangleError("x")) == "degenerate-triangle"


def test_record_row_golden_line():
    record = TrialRecord(
        method="triangle",
        seed=5,
        n_markers=8,
        noise_sigma_mm=2.0,
        dropout=1,
        decoys=2,
        tre_mm=1.5,
        rot_err_rad=0.001,
        trans_err_mm=0.25,
        time_us=123.0,
        flipped=False,
        status="ok",
    )
    assert _record_row(record) == "triangle,5,8,2.0,1,2,1.5,0.001,0.25,123.0,false,ok"
    failed = dataclasses.replace(
        record,
        status="no-match",
        tre_mm=float("nan"),
        rot_err_rad=float("nan"),
        trans_err_mm=float("nan"),
        flipped=True,
    )
    assert _record_row(failed) == "triangle,5,8,2.0,1,2,nan,nan,nan,123.0,true,no-match"
    with pytest.raises(ValueError, match="tre_mm"):
        dataclasses.replace(record, tre_mm=float("nan"))


def test_csv_header_and_file_shape(tmp_path):
    assert CSV_HEADER == (
        "method,seed,n_markers,noise_sigma_mm,dropout,decoys,"
        "tre_mm,rot_err_rad,trans_err_mm,time_us,flipped,status"
    )
    records = run_benchmark([SceneSpec(n_markers=4, seed=2)], trials_per_cell=2)
    path = tmp_path / "records.csv"
    write_records_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + len(records)
    assert all(line.count(",") == 11 for line in lines)


def test_run_benchmark_ordering_and_seeds():
    grid = [SceneSpec(n_markers=4, seed=100), SceneSpec(n_markers=5, seed=200)]
    records = run_benchmark(grid, trials_per_cell=3)
    assert len(records) == 2 * 2 * 3
    assert [r.method for r in records[:6]] == ["triangle"] * 3 + ["icp"] * 3
    assert [r.seed for r in records[:3]] == [100, 101, 102]
    assert [r.n_markers for r in records[6:]] == [5] * 6
    # methods subset and canonical ordering regardless of request order
    icp_only = run_benchmark(grid, methods=("icp",), trials_per_cell=1)
    assert [r.method for r in icp_only] == ["icp", "icp"]
    reordered = run_benchmark([grid[0]], methods=("icp", "triangle"), trials_per_cell=1)
    assert [r.method for r in reordered] == ["triangle", "icp"]
    with pytest.raises(ConfigError, match="unknown method"):
        run_benchmark(grid, methods=("horn",))
    with pytest.raises(ConfigError, match="trials_per_cell"):
        run_benchmark(grid, trials_per_cell=0)


def test_run_benchmark_reproducible_except_timing():
    grid = [SceneSpec(n_markers=5, noise_sigma_mm=1.0, seed=50)]
    a = run_benchmark(grid, trials_per_cell=4)
    b = run_benchmark(grid, trials_per_cell=4)
    for ra, rb in zip(a, b):
        da, db = dataclasses.asdict(ra), dataclasses.asdict(rb)
        da.pop("time_us"), db.pop("time_us")
        assert (da == db) or (
            math.isnan(da["tre_mm"])
            and math.isnan(db["tre_mm"])
            and da["status"] == db["status"]
        )


def test_noiseless_trials_recover_truth_to_float_precision():
    grid = [SceneSpec(n_markers=n, seed=1000 + n) for n in range(3, 8)]
    records = run_benchmark(grid, methods=("triangle",), trials_per_cell=2)
    assert all(r.status == "ok" for r in records)
    assert max(r.tre_mm for r in records) < 1e-9
    assert not any(r.flipped for r in records)


def test_overwhelming_noise_becomes_a_status_not_an_exception():
    # noise far beyond the scale tolerance: the run must carry on
    bad = SceneSpec(n_markers=3, noise_sigma_mm=150.0, seed=880)
    good = SceneSpec(n_markers=6, seed=12)
    records = run_benchmark([bad, good], methods=("triangle",), trials_per_cell=1)
    assert records[0].status == "no-match"
    assert math.isnan(records[0].tre_mm)
    assert records[1].status == "ok" and records[1].tre_mm < 1e-9


def test_summarize_means_and_failures(tmp_path):
    def rec(method, seed, tre, status="ok"):
        nan = float("nan")
        ok = status == "ok"
        return TrialRecord(
            method=method,
            seed=seed,
            n_markers=4,
            noise_sigma_mm=1.0,
            dropout=0,
            decoys=0,
            tre_mm=tre if ok else nan,
            rot_err_rad=0.01 if ok else nan,
            trans_err_mm=0.5 if ok else nan,
            time_us=100.0,
            flipped=ok and seed % 2 == 1,
            status=status,
        )

    records = [
        rec("triangle", 1, 2.0),
        rec("triangle", 2, 4.0),
        rec("triangle", 3, 0.0, status="no-match"),
        rec("icp", 1, 0.0, status="degenerate-geometry"),
    ]
    summary = summarize(records)
    assert len(summary) == 2
    tri = summary[0]
    assert tri["method"] == "triangle"
    assert tri["trials"] == 3 and tri["failures"] == 1 and tri["flipped"] == 1
    assert tri["tre_mm"]["mean"] == pytest.approx(3.0)
    assert tri["tre_mm"]["std"] == pytest.approx(statistics.stdev([2.0, 4.0]))
    icp = summary[1]
    assert icp["failures"] == 1 and icp["tre_mm"] is None

    path = tmp_path / "summary.json"
    write_summary_json(summary, path)
    loaded = json.loads(path.read_text())
    assert loaded["cells"][0]["tre_mm"]["mean"] == pytest.approx(3.0)


def test_single_trial_std_is_zero():
    records = run_benchmark([SceneSpec(n_markers=4, seed=7)], methods=("triangle",))
    (cell,) = summarize(records[:1])
    assert cell["tre_mm"]["std"] == 0.0
