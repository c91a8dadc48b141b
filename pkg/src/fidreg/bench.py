"""Synthetic-scene generation and the Monte-Carlo benchmark harness.

Scenes are reproducible across platforms because every random draw comes from
the pinned ``SplitMix64`` stream in a frozen order.  For a spec with
``n_markers = n`` the stream is consumed exactly as follows:

1. ``uniforms(3*n)`` — CT marker positions, point-major (x, y, z per point),
   mapped into the placement box centred on the origin
   (``[-extent/2, +extent/2]`` per axis).
2. If ``true_transform`` is ``"random"``: a rotation via ``rotation()``
   (uniform over SO(3); four normals per attempt), then ``uniforms(3)`` for
   the translation, mapped into the translation box centred on the origin.
   An explicit :class:`RigidTransform` consumes nothing.
3. ``normals(3*n)`` — device-point noise, point-major, drawn *even when
   ``noise_sigma_mm`` is zero* so that cells differing only in sigma see the
   same dropouts, decoys and shuffle.
4. If ``dropout_count > 0``: ``shuffle`` of the index list ``[0..n-1]``; the
   first ``dropout_count`` entries drop, the rest survive in their original
   relative order.
5. If ``decoy_count > 0``: ``uniforms(3*decoy_count)``, point-major, mapped
   into the axis-aligned bounding box of the transformed placement box.
6. ``shuffle`` of the assembled device list (survivors then decoys).

Device markers carry the originating CT index as their id (decoys carry
none); ids exist for test bookkeeping only and are never shown to the
registration methods.

Error metrics per trial: ``tre_mm`` is the mean displacement between the
estimated and true transforms over the CT marker positions plus the scene-box
centre (the origin); ``rot_err_rad`` is the angle of the rotation
``estimated . inverse(truth)``; ``trans_err_mm`` is the norm of the
difference of the two translation vectors.  Timing wraps the registration
call only — triangle-table construction plus :func:`register` for the
triangle method, :func:`icp_register` for ICP — never scene generation or
metric evaluation, and every (spec, method) cell runs one discarded warm-up
trial first.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
import time
from dataclasses import dataclass, field

import numpy as np

from .config import (
    format_float,
    format_kv,
    format_triple,
    kv_float,
    kv_int,
    kv_triple,
    parse_kv_text,
    require_keys,
)
from .errors import ConfigError, DomainError
from .markers import MarkerSet
from .icp import IcpConfig, icp_register
from .rigid import RigidTransform, compose, inverse, rotation_angle
from .rng import SplitMix64
from .triangles import RegistrationConfig, TriangleTable, register

METHODS = ("triangle", "icp")

CSV_HEADER = (
    "method,seed,n_markers,noise_sigma_mm,dropout,decoys,"
    "tre_mm,rot_err_rad,trans_err_mm,time_us,flipped,status"
)

_SPEC_KEYS = (
    "n_markers",
    "noise_sigma_mm",
    "dropout_count",
    "decoy_count",
    "seed",
    "placement_extent",
    "translation_extent",
    "true_transform",
)


@dataclass
class SceneSpec:
    """One benchmark cell: marker count, corruption levels, geometry, seed."""

    n_markers: int
    noise_sigma_mm: float = 0.0
    dropout_count: int = 0
    decoy_count: int = 0
    seed: int = 0
    placement_extent: tuple = (300.0, 300.0, 150.0)
    translation_extent: tuple = (200.0, 200.0, 200.0)
    true_transform: RigidTransform | str = "random"

    def __post_init__(self) -> None:
        self.n_markers = int(self.n_markers)
        self.noise_sigma_mm = float(self.noise_sigma_mm)
        self.dropout_count = int(self.dropout_count)
        self.decoy_count = int(self.decoy_count)
        self.seed = int(self.seed) % (1 << 64)
        self.placement_extent = tuple(float(e) for e in self.placement_extent)
        self.translation_extent = tuple(float(e) for e in self.translation_extent)
        if self.n_markers < 3:
            raise ConfigError("n_markers must be at least 3")
        if self.noise_sigma_mm < 0.0:
            raise ConfigError("noise_sigma_mm must be >= 0")
        if self.dropout_count < 0 or self.decoy_count < 0:
            raise ConfigError("dropout_count and decoy_count must be >= 0")
        if self.n_markers - self.dropout_count < 3:
            raise ConfigError(
                "n_markers - dropout_count must leave at least 3 device markers"
            )
        for name, extent in (
            ("placement_extent", self.placement_extent),
            ("translation_extent", self.translation_extent),
        ):
            if len(extent) != 3 or any(e <= 0.0 for e in extent):
                raise ConfigError(f"{name} must be three positive lengths")
        if isinstance(self.true_transform, str):
            if self.true_transform not in ("random", "identity"):
                raise ConfigError(
                    "true_transform must be 'random', 'identity', or a transform"
                )
            if self.true_transform == "identity":
                self.true_transform = RigidTransform.identity()
        elif not isinstance(self.true_transform, RigidTransform):
            raise ConfigError(
                "true_transform must be 'random', 'identity', or a transform"
            )

    @classmethod
    def from_text(cls, text: str) -> "SceneSpec":
        kv = parse_kv_text(text)
        require_keys(kv, required=("n_markers",), known=_SPEC_KEYS)
        kwargs: dict = {"n_markers": kv_int(kv, "n_markers")}
        if "noise_sigma_mm" in kv:
            kwargs["noise_sigma_mm"] = kv_float(kv, "noise_sigma_mm")
        if "dropout_count" in kv:
            kwargs["dropout_count"] = kv_int(kv, "dropout_count")
        if "decoy_count" in kv:
            kwargs["decoy_count"] = kv_int(kv, "decoy_count")
        if "seed" in kv:
            kwargs["seed"] = kv_int(kv, "seed")
        if "placement_extent" in kv:
            kwargs["placement_extent"] = kv_triple(kv, "placement_extent")
        if "translation_extent" in kv:
            kwargs["translation_extent"] = kv_triple(kv, "translation_extent")
        if "true_transform" in kv:
            kwargs["true_transform"] = kv["true_transform"]
        return cls(**kwargs)

    def to_text(self) -> str:
        pairs = {
            "n_markers": str(self.n_markers),
            "noise_sigma_mm": format_float(self.noise_sigma_mm),
            "dropout_count": str(self.dropout_count),
            "decoy_count": str(self.decoy_count),
            "seed": str(self.seed),
            "placement_extent": format_triple(self.placement_extent),
            "translation_extent": format_triple(self.translation_extent),
        }
        if self.true_transform == "random":
            pairs["true_transform"] = "random"
        elif self.true_transform == RigidTransform.identity():
            pairs["true_transform"] = "identity"
        else:
            raise ConfigError(
                "only 'random' and 'identity' transforms have a text form"
            )
        return format_kv(pairs)


def parse_scene_grid(text: str) -> list[SceneSpec]:
    """Parse a grid file: scene-spec blocks separated by blank lines."""
    blocks: list[str] = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            blocks.append("\n".join(current))
            current = []
    if current:
        blocks.append("\n".join(current))
    specs = []
    for number, block in enumerate(blocks, start=1):
        try:
            specs.append(SceneSpec.from_text(block))
        except ConfigError as exc:
            raise ConfigError(f"scene block {number}: {exc}") from exc
    if not specs:
        raise ConfigError("grid contains no scene blocks")
    return specs


def generate_scene(spec: SceneSpec) -> tuple[MarkerSet, MarkerSet, RigidTransform]:
    """Draw one scene; see the module docstring for the frozen stream order."""
    rng = SplitMix64(spec.seed)
    n = spec.n_markers
    extent = np.array(spec.placement_extent)

    ct_points = (rng.uniforms(3 * n).reshape(n, 3) - 0.5) * extent

    if isinstance(spec.true_transform, RigidTransform):
        truth = spec.true_transform
    else:
        rotation = rng.rotation()
        translation = (rng.uniforms(3) - 0.5) * np.array(spec.translation_extent)
        truth = RigidTransform(rotation, translation)

    noise = rng.normals(3 * n).reshape(n, 3)
    device_points = truth.apply(ct_points) + spec.noise_sigma_mm * noise

    survivors = list(range(n))
    if spec.dropout_count > 0:
        order = list(range(n))
        rng.shuffle(order)
        dropped = set(order[: spec.dropout_count])
        survivors = [i for i in range(n) if i not in dropped]

    rows: list[tuple[np.ndarray, int | None]] = [
        (device_points[i], i) for i in survivors
    ]
    if spec.decoy_count > 0:
        corners = np.array(
            [
                [sx * extent[0] / 2.0, sy * extent[1] / 2.0, sz * extent[2] / 2.0]
                for sx in (-1.0, 1.0)
                for sy in (-1.0, 1.0)
                for sz in (-1.0, 1.0)
            ]
        )
        moved = truth.apply(corners)
        lo = moved.min(axis=0)
        hi = moved.max(axis=0)
        decoys = lo + rng.uniforms(3 * spec.decoy_count).reshape(-1, 3) * (hi - lo)
        rows.extend((p, None) for p in decoys)
    rng.shuffle(rows)

    ct = MarkerSet(frame="ct", points=ct_points, ids=tuple(range(n)))
    device = MarkerSet(
        frame="device",
        points=np.array([p for p, _ in rows], dtype=np.float64).reshape(-1, 3),
        ids=tuple(i for _, i in rows),
    )
    return ct, device, truth


def target_registration_error(
    estimated: RigidTransform, truth: RigidTransform, targets: np.ndarray
) -> float:
    """Mean displacement between the two transforms over the target points."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    if len(targets) == 0:
        raise ValueError("need at least one target point")
    return float(
        np.linalg.norm(estimated.apply(targets) - truth.apply(targets), axis=1).mean()
    )


@dataclass
class TrialRecord:
    """One registration attempt; error fields are nan when status != ok."""

    method: str
    seed: int
    n_markers: int
    noise_sigma_mm: float
    dropout: int
    decoys: int
    tre_mm: float
    rot_err_rad: float
    trans_err_mm: float
    time_us: float
    flipped: bool
    status: str

    def __post_init__(self) -> None:
        if self.status == "ok":
            for name in ("tre_mm", "rot_err_rad", "trans_err_mm"):
                value = getattr(self, name)
                if not (math.isfinite(value) and value >= 0.0):
                    raise ValueError(f"{name} must be finite and >= 0, got {value}")


def _status_token(exc: DomainError) -> str:
    # NoMatchError -> "no-match"; comma-free and stable, downstream tooling keys on these.
    name = type(exc).__name__.removesuffix("Error")
    return re.sub(r"(?<=[a-z])(?=[A-Z])", "-", name).lower()


def _run_trial(spec: SceneSpec, method: str, targets_origin: np.ndarray) -> TrialRecord:
    ct, device, truth = generate_scene(spec)
    flipped = False
    status = "ok"
    estimated = None
    if method == "triangle":
        start = time.perf_counter()
        try:
            table = TriangleTable()
            for point in device.points:
                table.insert_marker(point)
            result = register(ct, table, RegistrationConfig())
            estimated = result.transform
            flipped = result.flipped
        except DomainError as exc:
            status = _status_token(exc)
        elapsed = time.perf_counter() - start
    elif method == "icp":
        start = time.perf_counter()
        try:
            estimated = icp_register(ct, device, IcpConfig()).transform
        except DomainError as exc:
            status = _status_token(exc)
        elapsed = time.perf_counter() - start
    else:
        raise ConfigError(f"unknown method {method!r} (choose from {METHODS})")

    if estimated is None:
        tre = rot_err = trans_err = float("nan")
    else:
        targets = np.vstack([ct.points, targets_origin])
        tre = target_registration_error(estimated, truth, targets)
        rot_err = rotation_angle(compose(estimated, inverse(truth)).rotation)
        trans_err = float(
            np.linalg.norm(estimated.translation - truth.translation)
        )
    return TrialRecord(
        method=method,
        seed=spec.seed,
        n_markers=spec.n_markers,
        noise_sigma_mm=spec.noise_sigma_mm,
        dropout=spec.dropout_count,
        decoys=spec.decoy_count,
        tre_mm=tre,
        rot_err_rad=rot_err,
        trans_err_mm=trans_err,
        time_us=elapsed * 1e6,
        flipped=flipped,
        status=status,
    )


def run_benchmark(
    spec_grid: list[SceneSpec],
    methods: tuple = METHODS,
    trials_per_cell: int = 1,
) -> list[TrialRecord]:
    """Run every (spec, method) cell; trial t reseeds the spec at seed + t.

    Records come back ordered by grid position, then method (triangle before
    icp), then trial index.  Failures are per-trial records with a status
    token and nan errors, never exceptions.
    """
    if trials_per_cell < 1:
        raise ConfigError("trials_per_cell must be >= 1")
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r} (choose from {METHODS})")
    origin = np.zeros((1, 3))
    records = []
    for spec in spec_grid:
        for method in (m for m in METHODS if m in methods):
            _run_trial(spec, method, origin)  # warm-up, discarded
            for trial in range(trials_per_cell):
                shifted = dataclasses.replace(spec, seed=spec.seed + trial)
                records.append(_run_trial(shifted, method, origin))
    return records


def _record_row(record: TrialRecord) -> str:
    return ",".join(
        (
            record.method,
            str(record.seed),
            str(record.n_markers),
            format_float(record.noise_sigma_mm),
            str(record.dropout),
            str(record.decoys),
            format_float(record.tre_mm),
            format_float(record.rot_err_rad),
            format_float(record.trans_err_mm),
            format_float(record.time_us),
            "true" if record.flipped else "false",
            record.status,
        )
    )


def write_records_csv(records: list[TrialRecord], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(CSV_HEADER + "\n")
        for record in records:
            fh.write(_record_row(record) + "\n")


def _mean_std(values: list[float]) -> tuple[float, float]:
    data = np.array(values)
    mean = float(data.mean())
    std = 0.0 if len(data) < 2 else float(data.std(ddof=1))
    return mean, std


def summarize(records: list[TrialRecord]) -> list[dict]:
    """Per-cell aggregates (cell = method + scene parameters, in record order).

    Means and sample standard deviations cover successful trials only;
    ``failures`` counts the rest.
    """
    cells: dict[tuple, dict] = {}
    for record in records:
        key = (
            record.method,
            record.n_markers,
            record.noise_sigma_mm,
            record.dropout,
            record.decoys,
        )
        cell = cells.setdefault(
            key,
            {
                "method": record.method,
                "n_markers": record.n_markers,
                "noise_sigma_mm": record.noise_sigma_mm,
                "dropout": record.dropout,
                "decoys": record.decoys,
                "trials": 0,
                "failures": 0,
                "flipped": 0,
                "_ok": [],
            },
        )
        cell["trials"] += 1
        if record.status == "ok":
            cell["_ok"].append(record)
            if record.flipped:
                cell["flipped"] += 1
        else:
            cell["failures"] += 1
    summary = []
    for cell in cells.values():
        ok: list[TrialRecord] = cell.pop("_ok")
        for name in ("tre_mm", "rot_err_rad", "trans_err_mm", "time_us"):
            if ok:
                mean, std = _mean_std([getattr(r, name) for r in ok])
                cell[name] = {"mean": mean, "std": std}
            else:
                cell[name] = None
        summary.append(cell)
    return summary


def write_summary_json(summary: list[dict], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump({"cells": summary}, fh, indent=2, sort_keys=False)
        fh.write("\n")
