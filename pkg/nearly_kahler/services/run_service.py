"""Run service module - command implementations shared by the CLI and
library callers.

This module provides:
1. classify: orbit type and complex structure of a 3-form
2. verify_model: residual and stability sweep of a homogeneous model
3. solve_regular: integration from a point of N
4. solve_singular / scan: solutions from the singular orbit, one
   manifest per c1, scans fanned out to a process pool
"""

import logging
import os
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations
from pathlib import Path

import numpy as np

from nearly_kahler import __version__
from nearly_kahler.algebra.forms6 import (
    KForm,
    complex_structure,
    multi_indices,
    stability_invariant,
    volume_form,
)
from nearly_kahler.algebra.invariant_frame import metric_matrix, stability_data
from nearly_kahler.config import settings
from nearly_kahler.errors import DomainError
from nearly_kahler.models.homogeneous import (
    MODEL_MU,
    MODEL_RANGE,
    ModelId,
    model_h_point,
    model_jet2,
)
from nearly_kahler.ode.curves import HState, read_csv
from nearly_kahler.ode.nk_ode import (
    f_system_residual,
    integrate_span,
    perturb_in_variety,
    require_membership,
)
from nearly_kahler.ode.transforms import (
    apply_to_states,
    canonical_representative,
    point_group,
)
from nearly_kahler.schema.run_schema import (
    ClassifyResult,
    ModelVerification,
    RunConfig,
    RunManifest,
    ScanSummary,
    SingularVerification,
)
from nearly_kahler.singular.singular_ivp import matched_model, reconstruct_nk

logger = logging.getLogger(__name__)

# Model residuals must stay below this
MODEL_TOL = 1e-9

MATCH_LABELS = {ModelId.S3XS3: "S3xS3", ModelId.SPHERE6: "S6"}


# =============================================================================
# Parsing
# =============================================================================


def parse_floats(text: str, expected: int | None = None) -> list[float]:
    """Parse comma or whitespace separated floats.

    Raises:
        ValueError: Naming the position of the first bad entry, or on a
            wrong count.
    """
    items = [item for item in text.replace(",", " ").split() if item]
    values = []
    for position, item in enumerate(items, start=1):
        try:
            values.append(float(item))
        except ValueError as err:
            raise ValueError(
                f"entry {position}: cannot parse {item!r} as a number"
            ) from err
    if expected is not None and len(values) != expected:
        raise ValueError(f"expected {expected} numbers, got {len(values)}")
    return values


def parse_grid(text: str) -> list[float]:
    """'start:stop:step' (inclusive stop) or an explicit list."""
    if ":" not in text:
        return parse_floats(text)
    parts = parse_floats(text.replace(":", " "), expected=3)
    start, stop, step = parts
    if step <= 0 or stop < start:
        raise ValueError(f"invalid grid {text!r}")
    count = int(round((stop - start) / step)) + 1
    return [float(v) for v in start + step * np.arange(count)]


# =============================================================================
# Commands
# =============================================================================


def classify(coeffs: Sequence[float], vol_scale: float = 1.0) -> ClassifyResult:
    """Classify the 3-form with coefficients in the e^{ijk} basis order.

    Args:
        coeffs: 20 coefficients ordered like multi_indices(3)
        vol_scale: Volume form is vol_scale * e^012345

    Returns:
        ClassifyResult with J_theta when the form is stable
    """
    if len(coeffs) != len(multi_indices(3)):
        raise ValueError(f"a 3-form needs 20 coefficients, got {len(coeffs)}")
    theta = KForm(3, np.asarray(coeffs, dtype=float))
    vol = volume_form(vol_scale)
    stability = stability_invariant(theta, vol)
    j_matrix = None
    if stability.is_stable:
        j_matrix = complex_structure(theta, vol).matrix.tolist()
    return ClassifyResult(
        tag=stability.tag.value,
        value=stability.value,
        residual=stability.residual,
        j_matrix=j_matrix,
    )


def verify_model(model: ModelId | str, samples: int = 100) -> ModelVerification:
    """Evaluate residuals, stability and metric positivity on interior samples."""
    model = ModelId(model)
    lo, hi = MODEL_RANGE[model]
    max_residual = max_constraint = 0.0
    stability_ok = positivity_ok = True
    for t in np.linspace(lo, hi, samples + 2)[1:-1]:
        jet, fpp = model_jet2(model, float(t))
        residual = np.abs(f_system_residual(jet, fpp))
        max_residual = max(max_residual, float(residual[:4].max()))
        max_constraint = max(max_constraint, float(residual[4]))
        if not stability_data(jet).ok:
            stability_ok = False
            continue
        gram = metric_matrix(jet)
        if np.linalg.eigvalsh((gram + gram.T) / 2).min() <= 0:
            positivity_ok = False
    passed = (
        max_residual < MODEL_TOL
        and max_constraint < MODEL_TOL
        and stability_ok
        and positivity_ok
    )
    if not passed:
        logger.warning("Model %s failed verification", model.value)
    return ModelVerification(
        model=model.value,
        mu=MODEL_MU[model],
        samples=samples,
        max_residual=max_residual,
        max_constraint=max_constraint,
        stability_ok=stability_ok,
        positivity_ok=positivity_ok,
        passed=passed,
    )


def _write_manifest(manifest: RunManifest, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest.files.append(str(path))
    path.write_text(manifest.model_dump_json(indent=2))
    return path


def _matched_point_model(point: np.ndarray, mu: float) -> str | None:
    canonical = canonical_representative(point)
    for model in ModelId:
        if MODEL_MU[model] != mu:
            continue
        reference = canonical_representative(model_h_point(model).point7)
        if np.max(np.abs(canonical - reference)) < settings.match_tol:
            return model.value
    return None


def solve_regular(config: RunConfig) -> RunManifest:
    """Integrate from a point of N and write the curve and its manifest.

    The point comes from ``config.point`` or, failing that, from the base
    point of ``config.model``. With ``config.perturb`` set it is moved by a
    random step of that scale seeded by ``config.seed`` and projected back
    onto N.

    Raises:
        MembershipError: If the point is not in N.
    """
    started = time.perf_counter()
    mu = config.mu
    if config.point is not None:
        point = np.asarray(config.point, dtype=float)
    elif config.model is not None:
        model = ModelId(config.model)
        point, mu = model_h_point(model).point7, MODEL_MU[model]
    else:
        raise DomainError("solve-regular needs a point or a model")
    if config.perturb is not None:
        rng = np.random.default_rng(config.seed)
        point = perturb_in_variety(point, mu, config.perturb, rng)
        logger.info(
            "Perturbed start point by scale %g (seed %d)",
            config.perturb,
            config.seed,
        )
    x0 = HState.from_point7(point, mu)
    require_membership(x0)
    curve = integrate_span(x0, config.span, config.tol, config.n_points)
    out = Path(config.out)
    csv_path = curve.write_csv(out / "regular.csv")
    manifest = RunManifest(
        version=__version__,
        command="solve-regular",
        config=config.model_dump(),
        s_max=config.span[1],
        drift=curve.drift.tolist(),
        integral_max=curve.integral_max.tolist(),
        matched_model=_matched_point_model(point, mu),
        canonical=canonical_representative(point).tolist(),
        csv_path=str(csv_path),
        files=[str(csv_path)],
    )
    manifest.wall_time = time.perf_counter() - started
    _write_manifest(manifest, out / "regular.json")
    return manifest


def singular_run(config: RunConfig, c1: float) -> RunManifest:
    """One singular-orbit solve with verification, CSV and manifest."""
    started = time.perf_counter()
    curve, _, report = reconstruct_nk(
        c1,
        s_max=config.s_max,
        order=config.series_order,
        s_switch=config.s_switch,
        tol=config.tol,
        n_points=config.n_points,
    )
    model = matched_model(curve)
    stem = f"singular_c1_{c1:.6g}"
    out = Path(config.out)
    csv_path = curve.write_csv(out / f"{stem}.csv")
    manifest = RunManifest(
        version=__version__,
        command="solve-singular",
        config=config.model_dump(),
        c1=c1,
        order=config.series_order,
        s_switch=curve.meta["s_switch"],
        s_max=config.s_max,
        drift=curve.drift.tolist(),
        integral_max=curve.integral_max.tolist(),
        matched_model=MATCH_LABELS.get(model),
        verification=SingularVerification(
            extension=report.extension.ok,
            stability=report.stability_ok,
            positivity=report.positivity_ok,
            stability_limit=report.stability_limit,
            min_eigenvalue=report.min_eigenvalue,
            valid_s_max=report.valid_s_max,
            failures=report.failures,
        ),
        csv_path=str(csv_path),
        files=[str(csv_path)],
    )
    manifest.wall_time = time.perf_counter() - started
    _write_manifest(manifest, out / f"{stem}.json")
    return manifest


def solve_singular(config: RunConfig) -> list[RunManifest]:
    """Sequential singular solves for every c1 in the config."""
    if not config.c1:
        raise DomainError("solve-singular needs at least one c1")
    return [singular_run(config, c1) for c1 in config.c1]


def _pool_size(jobs: int) -> int:
    return jobs if jobs > 0 else os.cpu_count() or 1


def _pair_distance(first: np.ndarray, second: np.ndarray) -> float:
    return min(
        float(np.max(np.abs(first - apply_to_states(tag, second))))
        for tag in point_group()
    )


def scan(config: RunConfig) -> ScanSummary:
    """Sweep c1 with a process pool and summarize distinctness.

    Each worker writes its own CSV and manifest; the summary compares the
    written curves pairwise up to T.
    """
    if not config.c1:
        raise DomainError("scan needs a non-empty c1 grid")
    started = time.perf_counter()
    workers = min(_pool_size(config.jobs), len(config.c1))
    if workers == 1:
        manifests = [singular_run(config, c1) for c1 in config.c1]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            manifests = list(
                pool.map(singular_run, [config] * len(config.c1), config.c1)
            )
    curves = {m.c1: read_csv(m.csv_path)[:, 1:9] for m in manifests}
    distances = [
        _pair_distance(curves[a], curves[b])
        for a, b in combinations(curves, 2)
    ]
    min_distance = min(distances) if distances else float("inf")
    summary = ScanSummary(
        version=__version__,
        config=config.model_dump(),
        manifests=[m.files[-1] for m in manifests],
        matched={
            f"{m.c1:.6g}": m.matched_model
            for m in manifests
            if m.matched_model is not None
        },
        min_pair_distance=min_distance,
        distinct=min_distance > settings.distinct_tol,
        all_verified=all(
            m.verification is not None
            and m.verification.extension
            and m.verification.stability
            and m.verification.positivity
            for m in manifests
        ),
    )
    summary.wall_time = time.perf_counter() - started
    path = Path(config.out) / "scan_summary.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2))
    logger.info("Scan of %d values written to %s", len(manifests), path)
    return summary

