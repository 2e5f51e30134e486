"""Run configuration and result schemas.
Validated with Pydantic; manifests are written as JSON.
"""

from pydantic import BaseModel, Field, field_validator, model_validator

from nearly_kahler.config import settings


class RunConfig(BaseModel):
    """Parameters of a CLI run after merging flags, JSON file and env."""

    mu: float = Field(default=2.0, gt=0)
    tol: float = Field(default_factory=lambda: settings.tol, gt=0)
    span: tuple[float, float] = (-0.1, 0.1)
    point: list[float] | None = None
    model: str | None = None
    c1: list[float] = []
    s_max: float = 0.2
    series_order: int = Field(
        default_factory=lambda: settings.series_order, ge=1
    )
    s_switch: float | None = Field(default=None, gt=0)
    n_points: int = Field(default=201, ge=2)
    samples: int = Field(default=100, ge=1)
    out: str = Field(default_factory=lambda: settings.output_dir)
    jobs: int = Field(default_factory=lambda: settings.jobs, ge=0)
    seed: int = Field(default_factory=lambda: settings.seed)
    # Scale of a seeded perturbation within N applied before solve-regular
    perturb: float | None = Field(default=None, gt=0)

    @field_validator("point")
    @classmethod
    def point_has_seven_values(cls, value):
        if value is not None and len(value) != 7:
            raise ValueError(
                f"point needs 7 values (a2..a4, b1..b4), got {len(value)}"
            )
        return value

    @field_validator("c1")
    @classmethod
    def c1_positive(cls, value):
        bad = [c for c in value if c <= 0]
        if bad:
            raise ValueError(f"c1 values must be positive, got {bad}")
        return value

    @model_validator(mode="after")
    def span_not_empty(self):
        if self.span[0] == self.span[1]:
            raise ValueError("span must not be empty")
        if self.s_max == 0:
            raise ValueError("s_max must be non-zero")
        return self


class ClassifyResult(BaseModel):
    """Orbit type of a 3-form."""

    tag: str
    value: float
    residual: float
    j_matrix: list[list[float]] | None = None


class ModelVerification(BaseModel):
    """Residual and stability checks of a homogeneous model."""

    model: str
    mu: float
    samples: int
    max_residual: float
    max_constraint: float
    stability_ok: bool
    positivity_ok: bool
    passed: bool


class SingularVerification(BaseModel):
    """Checks on a structure built from the singular orbit."""

    extension: bool
    stability: bool
    positivity: bool
    stability_limit: float
    min_eigenvalue: float
    valid_s_max: float
    failures: list[str] = []


class RunManifest(BaseModel):
    """Record of one run: config echo, results and emitted files."""

    version: str
    command: str
    config: dict
    c1: float | None = None
    order: int | None = None
    s_switch: float | None = None
    s_max: float | None = None
    # Drift of each first integral from its start value, and its largest |I|
    drift: list[float] = []
    integral_max: list[float] = []
    matched_model: str | None = None
    canonical: list[float] | None = None
    verification: SingularVerification | None = None
    csv_path: str | None = None
    files: list[str] = []
    wall_time: float = 0.0


class ScanSummary(BaseModel):
    """Outcome of a c1 sweep."""

    version: str
    config: dict
    manifests: list[str]
    matched: dict[str, str]
    min_pair_distance: float
    distinct: bool
    all_verified: bool
    wall_time: float = 0.0
