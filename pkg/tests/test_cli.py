"""Unit tests for the command-line front end.

Tests cover:
- Exit codes for success, failed checks, bad input, data off N and
  numerical failures
- Precedence of flags over the --config file
- Seeded perturbation of the regular start point
"""

import json

import pytest

from nearly_kahler import cli
from nearly_kahler.errors import StiffnessError
from nearly_kahler.schema.run_schema import (
    ModelVerification,
    RunManifest,
    ScanSummary,
    SingularVerification,
)
from nearly_kahler.services import run_service


def joined(values) -> str:
    return ",".join(repr(float(v)) for v in values)


class TestClassifyCommand:
    """Tests for the classify subcommand."""

    def test_stable_form(self, standard_form, capsys):
        code = cli.main(["classify", joined(standard_form.coeffs)])
        assert code == cli.EXIT_OK
        assert "NegativeOrbit" in capsys.readouterr().out

    def test_wrong_count(self):
        assert cli.main(["classify", "1,2,3"]) == cli.EXIT_INPUT


class TestVerifyCommand:
    """Tests for the verify-model subcommand."""

    def test_passes(self):
        assert cli.main(["verify-model", "S3xS3", "--samples", "5"]) == 0

    def test_failed_verification(self, mocker):
        failed = ModelVerification(
            model="S3xS3",
            mu=2.0,
            samples=5,
            max_residual=1.0,
            max_constraint=0.0,
            stability_ok=True,
            positivity_ok=True,
            passed=False,
        )
        mocker.patch.object(run_service, "verify_model", return_value=failed)
        assert cli.main(["verify-model", "S3xS3"]) == cli.EXIT_FAILED

    def test_numerical_failure(self, mocker):
        mocker.patch.object(
            run_service, "verify_model", side_effect=StiffnessError("stuck")
        )
        assert cli.main(["verify-model", "S3xS3"]) == cli.EXIT_NUMERICAL


class TestSolveCommands:
    """Tests for solve-regular and solve-singular."""

    def test_point_off_variety(self, out_dir):
        code = cli.main(
            ["solve-regular", "--point", "1,2,3,4,5,6,7", "--out", str(out_dir)]
        )
        assert code == cli.EXIT_MEMBERSHIP

    def test_point_wrong_count(self, out_dir):
        code = cli.main(["solve-regular", "--point", "1,2", "--out", str(out_dir)])
        assert code == cli.EXIT_INPUT

    def test_regular_from_model(self, out_dir, capsys):
        code = cli.main(
            [
                "solve-regular",
                "--model",
                "S3xS3",
                "--points",
                "11",
                "--out",
                str(out_dir),
            ]
        )
        assert code == cli.EXIT_OK
        assert (out_dir / "regular.json").exists()
        assert "S3xS3" in capsys.readouterr().out

    def test_singular(self, out_dir):
        code = cli.main(
            [
                "solve-singular",
                "--c1",
                "0.25",
                "--s-max",
                "0.1",
                "--points",
                "11",
                "--out",
                str(out_dir),
            ]
        )
        assert code == cli.EXIT_OK
        assert (out_dir / "singular_c1_0.25.json").exists()

    def test_nonpositive_c1(self, out_dir):
        code = cli.main(["solve-singular", "--c1", "0", "--out", str(out_dir)])
        assert code == cli.EXIT_INPUT

    def test_regular_perturbed(self, out_dir, capsys):
        code = cli.main(
            [
                "solve-regular",
                "--model",
                "S3xS3",
                "--perturb",
                "1e-3",
                "--seed",
                "3",
                "--points",
                "11",
                "--out",
                str(out_dir),
            ]
        )
        assert code == cli.EXIT_OK
        assert "Matches" not in capsys.readouterr().out

    def test_singular_failed_verification(self, out_dir, mocker):
        manifest = RunManifest(
            version="0",
            command="solve-singular",
            config={},
            c1=0.25,
            drift=[0.0] * 4,
            verification=SingularVerification(
                extension=True,
                stability=False,
                positivity=True,
                stability_limit=-0.25,
                min_eigenvalue=0.1,
                valid_s_max=0.05,
                failures=["stability"],
            ),
            files=[str(out_dir / "singular_c1_0.25.json")],
        )
        mocker.patch.object(
            run_service, "solve_singular", return_value=[manifest]
        )
        code = cli.main(["solve-singular", "--c1", "0.25", "--out", str(out_dir)])
        assert code == cli.EXIT_FAILED


class TestScanCommand:
    """Tests for the scan subcommand exit status."""

    def summary(self, distinct: bool, verified: bool) -> ScanSummary:
        return ScanSummary(
            version="0",
            config={},
            manifests=["a.json", "b.json"],
            matched={},
            min_pair_distance=0.0 if not distinct else 0.1,
            distinct=distinct,
            all_verified=verified,
        )

    @pytest.mark.parametrize(
        "distinct, verified, expected",
        [
            (True, True, cli.EXIT_OK),
            (False, True, cli.EXIT_FAILED),
            (True, False, cli.EXIT_FAILED),
        ],
    )
    def test_exit_code(self, mocker, out_dir, distinct, verified, expected):
        mocker.patch.object(
            run_service, "scan", return_value=self.summary(distinct, verified)
        )
        assert cli.main(["scan", "--out", str(out_dir)]) == expected


class TestBuildConfig:
    """Tests for merging --config with flags."""

    @pytest.fixture
    def config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"tol": 1e-6, "s_max": 0.3}))
        return path

    def test_flag_beats_file(self, config_file):
        args = cli.build_parser().parse_args(
            [
                "solve-singular",
                "--c1",
                "0.2",
                "--config",
                str(config_file),
                "--tol",
                "1e-8",
            ]
        )
        config = cli.build_config(args)
        assert config.tol == 1e-8
        assert config.s_max == 0.3
        assert config.c1 == [0.2]

    def test_negative_span(self):
        args = cli.build_parser().parse_args(
            ["solve-regular", "--model", "S3xS3", "--span=-0.2,0.1"]
        )
        assert cli.build_config(args).span == (-0.2, 0.1)

    def test_perturb_and_seed(self):
        args = cli.build_parser().parse_args(
            ["solve-regular", "--model", "S3xS3", "--perturb", "1e-3", "--seed", "7"]
        )
        config = cli.build_config(args)
        assert config.perturb == 1e-3
        assert config.seed == 7

    def test_scan_default_grid(self):
        args = cli.build_parser().parse_args(["scan"])
        grid = cli.build_config(args).c1
        assert len(grid) == 10
        assert grid[1] == pytest.approx(1 / 9)

    def test_missing_config_file(self, tmp_path):
        code = cli.main(
            ["verify-model", "S3xS3", "--config", str(tmp_path / "none.json")]
        )
        assert code == cli.EXIT_INPUT
