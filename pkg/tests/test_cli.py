"""
Tests for the face_verify command-line interface.
"""

import json

import numpy as np
from click.testing import CliRunner

from face_graph_verifier import __version__
from face_graph_verifier.cli import cli
from face_graph_verifier.keypoint import GrayImage, load_keypoints, save_image
from tests.conftest import write_manifest


def run(*args):
    return CliRunner().invoke(cli, [str(arg) for arg in args])


def test_version():
    result = run("--version")

    assert result.exit_code == 0
    assert result.output.strip().endswith(f"version {__version__}")


def test_public_api_is_importable():
    import face_graph_verifier

    exported = face_graph_verifier.__all__
    assert [name for name in exported if not hasattr(face_graph_verifier, name)] == []


class TestExtract:
    def test_writes_keypoint_csv(self, face_pair, tmp_path):
        (image, _), _ = face_pair
        output = tmp_path / "points.csv"
        result = run("extract", image, output)

        assert result.exit_code == 0
        assert "Keypoints written to:" in result.output
        count = len(load_keypoints(output))
        assert count > 0
        assert f"Extracted {count} keypoints" in result.output

    def test_constant_image(self, tmp_path):
        save_image(GrayImage.from_array(np.full((64, 64), 0.5)), tmp_path / "flat.pgm")
        result = run("extract", tmp_path / "flat.pgm", tmp_path / "flat.csv")

        assert result.exit_code == 0
        assert "Extracted 0 keypoints" in result.output
        assert load_keypoints(tmp_path / "flat.csv") == []

    def test_missing_image(self, tmp_path):
        result = run("extract", tmp_path / "absent.pgm", tmp_path / "out.csv")

        assert result.exit_code == 2

    def test_malformed_image(self, tmp_path):
        (tmp_path / "bad.pgm").write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        result = run("extract", tmp_path / "bad.pgm", tmp_path / "out.csv")

        assert result.exit_code == 2
        assert "Error:" in result.output


class TestMatch:
    def test_self_match_accepts(self, face_pair):
        (image, landmarks), _ = face_pair
        result = run("match", image, landmarks, image, landmarks)

        assert result.exit_code == 0
        assert "ACCEPT" in result.output
        assert "Fused genuine belief:" in result.output
        for region in ("left_eye", "right_eye", "nose", "mouth"):
            assert region in result.output

    def test_threshold_one_rejects(self, face_pair):
        (image, landmarks), _ = face_pair
        result = run("match", image, landmarks, image, landmarks, "--threshold", "1.0")

        assert result.exit_code == 1
        assert "REJECT" in result.output

    def test_malformed_landmarks(self, face_pair, tmp_path):
        (image, landmarks), _ = face_pair
        bad = tmp_path / "bad.lm"
        bad.write_text("left_eye 30 50\nright_eye 70 50\nnose 50 80\n")
        result = run("match", image, landmarks, image, bad)

        assert result.exit_code == 2
        assert "mouth" in result.output

    def test_unknown_option(self, face_pair):
        (image, landmarks), _ = face_pair
        result = run("match", image, landmarks, image, landmarks, "--no-such-flag")

        assert result.exit_code == 2

    def test_json_report(self, face_pair, tmp_path):
        (image, landmarks), probe = face_pair
        output = tmp_path / "report.json"
        result = run("match", image, landmarks, *probe, "--output", output)

        assert result.exit_code in (0, 1)
        data = json.loads(output.read_text())
        assert len(data["regions"]) == 4
        assert data["accepted"] == (result.exit_code == 0)

    def test_verbose_and_traces(self, face_pair, tmp_path):
        (image, landmarks), _ = face_pair
        traces = tmp_path / "traces"
        result = run("match", image, landmarks, image, landmarks, "-v", "--trace-dir", traces)

        assert result.exit_code == 0
        assert "iterations:" in result.output
        for region in ("left_eye", "right_eye", "nose", "mouth"):
            lines = (traces / f"{region}.csv").read_text().splitlines()
            assert lines[0] == "iteration,max_delta"
            assert len(lines) >= 2

    def test_keypoints_round_trip_through_files(self, face_pair, tmp_path):
        (image, landmarks), probe = face_pair
        gallery_csv, probe_csv = tmp_path / "g.csv", tmp_path / "p.csv"
        first = run(
            "match", image, landmarks, *probe, "--keypoints-out", gallery_csv, probe_csv
        )
        second = run(
            "match", image, landmarks, *probe, "--keypoints-in", gallery_csv, probe_csv
        )

        assert first.exit_code in (0, 1)
        assert second.exit_code == first.exit_code
        belief = [line for line in first.output.splitlines() if "belief" in line]
        assert belief == [line for line in second.output.splitlines() if "belief" in line]

    def test_missing_region_policy_flag(self, face_pair):
        (image, landmarks), _ = face_pair
        result = run(
            "match", image, landmarks, image, landmarks, "--missing-policy", "skip",
            "--decision-basis", "pignistic", "--region-score", "posterior",
        )

        assert result.exit_code == 0


class TestEvaluate:
    def test_writes_roc_table(self, two_subject_manifest, tmp_path):
        roc = tmp_path / "roc.csv"
        result = run("evaluate", two_subject_manifest, roc)

        assert result.exit_code == 0
        lines = roc.read_text().splitlines()
        assert lines[0] == "threshold,far,frr"
        assert len(lines) == 1002
        summary = result.output.strip().splitlines()[-1]
        assert summary.startswith("eer=")
        assert "best_accuracy=" in summary and "rank1=" in summary

    def test_rerun_is_byte_identical(self, two_subject_manifest, tmp_path):
        run("evaluate", two_subject_manifest, tmp_path / "a.csv", "--workers", "2")
        run("evaluate", two_subject_manifest, tmp_path / "b.csv")

        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_custom_sweep(self, two_subject_manifest, tmp_path):
        result = run("evaluate", two_subject_manifest, tmp_path / "roc.csv", "--sweep", "11")

        assert result.exit_code == 0
        assert len((tmp_path / "roc.csv").read_text().splitlines()) == 12

    def test_single_subject_has_no_impostors(self, tmp_path):
        manifest = write_manifest(tmp_path, [("s1", "a", 1, 0), ("s1", "b", 1, 1)])
        result = run("evaluate", manifest, tmp_path / "roc.csv")

        assert result.exit_code == 2
        assert "impostor" in result.output

    def test_bad_manifest_header(self, tmp_path):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("name,file\n")
        result = run("evaluate", manifest, tmp_path / "roc.csv")

        assert result.exit_code == 2
        assert "header" in result.output
