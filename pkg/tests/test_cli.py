"""Tests for the fixcam command line."""

import pytest
from loguru import logger

from src.cli import ExitCode, build_parser, main

SCENARIO = """
name = "cli"
frame_count = 20

[geometry]
width = 320
height = 240

[[targets]]
entry = 1
exit = 21
box = { x = 20.0, y = 40.0, w = 30.0, h = 60.0 }
velocity = [2.0, 0.0]
appearance_key = 0

[[targets]]
entry = 3
exit = 21
box = { x = 250.0, y = 150.0, w = 30.0, h = 60.0 }
velocity = [-1.0, -1.0]
appearance_key = 1
"""


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logger.remove()


@pytest.fixture
def sequence(tmp_path):
    scenario = tmp_path / "scene.toml"
    scenario.write_text(SCENARIO)
    out = tmp_path / "seq"
    assert main(["generate", "--scenario", str(scenario), "--output", str(out)]) == ExitCode.OK
    return out


class TestParser:
    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args([])
        assert info.value.code == 2

    def test_track_needs_one_source(self, tmp_path):
        with pytest.raises(SystemExit):
            build_parser().parse_args(
                ["track", "--sequence", "a", "--detections", "b", "--output", str(tmp_path / "r.txt")]
            )

    def test_tuning_flags(self):
        args = build_parser().parse_args(
            ["track", "--detections", "d.txt", "--output", "r.txt", "--beta", "0", "--min-conf", "0.3"]
        )
        assert (args.beta, args.min_conf, args.alpha) == (0.0, 0.3, None)

    def test_track_accepts_seed(self):
        argv = ["track", "--detections", "d.txt", "--output", "r.txt"]
        assert build_parser().parse_args(argv).seed == 0
        assert build_parser().parse_args([*argv, "--seed", "17"]).seed == 17


class TestRoundTrip:
    """generate, track and evaluate through the CLI."""

    def test_perfect_scene_scores_one(self, sequence, tmp_path, capsys):
        results = tmp_path / "res.txt"
        assert main(["track", "--sequence", str(sequence), "--output", str(results)]) == ExitCode.OK
        assert "embedder calls" in capsys.readouterr().out
        code = main(["evaluate", "--gt", str(sequence / "gt" / "gt.txt"), "--results", str(results)])
        assert code == ExitCode.OK
        out = capsys.readouterr().out
        assert "mota=1.0000" in out
        assert "idsw=0" in out

    def test_output_is_reproducible(self, sequence, tmp_path):
        paths = []
        for name, buffer in (("a", "45"), ("b", "45"), ("c", "1")):
            path = tmp_path / f"{name}.txt"
            argv = ["track", "--sequence", str(sequence), "--output", str(path), "--buffer", buffer]
            assert main(argv) == ExitCode.OK
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()
        assert paths[0].stat().st_size > 0

    def test_detections_without_sequence_info(self, sequence, tmp_path):
        results = tmp_path / "res.txt"
        argv = ["track", "--detections", str(sequence / "det" / "det.txt"), "--output", str(results)]
        assert main(argv) == ExitCode.OK
        first = results.read_text().splitlines()[0]
        assert first.startswith("1,1,")
        assert first.endswith(",1,-1,-1,-1")

    def test_seeded_runs_match(self, sequence, tmp_path):
        paths = [tmp_path / "s1.txt", tmp_path / "s2.txt"]
        for path, seed in zip(paths, ("1", "99"), strict=True):
            argv = ["track", "--sequence", str(sequence), "--output", str(path), "--seed", seed]
            assert main(argv) == ExitCode.OK
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_matching_sidecar_dimension(self, sequence, tmp_path):
        sidecar = tmp_path / "fp.txt"
        sidecar.write_text("#dim=100\n")
        results = tmp_path / "res.txt"
        argv = ["track", "--sequence", str(sequence), "--output", str(results)]
        assert main([*argv, "--fingerprints", str(sidecar)]) == ExitCode.OK
        assert results.stat().st_size > 0

    def test_generate_without_images(self, tmp_path, capsys):
        out = tmp_path / "occ"
        assert main(["generate", "--preset", "occlusion", "--output", str(out), "--no-images"]) == 0
        assert not (out / "img1").exists()
        assert "frames              50" in capsys.readouterr().out


class TestExitCodes:
    """Failures map to documented exit codes."""

    def test_undefined_score(self, tmp_path):
        gt = tmp_path / "gt.txt"
        gt.write_text("")
        res = tmp_path / "res.txt"
        res.write_text("1,1,0.00,0.00,10.00,10.00,1,-1,-1,-1\n")
        assert main(["evaluate", "--gt", str(gt), "--results", str(res)]) == ExitCode.UNDEFINED_SCORE

    def test_missing_config_file(self, sequence, tmp_path):
        argv = ["track", "--sequence", str(sequence), "--output", str(tmp_path / "r.txt")]
        assert main([*argv, "--config", str(tmp_path / "nope.toml")]) == ExitCode.CONFIG

    def test_out_of_range_flag(self, sequence, tmp_path):
        argv = ["track", "--sequence", str(sequence), "--output", str(tmp_path / "r.txt"), "--alpha", "-1"]
        assert main(argv) == ExitCode.CONFIG

    def test_missing_detection_file(self, tmp_path):
        argv = ["track", "--detections", str(tmp_path / "det.txt"), "--output", str(tmp_path / "r.txt")]
        assert main(argv) == ExitCode.IO

    def test_malformed_detection_file(self, tmp_path):
        det = tmp_path / "det.txt"
        det.write_text("1,-1,1,2,3,4,0.5,-1,-1\n")
        argv = ["track", "--detections", str(det), "--output", str(tmp_path / "r.txt")]
        assert main(argv) == ExitCode.DATA


    def test_non_finite_detection_value(self, tmp_path):
        det = tmp_path / "det.txt"
        det.write_text("1,-1,nan,2,3,4,0.5,-1,-1,-1\n")
        argv = ["track", "--detections", str(det), "--output", str(tmp_path / "r.txt")]
        assert main(argv) == ExitCode.DATA

    def test_sidecar_dimension_mismatch(self, sequence, tmp_path):
        sidecar = tmp_path / "fp.txt"
        sidecar.write_text("#dim=3\n1,0,1,0,0\n")
        argv = ["track", "--sequence", str(sequence), "--output", str(tmp_path / "r.txt")]
        assert main([*argv, "--fingerprints", str(sidecar)]) == ExitCode.DATA
        assert not (tmp_path / "r.txt").exists()


class TestBenchmark:
    def test_small_run(self, capsys):
        argv = ["benchmark", "--frames", "6", "--detections-per-frame", "4", "--repetitions", "2"]
        assert main(argv) == ExitCode.OK
        out = capsys.readouterr().out
        assert "repetitions       2" in out
        assert "embedder calls    24" in out
        assert "real time at 30 fps" in out
