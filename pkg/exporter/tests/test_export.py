import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from label_exporter.cli import main
from label_exporter.export import ExportConfig, export_sequence, match_frames
from label_exporter.formats import read_sekp, read_semt
from label_exporter.frames import discover_frames, parse_timestamp_us

SCRIPTS = Path(__file__).parent.parent / "scripts"
sys.path.insert(0, str(SCRIPTS))
from make_toy_sequence import toy_image  # noqa: E402

import cv2  # noqa: E402


@pytest.fixture()
def toy_frames(tmp_path):
    frames = tmp_path / "toy"
    frames.mkdir()
    cv2.imwrite(str(frames / "frame_000001000000.png"), toy_image(0, 0))
    cv2.imwrite(str(frames / "frame_000001033000.png"), toy_image(3, 2))
    return frames


class TestFrameDiscovery:
    def test_timestamps_from_names(self, toy_frames):
        frames = discover_frames(toy_frames)
        assert [f.tau_us for f in frames] == [1_000_000, 1_033_000]

    def test_unparseable_name_names_the_file(self, tmp_path):
        bad = tmp_path / "no_digits_here.png"
        cv2.imwrite(str(bad), np.zeros((8, 8), np.uint8))
        with pytest.raises(ValueError, match="no_digits_here"):
            parse_timestamp_us(bad)

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no frame images"):
            discover_frames(tmp_path)


class TestExportSequence:
    def test_two_frame_toy_sequence(self, toy_frames, tmp_path):
        out = tmp_path / "out"
        manifest = export_sequence(toy_frames, out)
        assert len(manifest["frames"]) == 2
        sekp_files = sorted(out.glob("*.sekp"))
        assert len(sekp_files) == 2
        a = read_sekp(sekp_files[0])
        b = read_sekp(sekp_files[1])
        assert a.tau_us == 1_000_000 and b.tau_us == 1_033_000
        assert len(a) > 8 and len(b) > 8
        np.testing.assert_allclose(np.linalg.norm(a.descriptors, axis=1), 1.0, rtol=1e-5)
        semt = read_semt(out / manifest["matches"][0]["semt"])
        assert len(semt) >= 8
        # matched corners should all move by the synthetic (3, 2) shift
        du = b.u[semt.index_b] - a.u[semt.index_a]
        dv = b.v[semt.index_b] - a.v[semt.index_a]
        assert np.median(du) == pytest.approx(3.0, abs=0.5)
        assert np.median(dv) == pytest.approx(2.0, abs=0.5)

    def test_blank_frames_export_zero_keypoints(self, tmp_path):
        frames = tmp_path / "blank"
        frames.mkdir()
        for i in range(2):
            cv2.imwrite(str(frames / f"f_{i:06d}.png"),
                        np.full((40, 40), 128, np.uint8))
        out = tmp_path / "out"
        export_sequence(frames, out)
        for path in out.glob("*.sekp"):
            assert len(read_sekp(path)) == 0

    def test_deterministic_bytes(self, toy_frames, tmp_path):
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        export_sequence(toy_frames, out1)
        export_sequence(toy_frames, out2)
        for p1 in sorted(out1.glob("*.se*")):
            p2 = out2 / p1.name
            assert p1.read_bytes() == p2.read_bytes()


class TestMatchFrames:
    def test_self_match_is_identity(self, toy_frames, tmp_path):
        out = tmp_path / "out"
        export_sequence(toy_frames, out)
        sekp = sorted(out.glob("*.sekp"))[0]
        semt = match_frames(sekp, sekp, tmp_path / "self.semt")
        matches = read_semt(semt)
        kps = read_sekp(sekp)
        assert len(matches) == len(kps)
        np.testing.assert_array_equal(matches.index_a, matches.index_b)
        np.testing.assert_allclose(matches.similarity, 1.0, rtol=1e-5)

    def test_symmetric_pair_transposes(self, toy_frames, tmp_path):
        out = tmp_path / "out"
        export_sequence(toy_frames, out)
        a, b = sorted(out.glob("*.sekp"))
        fwd = read_semt(match_frames(a, b, tmp_path / "fwd.semt"))
        rev = read_semt(match_frames(b, a, tmp_path / "rev.semt"))
        assert set(zip(fwd.index_a.tolist(), fwd.index_b.tolist())) == set(
            zip(rev.index_b.tolist(), rev.index_a.tolist())
        )

    def test_missing_sekp_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="missing SEKP"):
            match_frames(tmp_path / "a.sekp", tmp_path / "b.sekp", tmp_path / "m.semt")


class TestCli:
    def test_export_command(self, toy_frames, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["export", "--frames", str(toy_frames), "--out", str(out)])
        assert rc == 0
        assert "exported 2 frame(s)" in capsys.readouterr().out
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["detector"] == "harris-patch16"

    def test_explicit_pairs(self, toy_frames, tmp_path):
        pairs = tmp_path / "pairs.json"
        pairs.write_text("[[0, 1], [1, 0]]")
        out = tmp_path / "out"
        rc = main(["export", "--frames", str(toy_frames), "--out", str(out),
                   "--pairs", str(pairs)])
        assert rc == 0
        assert len(list(out.glob("*.semt"))) == 2

    def test_superpoint_without_weights_fails_cleanly(self, toy_frames, tmp_path, capsys):
        from label_exporter.superpoint import ModelLoadError, SuperPointBackend, SuperPointConfig
        with pytest.raises(ModelLoadError, match="weights"):
            SuperPointBackend(SuperPointConfig(weights=None))
        with pytest.raises(ModelLoadError, match="not found"):
            SuperPointBackend(SuperPointConfig(weights=tmp_path / "none.pth"))


@pytest.mark.skipif(shutil.which("superevent") is None,
                    reason="consuming pipeline CLI not on PATH")
def test_consuming_cli_reads_exported_files(toy_frames, tmp_path):
    out = tmp_path / "out"
    export_sequence(toy_frames, out)
    a, b = sorted(out.glob("*.sekp"))
    proc = subprocess.run(
        ["superevent", "match", "--a", str(a), "--b", str(b),
         "--out", str(tmp_path / "cross.semt")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "match(es)" in proc.stdout
