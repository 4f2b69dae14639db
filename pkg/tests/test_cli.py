from __future__ import annotations

import csv
import json
from pathlib import Path

from core.synthetic import generate_synthetic
from domain.models import SyntheticSpec
from persistence.storage import read_image, write_image
from ui.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, cli_main

SMALL = SyntheticSpec(width=120, height=96, disks=2, blobs=1)


def write_inputs(folder: Path, seeds) -> None:
    folder.mkdir()
    for seed in seeds:
        image, _ = generate_synthetic(seed, SMALL)
        write_image(folder / f"img_{seed}.ppm", image)


def test_run_writes_one_row_per_image(tmp_path):
    write_inputs(tmp_path / "in", (1, 2, 3))
    out = tmp_path / "out"
    assert cli_main(["run", str(tmp_path / "in"), "--out", str(out), "--jobs", "2"]) == EXIT_OK

    with (out / "counts.csv").open(encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert [row["file"] for row in rows] == ["img_1.ppm", "img_2.ppm", "img_3.ppm"]
    for row in rows:
        assert int(row["total"]) == int(row["spheric"]) + int(row["nonspheric"]) + int(row["rejected"])
    assert (out / "img_1_mask.pgm").exists() and (out / "img_1_overlay.ppm").exists()


def test_run_rejects_bad_configuration(tmp_path):
    write_inputs(tmp_path / "in", (1,))
    code = cli_main(["run", str(tmp_path / "in"), "--out", str(tmp_path / "out"), "--set", "emphasis=bogus"])
    assert code == EXIT_CONFIG
    assert not (tmp_path / "out" / "counts.csv").exists()

    config = tmp_path / "pipeline.cfg"
    config.write_text("colour = red\n", encoding="utf-8")
    code = cli_main(["run", str(tmp_path / "in"), "--out", str(tmp_path / "out"), "--config", str(config)])
    assert code == EXIT_CONFIG


def test_run_reports_missing_input(tmp_path):
    assert cli_main(["run", str(tmp_path / "nowhere"), "--out", str(tmp_path / "out")]) == EXIT_INPUT


def test_inspect_exports_a_single_stage(tmp_path):
    write_inputs(tmp_path / "in", (4,))
    target = tmp_path / "stage.pgm"
    code = cli_main(["inspect", str(tmp_path / "in" / "img_4.ppm"), "--stage", "otsu_mask", "--out", str(target)])
    assert code == EXIT_OK
    mask = read_image(target)
    assert mask.channels == 1 and mask.shape == (96, 120)


def test_inspect_rejects_unknown_stage(tmp_path):
    write_inputs(tmp_path / "in", (4,))
    assert cli_main(["inspect", str(tmp_path / "in" / "img_4.ppm"), "--stage", "histogram"]) == 2


def test_synth_writes_images_and_truth(tmp_path):
    spec = tmp_path / "scene.json"
    spec.write_text(json.dumps(SMALL.to_dict()), encoding="utf-8")
    out = tmp_path / "synth"
    assert cli_main(["synth", "--seed", "7", "--count", "2", "--spec", str(spec), "--out", str(out)]) == EXIT_OK

    assert read_image(out / "synth_7.ppm").equals(generate_synthetic(7, SMALL)[0])
    assert (out / "synth_8_truth.pgm").exists()
    lines = (out / "truth.csv").read_text(encoding="utf-8").splitlines()
    assert lines[1:] == ["synth_7.ppm,2,1,0,3", "synth_8.ppm,2,1,0,3"]


def test_synth_rejects_a_broken_scene(tmp_path):
    spec = tmp_path / "scene.json"
    spec.write_text(json.dumps({"disks": -1}), encoding="utf-8")
    assert cli_main(["synth", "--seed", "1", "--spec", str(spec), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_runs_are_byte_identical(tmp_path):
    write_inputs(tmp_path / "in", (5, 6))
    for name in ("first", "second"):
        assert cli_main(["run", str(tmp_path / "in"), "--out", str(tmp_path / name)]) == EXIT_OK
    for produced in sorted((tmp_path / "first").iterdir()):
        assert produced.read_bytes() == (tmp_path / "second" / produced.name).read_bytes()
