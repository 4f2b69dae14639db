"""Batch command-line interface for the cell segmentation pipeline."""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from core.pipeline import IMAGE_STAGES, SegmentationEngine
from core.synthetic import generate_synthetic
from domain.errors import ConfigError, ImageReadError, ImageWriteError, SegmentationError, StageError
from domain.models import CellCounts, PipelineConfig, RasterImage, SyntheticSpec
from persistence.storage import (
    ConfigRepository,
    ResultRepository,
    list_images,
    load_synthetic_spec,
    read_image,
    write_image,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_OUTPUT = 4
EXIT_STAGE = 5


class CommandError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Segmentation et comptage de cellules")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Plus de journalisation (-vv pour le détail)")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_config_options(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", type=Path, default=None, help="Fichier de configuration clé = valeur")
        sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="CLE=VALEUR",
                         help="Surcharge d'un paramètre (répétable)")

    run = commands.add_parser("run", help="Segmenter une image ou un répertoire d'images")
    run.add_argument("input", type=Path)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--jobs", type=int, default=1, help="Nombre d'images traitées en parallèle")
    add_config_options(run)

    synth = commands.add_parser("synth", help="Générer des images synthétiques avec vérité terrain")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--spec", type=Path, default=None, help="Description JSON de la scène")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--count", type=int, default=1, help="Nombre d'images (graines successives)")

    inspect = commands.add_parser("inspect", help="Exporter une étape intermédiaire")
    inspect.add_argument("input", type=Path)
    inspect.add_argument("--stage", required=True, choices=IMAGE_STAGES)
    inspect.add_argument("--out", type=Path, default=None)
    add_config_options(inspect)
    return parser.parse_args(argv)


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    try:
        return ConfigRepository(args.config).load(args.overrides)
    except ConfigError as exc:
        raise CommandError(EXIT_CONFIG, f"Erreur de configuration: {exc}") from exc


def _read(path: Path) -> RasterImage:
    try:
        return read_image(path).replicate_gray()
    except ImageReadError as exc:
        raise CommandError(EXIT_INPUT, f"Entrée illisible: {exc}") from exc


def _segment(engine: SegmentationEngine, path: Path, image: RasterImage):
    try:
        return engine.run(image)
    except StageError as exc:
        raise CommandError(EXIT_STAGE, f"Échec du pipeline sur {path.name}: {exc}") from exc


def _process(config: PipelineConfig, results: ResultRepository, path: Path) -> Tuple[str, CellCounts]:
    engine = SegmentationEngine(config)
    result = _segment(engine, path, _read(path))
    try:
        results.save_result(path.stem, result)
    except ImageWriteError as exc:
        raise CommandError(EXIT_OUTPUT, f"Sortie impossible: {exc}") from exc
    logger.info("%s: %s", path.name, result.counts.to_dict())
    return path.name, result.counts


def _safe_process(config: PipelineConfig, results: ResultRepository, path: Path):
    try:
        return _process(config, results, path)
    except CommandError as exc:
        return exc


def run_command(args: argparse.Namespace) -> int:
    config = _load_config(args)
    try:
        files = list_images(args.input)
    except ImageReadError as exc:
        raise CommandError(EXIT_INPUT, f"Entrée illisible: {exc}") from exc
    try:
        results = ResultRepository(args.out)
    except ImageWriteError as exc:
        raise CommandError(EXIT_OUTPUT, f"Sortie impossible: {exc}") from exc

    jobs = max(1, args.jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        outcomes = list(pool.map(lambda path: _safe_process(config, results, path), files))

    rows: List[Tuple[str, CellCounts]] = []
    status = EXIT_OK
    for outcome in outcomes:
        if isinstance(outcome, CommandError):
            print(str(outcome), file=sys.stderr)
            status = status or outcome.code
        else:
            rows.append(outcome)
    try:
        results.write_counts(rows)
    except ImageWriteError as exc:
        raise CommandError(EXIT_OUTPUT, f"Sortie impossible: {exc}") from exc
    return status


def synth_command(args: argparse.Namespace) -> int:
    try:
        spec = load_synthetic_spec(args.spec) if args.spec else SyntheticSpec()
    except (ConfigError, ValueError) as exc:
        raise CommandError(EXIT_CONFIG, f"Erreur de configuration: {exc}") from exc
    try:
        results = ResultRepository(args.out)
    except ImageWriteError as exc:
        raise CommandError(EXIT_OUTPUT, f"Sortie impossible: {exc}") from exc

    truth_rows = []
    for seed in range(args.seed, args.seed + max(1, args.count)):
        try:
            image, truth = generate_synthetic(seed, spec)
        except SegmentationError as exc:
            raise CommandError(EXIT_STAGE, f"Génération impossible (graine {seed}): {exc}") from exc
        name = f"synth_{seed}.ppm"
        try:
            write_image(args.out / name, image)
            write_image(args.out / f"synth_{seed}_truth.pgm", truth)
        except ImageWriteError as exc:
            raise CommandError(EXIT_OUTPUT, f"Sortie impossible: {exc}") from exc
        truth_rows.append((name, spec.expected_counts))
    try:
        results.write_counts(truth_rows, name="truth.csv")
    except ImageWriteError as exc:
        raise CommandError(EXIT_OUTPUT, f"Sortie impossible: {exc}") from exc
    return EXIT_OK


def inspect_command(args: argparse.Namespace) -> int:
    config = _load_config(args)
    image = _read(args.input)
    engine = SegmentationEngine(config)
    _segment(engine, args.input, image)
    stage = engine.stage_image(args.stage)
    suffix = ".ppm" if isinstance(stage, RasterImage) and stage.channels == 3 else ".pgm"
    target = args.out or Path(f"{args.input.stem}_{args.stage}{suffix}")
    try:
        write_image(target, stage)
    except ImageWriteError as exc:
        raise CommandError(EXIT_OUTPUT, f"Sortie impossible: {exc}") from exc
    print(target)
    return EXIT_OK


_COMMANDS = {"run": run_command, "synth": synth_command, "inspect": inspect_command}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except CommandError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
