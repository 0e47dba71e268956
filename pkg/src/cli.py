from __future__ import annotations

import functools
import logging
from pathlib import Path
from typing import Any, Callable

import click

from src.core.code_io import save_code, write_alist
from src.core.config import (
    SimConfig,
    build_sim_config,
    default_sim_values,
    merge_sim_values,
    read_campaign_file,
    settings,
)
from src.core.errors import HmmLdpcError
from src.core.ldpc_code import DEFAULT_FRAME_BITS, CodeParameters, build_code
from src.sim.fixtures import FIXTURE_KINDS, save_fixture, search_fixtures
from src.sim.harness import csv_text, run_fer_sweep, run_single_frame, stage_table
from src.utils.parsers import parse_ebn0, parse_stage_mask


logger = logging.getLogger(__name__)


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    log_dir = Path(settings.log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    handlers = [
        logging.StreamHandler(),
        logging.FileHandler(log_dir / "hmm_ldpc.log"),
    ]
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(message)s", handlers=handlers, force=True
    )


def _reports_errors(command: Callable[..., None]) -> Callable[..., None]:
    """Turn library errors into a one-line message and exit status 1."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            command(*args, **kwargs)
        except HmmLdpcError as exc:
            if logger.isEnabledFor(logging.DEBUG):
                logger.exception("Command failed")
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _code_options(command: Callable[..., None]) -> Callable[..., None]:
    options = [
        click.option("--code-file", type=click.Path(path_type=Path, dir_okay=False), help="Code JSON file"),
        click.option(
            "--frame-bits",
            type=int,
            help=f"Codeword length N (typical: {', '.join(map(str, DEFAULT_FRAME_BITS))})",
        ),
        click.option("--code-seed", type=int, help="Seed of the code construction"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _decoder_options(command: Callable[..., None]) -> Callable[..., None]:
    options = [
        click.option("--walks", "max_walks", type=int, help="Random walks per HMM attempt"),
        click.option("--iters", type=int, help="HMM iterations per walk"),
        click.option("--bp-iters", type=int, help="Tanner-graph BP iterations"),
        click.option(
            "--emission", type=click.Choice(["simple", "extended"]), help="Emission model for traces"
        ),
        click.option("--stage-mask", help="Enabled stages, e.g. 1,3,4"),
        click.option("--erase-max", type=float, help="Largest erased fraction"),
        click.option("--erase-step", type=float, help="Erased fraction increment"),
        click.option("--repair2", is_flag=True, help="Try all 1- and 2-bit flips after BP"),
        click.option(
            "--disable-repeats", is_flag=True, help="Set repeated state bits to uncertainty"
        ),
        click.option(
            "--repeat-rule",
            type=click.Choice(["occurrence", "revisit"]),
            help="What counts as a repeat",
        ),
        click.option("--extended-dedup", is_flag=True, help="Drop repeated factors in extended emissions"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


_DECODER_KEYS = (
    "max_walks",
    "iters",
    "bp_iters",
    "emission",
    "stage_mask",
    "erase_max",
    "erase_step",
    "repair2",
    "disable_repeats",
    "repeat_rule",
    "extended_dedup",
)


_FLAG_KEYS = ("repair2", "disable_repeats", "extended_dedup", "noiseless")


def _sim_config(config_path: Path | None, options: dict[str, Any]) -> SimConfig:
    """Settings defaults, then the campaign file, then explicit flags."""
    decoder = {key: options.pop(key, None) for key in _DECODER_KEYS}
    for values in (decoder, options):
        for key in _FLAG_KEYS:
            if values.get(key) is False:
                values[key] = None
    try:
        if decoder["stage_mask"] is not None:
            decoder["stage_mask"] = parse_stage_mask(decoder["stage_mask"])
        if options.get("ebn0_db") is not None:
            options["ebn0_db"] = parse_ebn0(options["ebn0_db"])
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    file_values = read_campaign_file(config_path) if config_path else {}
    flags = {**options, "decoder_config": decoder}
    return build_sim_config(**merge_sim_values(default_sim_values(), file_values, flags))


@click.group()
def cli() -> None:
    """HMM decoder for regular LDPC codes, with BP baseline and FER campaigns."""


@cli.command()
@click.option("--frame-bits", type=int, default=lambda: settings.frame_bits, show_default="from settings")
@click.option("--seed", "code_seed", type=int, default=lambda: settings.code_seed, show_default="from settings")
@click.option("--out", type=click.Path(path_type=Path, dir_okay=False), help="Write the code JSON here")
@click.option("--alist", type=click.Path(path_type=Path, dir_okay=False), help="Write H as alist here")
@click.option("--verbose", is_flag=True, help="Verbose output")
@_reports_errors
def construct(frame_bits: int, code_seed: int, out: Path | None, alist: Path | None, verbose: bool) -> None:
    """Construct a regular (3,6) code and its systematic generator."""
    _configure_logging(verbose)
    try:
        params = CodeParameters.for_frame_bits(frame_bits)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--frame-bits") from exc
    code = build_code(params, code_seed)
    click.echo(
        f"N={code.n_vars} M={code.H.n_checks} K={code.n_info} seed={code.seed} "
        f"4-cycles={code.H.count_4cycles()}"
    )
    if out is not None:
        save_code(code, out)
        click.echo(f"Code written to {out}")
    if alist is not None:
        alist.parent.mkdir(parents=True, exist_ok=True)
        alist.write_text(write_alist(code.H), encoding="utf-8")
        click.echo(f"alist written to {alist}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@_code_options
@click.option("--ebn0", "ebn0_db", help="Eb/N0 points in dB: a:b:step or a comma list")
@click.option("--frames", type=int, help="Frames per point")
@click.option("--min-errors", type=int, help="Stop a point after this many frame errors")
@click.option("--decoder", type=click.Choice(["bp", "hmm"]), help="Decoder under test")
@_decoder_options
@click.option("--seed", "master_seed", type=int, help="Master seed of the campaign")
@click.option("--workers", type=int, help="Worker processes")
@click.option("--batch-frames", type=int, help="Frames per scheduling batch")
@click.option("--noiseless", is_flag=True, help="Bypass the AWGN channel")
@click.option("--no-timing", "no_timing", is_flag=True, help="Write wall_s as 0 for reproducible files")
@click.option("--out", "out_csv", type=click.Path(path_type=Path, dir_okay=False), help="CSV output")
@click.option("--json", "out_json", type=click.Path(path_type=Path, dir_okay=False), help="JSON output")
@click.option("--verbose", is_flag=True, help="Verbose output")
@_reports_errors
def fer(config_path: Path | None, no_timing: bool, verbose: bool, **options: Any) -> None:
    """Run a frame error rate sweep and print the CSV table."""
    _configure_logging(verbose)
    if no_timing:
        options["record_wall_time"] = False
    cfg = _sim_config(config_path, options)
    points = run_fer_sweep(cfg)
    click.echo(csv_text(points), nl=False)


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@_code_options
@click.option("--ebn0", "ebn0_db", required=True, type=float, help="Eb/N0 in dB")
@click.option("--frames", type=int, help="Frames to simulate")
@_decoder_options
@click.option("--seed", "master_seed", type=int, help="Master seed of the campaign")
@click.option("--workers", type=int, help="Worker processes")
@click.option("--verbose", is_flag=True, help="Verbose output")
@_reports_errors
def stages(config_path: Path | None, ebn0_db: float, verbose: bool, **options: Any) -> None:
    """Tabulate at which stage the staged decoder finishes each frame."""
    _configure_logging(verbose)
    options.update(ebn0_db=str(ebn0_db), decoder="hmm")
    cfg = _sim_config(config_path, options)
    point = run_fer_sweep(cfg)[0]
    width = max(len(label) for label, _ in stage_table(point))
    click.echo(f"Eb/N0 = {point.ebn0_db:g} dB, N = {cfg.frame_bits}")
    for label, count in stage_table(point):
        click.echo(f"{label.ljust(width)}  {count}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True, dir_okay=False))
@_code_options
@click.option("--ebn0", "ebn0_db", required=True, type=float, help="Eb/N0 in dB")
@click.option("--frame-seed", type=int, default=0, show_default=True, help="Frame index to replay")
@click.option("--decoder", type=click.Choice(["bp", "hmm"]), help="Decoder under test")
@_decoder_options
@click.option("--seed", "master_seed", type=int, help="Master seed of the campaign")
@click.option("--noiseless", is_flag=True, help="Bypass the AWGN channel")
@click.option(
    "--trace", "trace_dir", type=click.Path(path_type=Path, file_okay=False), help="Trace directory"
)
@click.option(
    "--catastrophic",
    type=click.IntRange(min=0),
    multiple=True,
    help="Bit position given a wrong LLR of magnitude 16",
)
@click.option("--verbose", is_flag=True, help="Verbose output")
@_reports_errors
def frame(
    config_path: Path | None,
    ebn0_db: float,
    frame_seed: int,
    trace_dir: Path | None,
    catastrophic: tuple[int, ...],
    verbose: bool,
    **options: Any,
) -> None:
    """Decode a single frame, optionally writing per-iteration traces."""
    _configure_logging(verbose)
    options["ebn0_db"] = str(ebn0_db)
    cfg = _sim_config(config_path, options)
    result = run_single_frame(cfg, frame_seed, trace_dir, catastrophic=catastrophic)
    outcome = result.outcome
    click.echo(
        f"stage={outcome.stage} finisher={outcome.finisher} walks={outcome.walks_used} "
        f"bp={outcome.bp_invocations} erased={outcome.erasure_fraction:g} bit_errors={result.bit_errors}"
    )
    for path in result.trace_files:
        click.echo(f"trace: {path}")


@cli.command()
@_code_options
@click.option("--ebn0", "ebn0_db", required=True, type=float, help="Eb/N0 in dB")
@click.option("--max-frames", type=int, default=1000, show_default=True, help="Frames to scan")
@click.option(
    "--kind", "kinds", multiple=True, type=click.Choice(list(FIXTURE_KINDS)), help="Fixture kinds to find"
)
@_decoder_options
@click.option("--seed", "master_seed", type=int, help="Master seed of the campaign")
@click.option(
    "--out-dir",
    type=click.Path(path_type=Path, file_okay=False),
    default=Path("tests/fixtures"),
    show_default=True,
)
@click.option("--verbose", is_flag=True, help="Verbose output")
@_reports_errors
def fixtures(
    ebn0_db: float,
    max_frames: int,
    kinds: tuple[str, ...],
    out_dir: Path,
    verbose: bool,
    **options: Any,
) -> None:
    """Search simulated frames for strategy-specific stress fixtures."""
    _configure_logging(verbose)
    options["ebn0_db"] = str(ebn0_db)
    cfg = _sim_config(None, options)
    wanted = tuple(kinds) or FIXTURE_KINDS
    found = search_fixtures(cfg, wanted, max_frames)  # type: ignore[arg-type]
    for fixture in found:
        path = out_dir / f"{fixture.kind}_n{cfg.frame_bits}.json"
        save_fixture(fixture, path)
        click.echo(f"{fixture.kind}: stage {fixture.expected_stage} -> {path}")
    if not found:
        click.echo("No fixtures found.")


@cli.command()
def config() -> None:
    """Print the current configuration summary."""
    click.echo(f"Frame bits: {settings.frame_bits}")
    click.echo(f"Code seed: {settings.code_seed}")
    click.echo(f"Master seed: {settings.master_seed}")
    click.echo(f"Walks / iterations: {settings.max_walks} / {settings.hmm_iters}")
    click.echo(f"BP iterations: {settings.bp_iters}")
    click.echo(f"Erasures: {settings.erase_step:g} steps up to {settings.erase_max:g}")
    click.echo(f"Workers: {settings.workers}")
    click.echo(f"Log directory: {settings.log_dir}")


if __name__ == "__main__":
    cli()
