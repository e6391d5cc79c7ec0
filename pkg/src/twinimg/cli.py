"""Command-line pipeline: ``twinimg simulate | analyze | report``.

``simulate`` writes one camera pair (two ``.twim`` frame files plus
JSON sidecars) for the requested plane; ``analyze`` consumes a near and
a far pair and writes ``report.json`` with the correlation-map and SNR
CSVs next to it; ``report`` pretty-prints a report and exits 0 iff the
Heisenberg bound is violated on both axes.

The default output directory is ``$TWINIMG_OUTDIR`` (falling back to
the working directory); every command echoes the fully resolved
configuration it ran with, and rerunning with that echo reproduces the
outputs byte for byte.
"""

from __future__ import annotations

import os
from pathlib import Path

import click

from . import __version__
from .analysis import AnalyzeOptions
from .correlation import NoSignificantPeakError
from .outputs import read_report, write_corr_csv, write_report, write_snr_csv
from .pipeline import analyze_files, simulate_stacks, write_run
from .runconfig import ConfigError, default_config, echo_config, load_config
from .sampling import PlaneKind

OUTDIR_ENV = "TWINIMG_OUTDIR"


def _outdir(value: str | None) -> Path:
    return Path(value or os.environ.get(OUTDIR_ENV) or ".")


@click.group()
@click.version_option(version=__version__, prog_name="twinimg")
def main() -> None:
    """Twin-image photon-pair simulation and EPR correlation analysis."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Run configuration file (key = value lines).")
@click.option("--plane", type=click.Choice(["near", "far"]), required=True,
              help="Camera plane: crystal image (near) or focal plane (far).")
@click.option("--frames", type=int, default=None, help="Override the frame count.")
@click.option("--seed", type=int, default=None, help="Override the RNG seed.")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help=f"Output directory (default ${OUTDIR_ENV} or CWD).")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker threads for frame generation (output is identical for any count).")
def simulate(config_path, plane, frames, seed, out, workers):
    """Simulate a twin-camera acquisition run and write frame files."""
    try:
        cfg = load_config(config_path) if config_path else default_config()
        cfg = cfg.with_overrides(frames=frames, seed=seed)
    except (ConfigError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    plane_kind = PlaneKind.from_name(plane)
    click.echo(echo_config(cfg), nl=False)
    stacks = simulate_stacks(cfg, plane_kind, workers=max(1, workers))
    paths = write_run(_outdir(out), cfg, plane_kind, stacks)
    for path in paths:
        click.echo(f"wrote {path}")


def _parse_counts(text: str | None) -> tuple[int, ...] | None:
    if not text:
        return None
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise click.ClickException(f"bad --snr-frames list: {text!r}") from exc


@main.command()
@click.option("--near", nargs=2, required=True, type=click.Path(exists=True, dir_okay=False),
              help="Near-field frame files (camera 1, camera 2).")
@click.option("--far", nargs=2, required=True, type=click.Path(exists=True, dir_okay=False),
              help="Far-field frame files (camera 1, camera 2).")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help=f"Output directory (default ${OUTDIR_ENV} or CWD).")
@click.option("--grouping", type=int, default=8, show_default=True,
              help="Pixel grouping of the detection-SNR maps.")
@click.option("--snr-frames", default=None,
              help="Comma-separated frame counts for the SNR curve.")
@click.option("--fit-window", type=int, default=15, show_default=True)
@click.option("--half-window", type=int, default=64, show_default=True)
@click.option("--bootstrap", type=int, default=100, show_default=True,
              help="Frame-bootstrap resamples for the uncertainty cross-check.")
def analyze(near, far, out, grouping, snr_frames, fit_window, half_window, bootstrap):
    """Analyze a near/far run pair and write report.json plus CSV maps."""
    options = AnalyzeOptions(
        grouping=grouping,
        half_window=half_window,
        fit_window=fit_window,
        snr_frame_counts=_parse_counts(snr_frames),
        bootstrap_resamples=bootstrap,
    )
    try:
        report, pa_near, pa_far, configs = analyze_files(tuple(near), tuple(far), options)
    except NoSignificantPeakError as exc:
        raise click.ClickException(f"no significant peak: {exc}") from exc
    except (ConfigError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc

    outdir = _outdir(out)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, cfg in configs.items():
        click.echo(f"# resolved {name} configuration")
        click.echo(echo_config(cfg), nl=False)
    report_path = write_report(outdir / "report.json", report)
    write_corr_csv(outdir / "near_corr.csv", pa_near.corr_map,
                   configs["near"].geometry.effective_pixel(PlaneKind.NEAR_FIELD))
    write_corr_csv(outdir / "far_corr.csv", pa_far.corr_map,
                   configs["far"].geometry.effective_pixel(PlaneKind.FAR_FIELD))
    write_snr_csv(outdir / "snr.csv", report)
    click.echo(f"wrote {report_path}")
    _print_report(report)


def _print_report(report) -> None:
    near, far = report.near, report.far
    click.echo("")
    click.echo(f"EPR analysis over {report.meta.get('frame_count', '?')} frame pairs per plane")
    click.echo("Inferred variances")
    click.echo(f"  {'axis':4} {'near field [' + near.unit + ']':>28}"
               f" {'far field [' + far.unit + ']':>32}")
    for axis in ("x", "y"):
        vn = getattr(near, f"var_{axis}")
        un = getattr(near, f"unc_{axis}")
        vf = getattr(far, f"var_{axis}")
        uf = getattr(far, f"unc_{axis}")
        click.echo(f"  {axis:4} {vn:>17.4g} +/- {un:<8.2g} {vf:>19.4g} +/- {uf:<8.2g}")
    click.echo("Conditional-variance products (Heisenberg bound 0.25 hbar^2)")
    for axis in ("x", "y"):
        a = getattr(report, axis)
        word = "VIOLATED" if a.violated else "NOT VIOLATED"
        click.echo(f"  {axis}: {a.product:.4g} +/- {a.unc:.2g} hbar^2"
                   f"  {word} ({a.n_sigma:.0f} sigma below bound), V = {a.v:.1f}")
    click.echo(f"Schmidt number K = sqrt(V_x V_y) = "
               f"{report.schmidt_k:.1f} +/- {report.schmidt_k_unc:.1f}")
    click.echo(f"Sub-shot-noise ratio r: near = {near.r:.4f} +/- {near.r_unc:.4f},"
               f" far = {far.r:.4f} +/- {far.r_unc:.4f}")
    click.echo(f"Peak detection ({report.meta.get('detect_sigma', 4.5)} sigma, "
               f"{report.meta.get('grouping', '?')}x{report.meta.get('grouping', '?')} grouping): "
               f"min frames near = {near.min_frames_detect}, far = {far.min_frames_detect}")


@main.command("report")
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
def report_cmd(report_path):
    """Print a report summary; exit 0 iff both axes violate the bound."""
    try:
        report = read_report(report_path)
    except Exception as exc:  # malformed JSON, schema violation, bad tag
        raise click.ClickException(f"cannot read report: {exc}") from exc
    _print_report(report)
    ctx = click.get_current_context()
    ctx.exit(0 if (report.x.violated and report.y.violated) else 2)


if __name__ == "__main__":
    main()
