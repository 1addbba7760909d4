"""
Command-line interface for face-graph-verifier.
"""

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import click
from pydantic import ValidationError

from . import __version__
from .errors import FaceVerifierError
from .evaluation import (
    DEFAULT_SWEEP,
    compute_roc,
    format_summary,
    load_manifest,
    rank1_identification,
    run_verification,
    write_roc_csv,
)
from .fusion import FusionConfig
from .graphmatch import RelaxationConfig, write_trace_csv
from .keypoint import SiftConfig, extract_keypoints, load_image, save_keypoints
from .verifier import FaceVerifier, PipelineConfig, VerificationReport

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_ACCEPT = 0
EXIT_REJECT = 1
EXIT_ERROR = 2

_RECOVERABLE = (FaceVerifierError, OSError, ValidationError)

_unit = click.FloatRange(0.0, 1.0)
_positive = click.FloatRange(min=0.0, min_open=True)


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    show_default=True,
    help="Logging level for diagnostics on standard error.",
)
def cli(log_level: str):
    """face_verify - Verify faces by matching SIFT landmark graphs.

    Keypoints around the eyes, nose and mouth are matched region by region with
    probabilistic relaxation and the regional scores are fused with Dempster's rule.
    """
    logging.basicConfig(level=getattr(logging, log_level.upper()), format=LOG_FORMAT,
                        stream=sys.stderr)


def sift_options(func):
    """Detector overrides shared by every command."""
    options = [
        click.option("--octaves", type=click.IntRange(min=1), default=4, show_default=True,
                     help="Maximum number of scale-space octaves."),
        click.option("--scales", type=click.IntRange(min=2), default=3, show_default=True,
                     help="DoG layers searched per octave."),
        click.option("--contrast-threshold", type=_positive, default=0.03, show_default=True,
                     help="Minimum DoG contrast of a keypoint."),
        click.option("--edge-threshold", type=_positive, default=10.0, show_default=True,
                     help="Maximum principal curvature ratio of a keypoint."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def pipeline_options(func):
    """Grouping, matching and fusion overrides shared by ``match`` and ``evaluate``."""
    options = [
        click.option("--roi-radius", type=_positive, default=None,
                     help="ROI radius in pixels [default: 0.18 x image height]."),
        click.option("--phi", type=_positive, default=1e-4, show_default=True,
                     help="Relaxation convergence threshold."),
        click.option("--max-iters", type=click.IntRange(min=1), default=50, show_default=True,
                     help="Relaxation iteration cap."),
        click.option("--sigma-e", type=_positive, default=10.0, show_default=True,
                     help="Edge similarity length scale in pixels."),
        click.option("--min-posterior", type=_unit, default=0.5, show_default=True,
                     help="Minimum posterior for a node assignment."),
        click.option("--alpha", type=_unit, default=0.1, show_default=True,
                     help="Uncertainty mass per region."),
        click.option("--threshold", type=_unit, default=0.5, show_default=True,
                     help="Decision threshold on the fused score."),
        click.option("--missing-policy", type=click.Choice(["vacuous", "skip"]),
                     default="vacuous", show_default=True,
                     help="How regions without keypoints enter fusion."),
        click.option("--decision-basis", type=click.Choice(["belief", "pignistic"]),
                     default="belief", show_default=True,
                     help="Fused quantity compared against the threshold."),
        click.option("--region-score", type=click.Choice(["similarity", "posterior"]),
                     default="similarity", show_default=True,
                     help="Regional score: posterior weighted by descriptor similarity, "
                          "or posterior alone."),
    ]
    for option in reversed(options):
        func = option(func)
    return sift_options(func)


def _sift_config(octaves, scales, contrast_threshold, edge_threshold) -> SiftConfig:
    return SiftConfig(
        octaves=octaves,
        scales_per_octave=scales,
        contrast_threshold=contrast_threshold,
        edge_response_threshold=edge_threshold,
    )


def _pipeline_config(options: dict) -> PipelineConfig:
    return PipelineConfig(
        sift=_sift_config(
            options["octaves"], options["scales"], options["contrast_threshold"],
            options["edge_threshold"],
        ),
        roi_radius=options["roi_radius"],
        relaxation=RelaxationConfig(
            phi=options["phi"],
            max_iterations=options["max_iters"],
            sigma_e=options["sigma_e"],
            min_posterior=options["min_posterior"],
        ),
        fusion=FusionConfig(
            uncertainty_alpha=options["alpha"],
            decision_threshold=options["threshold"],
            missing_region_policy=options["missing_policy"],
            decision_basis=options["decision_basis"],
        ),
        region_score=options["region_score"],
    )


def handle_errors(func):
    """Report library and I/O errors on stderr and exit with status 2."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except _RECOVERABLE as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_ERROR)

    return wrapper


@cli.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False))
@sift_options
@handle_errors
def extract(image: str, output: str, octaves, scales, contrast_threshold, edge_threshold):
    """Extract SIFT keypoints from a PGM image into a CSV file.

    Examples:
        face_verify extract s1/1.pgm s1/1.csv --octaves 3
    """
    cfg = _sift_config(octaves, scales, contrast_threshold, edge_threshold)
    keypoints = extract_keypoints(load_image(image), cfg)
    save_keypoints(keypoints, output)
    click.echo(f"Extracted {len(keypoints)} keypoints from {image}")
    click.echo(f"Keypoints written to: {output}")


@cli.command()
@click.argument("gallery_image", type=click.Path(exists=True, dir_okay=False))
@click.argument("gallery_landmarks", type=click.Path(exists=True, dir_okay=False))
@click.argument("probe_image", type=click.Path(exists=True, dir_okay=False))
@click.argument("probe_landmarks", type=click.Path(exists=True, dir_okay=False))
@pipeline_options
@click.option("--keypoints-in", nargs=2, type=click.Path(exists=True, dir_okay=False),
              default=None, help="Precomputed keypoint files (gallery, probe).")
@click.option("--keypoints-out", nargs=2, type=click.Path(dir_okay=False), default=None,
              help="Write the keypoints used (gallery, probe).")
@click.option("--trace-dir", type=click.Path(file_okay=False), default=None,
              help="Write a relaxation trace CSV per region into this directory.")
@click.option("--output", "-o", type=click.Path(dir_okay=False),
              help="Output file for the verification report (JSON format).")
@click.option("--verbose", "-v", is_flag=True, help="Show matcher details per region.")
@handle_errors
def match(
    gallery_image: str,
    gallery_landmarks: str,
    probe_image: str,
    probe_landmarks: str,
    keypoints_in: Optional[Tuple[str, str]],
    keypoints_out: Optional[Tuple[str, str]],
    trace_dir: Optional[str],
    output: Optional[str],
    verbose: bool,
    **options,
):
    """Verify a probe face against a gallery face.

    Exits with 0 on ACCEPT, 1 on REJECT and 2 on error.

    Examples:
        face_verify match s1/1.pgm s1/1.lm s1/2.pgm s1/2.lm --threshold 0.6
    """
    verifier = FaceVerifier(_pipeline_config(options))
    gallery_keypoints, probe_keypoints = keypoints_in or (None, None)
    gallery = verifier.prepare(gallery_image, gallery_landmarks, gallery_keypoints)
    probe = verifier.prepare(probe_image, probe_landmarks, probe_keypoints)

    if keypoints_out:
        save_keypoints(gallery.keypoints, keypoints_out[0])
        save_keypoints(probe.keypoints, keypoints_out[1])

    report = verifier.compare(gallery, probe)
    _display_report(report, verbose)

    if trace_dir:
        directory = Path(trace_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for result in report.regions:
            if result.relaxation is not None:
                write_trace_csv(result.relaxation, directory / f"{result.region.value}.csv")
        click.echo(f"Relaxation traces written to: {directory}")

    if output:
        with open(output, "w", encoding="utf-8") as f:
            json.dump(report.model_dump(mode="json"), f, indent=2)
        click.echo(f"Report saved to: {output}")

    sys.exit(EXIT_ACCEPT if report.accepted else EXIT_REJECT)


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.argument("roc_output", type=click.Path(dir_okay=False))
@pipeline_options
@click.option("--sweep", type=click.IntRange(min=2), default=DEFAULT_SWEEP, show_default=True,
              help="Number of thresholds swept over [0, 1].")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker threads for preparation and comparison.")
@click.option("--progress", is_flag=True, help="Show progress bars on standard error.")
@handle_errors
def evaluate(manifest: str, roc_output: str, sweep: int, workers: int, progress: bool,
             **options):
    """Run all-vs-all verification over a manifest and write the ROC table.

    The manifest is a CSV file with header ``subject_id,image,landmarks[,keypoints]``.
    Prints ``eer=<v> best_accuracy=<v> rank1=<v>``.

    Examples:
        face_verify evaluate orl.csv roc.csv --workers 4 --progress
    """
    trials = run_verification(
        load_manifest(manifest), _pipeline_config(options), workers=workers, progress=progress
    )
    summary = compute_roc(trials, n_thresholds=sweep)
    write_roc_csv(summary, roc_output)
    click.echo(format_summary(summary, rank1_identification(trials)))


def _display_report(report: VerificationReport, verbose: bool):
    """Print regional scores, the fused mass and the decision.

    Args:
        report (VerificationReport):
            The report to display.
        verbose (bool):
            Whether to show matcher details.
    """
    click.echo(f"Gallery: {report.gallery}")
    click.echo(f"Probe: {report.probe}")
    for result in report.regions:
        nodes = f"{result.gallery_nodes}/{result.probe_nodes}"
        if result.missing:
            click.echo(f"  {result.region.value:<10} MISSING  (nodes {nodes})")
            continue
        click.echo(f"  {result.region.value:<10} {result.score:.4f}  (nodes {nodes})")
        if verbose:
            click.echo(
                f"    iterations: {result.iterations}  converged: {result.converged}  "
                f"assigned: {result.assigned}"
            )
    mass = report.mass
    click.echo(
        f"Fused mass: genuine={mass.genuine:.4f} impostor={mass.impostor:.4f} "
        f"uncertain={mass.uncertain:.4f}"
    )
    click.echo(f"Fused genuine belief: {report.belief:.4f}")
    if report.score != report.belief:
        click.echo(f"Decision score: {report.score:.4f}")
    if report.accepted:
        click.echo(click.style("ACCEPT", fg="green", bold=True))
    else:
        click.echo(click.style("REJECT", fg="red", bold=True))


def main():
    """Main entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
