"""Figure CLI: render publication-style figures from experiment logs."""

from __future__ import annotations

import json
import sys

import click

from .figures import FIGURE_KINDS, FigureSpec, make_figure
from .logs import LogFormatError, MissingColumnError


@click.command()
@click.option("--kind", type=click.Choice(FIGURE_KINDS), required=True)
@click.option("--logs", required=True,
              help="episode-log glob (or a training_curve.csv for training_curve)")
@click.option("--out", required=True, help="output image path (extension set by --format)")
@click.option("--format", "fmt", type=click.Choice(["png", "svg"]), default="png",
              show_default=True)
@click.option("--title", default=None)
@click.option("--print-stats/--no-print-stats", default=False,
              help="dump the overlay statistics as JSON")
def main(kind, logs, out, fmt, title, print_stats):
    """Render one figure from trihop experiment outputs."""
    spec = FigureSpec(kind=kind, log_glob=logs, out_path=out, fmt=fmt, title=title)
    try:
        result = make_figure(spec)
    except (LogFormatError, MissingColumnError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {result.path}")
    click.echo(f"caption: {result.caption}")
    if print_stats:
        click.echo(json.dumps(result.stats, indent=2))


if __name__ == "__main__":
    main()
