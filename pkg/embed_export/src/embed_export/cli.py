"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 for malformed input or an encoder
that cannot be loaded. Non-zero exits print a one-line reason to stderr.
"""
from __future__ import annotations

import json
import sys

import click

from . import __version__
from .encoders import EncoderError
from .exporter import ExportError, ExportJob, export_embeddings


class DataError(click.ClickException):
    """Bad input data or unavailable encoder; exits 2."""

    exit_code = 2


class ExportCommand(click.Command):
    """Command whose usage errors exit 1 (data errors keep exit 2)."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.UsageError as exc:
            click.echo(f"usage error: {exc.format_message()}", err=True)
            sys.exit(1)
        except click.ClickException as exc:
            click.echo(f"error: {exc.format_message()}", err=True)
            sys.exit(exc.exit_code)
        except click.exceptions.Abort:
            click.echo("aborted", err=True)
            sys.exit(1)
        sys.exit(rv if isinstance(rv, int) else 0)


@click.command(cls=ExportCommand)
@click.version_option(version=__version__, prog_name="embed-export")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="cleaned documents, one JSON object per line with id and text")
@click.option("--model", "model_name", default="hash:256", show_default=True,
              help="encoder: hash:<dims> or a pretrained sentence-transformers name")
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
def cli(input_path, model_name, batch_size, output_path):
    """Encode cleaned documents and write an embeddings CSV."""
    if batch_size < 1:
        raise click.UsageError(f"--batch-size must be >= 1, got {batch_size}")
    job = ExportJob(
        input=input_path, model_name=model_name,
        batch_size=batch_size, output=output_path,
    )
    try:
        count = export_embeddings(job)
    except (ExportError, EncoderError) as exc:
        raise DataError(str(exc)) from exc
    click.echo(json.dumps({"docs": count, "model": model_name, "output": output_path}))


main = cli

if __name__ == "__main__":
    main()
