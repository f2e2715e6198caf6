"""Command line entry point: ietlab limit|verify|lyapunov."""

from __future__ import annotations

import json
import sys

import click

from .errors import (
    ConfigError,
    DegenerateObservable,
    DegenerateVariance,
    IetLabError,
    KeaneDegenerate,
    NonZeroMean,
    NoSecondExponent,
)
from .experiments import load_config, run_limit, run_lyapunov, run_verify

_DEGENERATE = (NoSecondExponent, DegenerateVariance, DegenerateObservable,
               KeaneDegenerate, NonZeroMean)


def _prepare(config_path, seed, threads):
    if threads is not None:
        import numba

        # results are thread-count invariant by construction, so a request
        # beyond what the host exposes is clamped rather than rejected
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {config_path} is not valid JSON: {exc}") \
            from exc
    return load_config(raw, seed_override=seed)


def _common(fn):
    fn = click.option("--threads", type=click.IntRange(min=1), default=None,
                      help="Worker thread count (results do not depend on it).")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the config seed.")(fn)
    fn = click.option("--out", required=True,
                      type=click.Path(file_okay=False),
                      help="Output directory for report files.")(fn)
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False, dir_okay=False),
                      help="JSON experiment configuration.")(fn)
    return fn


@click.group()
def cli():
    """Interval exchange laboratory: limit laws, identities, exponents."""


@cli.command()
@_common
def limit(config_path, out, seed, threads):
    """Compare laws of normalized orbit sums against the cocycle law."""
    return run_limit(_prepare(config_path, seed, threads), out)


@cli.command()
@_common
def verify(config_path, out, seed, threads):
    """Run the structural identity and density checks."""
    return run_verify(_prepare(config_path, seed, threads), out)


@cli.command()
@_common
def lyapunov(config_path, out, seed, threads):
    """Estimate the renormalization exponent spectrum."""
    return run_lyapunov(_prepare(config_path, seed, threads), out)


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 3
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 3
    except _DEGENERATE as exc:
        click.echo(f"degenerate input: {exc}", err=True)
        return 2
    except IetLabError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    return int(code) if code is not None else 0


if __name__ == "__main__":
    sys.exit(main())
