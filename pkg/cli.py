import io
import os
import csv
import sys
import json
import math
import logging
import functools
import dataclasses
from fractions import Fraction

import click
import numpy as np

from arith_core import ArtinError
from artin_density import artin_spec, artin_A, delta_mod, A_mod
from config import LOG_FORMAT, load_settings
from empirical import (
    compare,
    mark_triple,
    read_sieve_cache,
    sieve,
    write_sieve_cache,
)
from singular_series import (
    NonFactorizationMismatch,
    admissible_residues,
    classical_rho,
    classical_rho_closed,
    euler_constant,
    ksum_constant,
    nonfactorization_witness,
    positivity,
    triple_spec,
)
from splitting_fields import moree_identity_check

__version__ = "0.1.0"

logger = logging.getLogger(__name__)

ARGS = {"ignore_unknown_options": True}


def normalize(value):
    """Convert results into JSON-ready values with 12 significant digits"""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: normalize(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(format(value, '.12g'))
    if isinstance(value, complex):
        return {"re": normalize(value.real), "im": normalize(value.imag)}
    if isinstance(value, dict):
        return {str(k): normalize(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return [normalize(v) for v in sorted(value)]
    if isinstance(value, (list, tuple)):
        return [normalize(v) for v in value]
    raise TypeError(f"cannot serialize {type(value).__name__}")


def render(command: str, inputs: dict, result, truncation: dict) -> str:
    envelope = {
        "command": command,
        "inputs": inputs,
        "result": result,
        "truncation": truncation,
        "version": __version__,
    }
    return json.dumps(normalize(envelope), sort_keys=True)


def emit(command: str, inputs: dict, result, truncation=None):
    click.echo(render(command, inputs, result, truncation or {}))


def domain_errors(func):
    """Map library errors to exit code 1 with the message on stderr"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ArtinError, NonFactorizationMismatch) as e:
            logger.error(f"{func.__name__} failed: {e}")
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)
    return wrapper


class NRange(click.ParamType):
    name = "lo:hi:step"

    def convert(self, value, param, ctx):
        if isinstance(value, range):
            return value
        try:
            lo, hi, step = (int(part) for part in value.split(':'))
        except ValueError:
            self.fail(f"{value!r} is not of the form lo:hi:step", param, ctx)
        if step <= 0 or hi < lo:
            self.fail(f"{value!r} needs step > 0 and hi >= lo", param, ctx)
        return range(lo, hi + 1, step)


def estimate_result(estimate) -> dict:
    return {
        "value": estimate.value,
        "rational_part": estimate.rational_part,
        "transcendental_part": estimate.transcendental_part,
        "tail_estimate": estimate.tail_estimate,
    }


@click.group()
@click.version_option(__version__)
def cli():
    """Artin factors for ternary Goldbach with prescribed primitive roots"""
    settings = load_settings()
    logging.basicConfig(format=LOG_FORMAT, level=settings.log_level, stream=sys.stderr)


@cli.command(context_settings=ARGS)
@click.argument('a', type=int)
@domain_errors
def spec(a):
    """Fundamental discriminant and power index of a base"""
    s = artin_spec(a)
    emit("spec", {"a": a}, {"a": s.a, "delta": s.delta, "h": s.h})


@cli.command(context_settings=ARGS)
@click.argument('a', type=int)
@click.argument('x', type=int)
@click.argument('q', type=int)
@click.option('--pmax', type=int, default=None, help='Prime cut-off for A_a')
@domain_errors
def delta(a, x, q, pmax):
    """Density δ_a(x mod q) as an exact multiple of A_a"""
    pmax = pmax or load_settings().pmax
    s = artin_spec(a)
    ratio = delta_mod(s, x, q).ratio
    constant = artin_A(s, pmax)
    emit("delta", {"a": a, "x": x, "q": q},
         {"ratio": ratio, "a_mod_ratio": A_mod(s, x, q).ratio,
          "value": float(ratio) * constant.value, "artin_A": constant},
         {"pmax": pmax})


@cli.command(context_settings=ARGS)
@click.argument('bases', type=int, nargs=3)
@click.argument('n', type=int)
@click.option('--pmax', type=int, default=None)
@click.option('--threads', type=int, default=None)
@domain_errors
def constant(bases, n, pmax, threads):
    """C_a(n) by the Euler product"""
    settings = load_settings()
    pmax = pmax or settings.pmax
    threads = threads or settings.threads
    estimate = euler_constant(triple_spec(*bases), n, pmax, threads)
    emit("constant", {"bases": list(bases), "n": n}, estimate_result(estimate), {"pmax": pmax})


@cli.command(context_settings=ARGS)
@click.argument('bases', type=int, nargs=3)
@click.argument('n', type=int)
@click.option('--kmax', type=int, default=None)
@click.option('--qmax', type=int, default=None)
@click.option('--pmax', type=int, default=None)
@click.option('--threads', type=int, default=None)
@domain_errors
def crosscheck(bases, n, kmax, qmax, pmax, threads):
    """C_a(n) by both the Euler product and the k-sum"""
    settings = load_settings()
    kmax = kmax or settings.kmax
    qmax = qmax or settings.qmax
    pmax = pmax or settings.pmax
    threads = threads or settings.threads
    triple = triple_spec(*bases)
    euler = euler_constant(triple, n, pmax, threads)
    ksum = ksum_constant(triple, n, kmax, qmax, threads)
    gap = abs(euler.value - ksum.value) / euler.value if euler.value else math.inf
    emit("crosscheck", {"bases": list(bases), "n": n},
         {"euler": estimate_result(euler), "ksum": estimate_result(ksum), "relative_gap": gap},
         {"pmax": pmax, "kmax": kmax, "qmax": qmax})


@cli.command(context_settings=ARGS)
@click.argument('a', type=int)
@click.option('--csv', 'as_csv', is_flag=True, help='Emit modulus,residue rows')
@domain_errors
def table(a, as_csv):
    """Residues n for which (a, a, a) has a positive Artin factor"""
    modulus, residues = admissible_residues(a)
    if as_csv:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['modulus', 'residue'])
        for r in residues:
            writer.writerow([modulus, r])
        click.echo(buffer.getvalue(), nl=False)
        return
    emit("table", {"a": a}, {"modulus": modulus, "residues": residues})


@cli.command('positivity', context_settings=ARGS)
@click.argument('bases', type=int, nargs=3)
@click.argument('n', type=int)
@domain_errors
def positivity_cmd(bases, n):
    """Local positivity of C_a(n) with a witness"""
    positive, witness = positivity(triple_spec(*bases), n)
    emit("positivity", {"bases": list(bases), "n": n}, {"positive": positive, "witness": witness})


def _load_sieve(limit: int, cache: str, triple):
    if cache and os.path.exists(cache):
        data = read_sieve_cache(cache)
        if data.limit < limit:
            logger.warning(f"Cache {cache} covers only {data.limit}, resieving")
        else:
            return mark_triple(data, triple)
    data = mark_triple(sieve(limit), triple)
    if cache:
        write_sieve_cache(data, cache)
    return data


@cli.command(context_settings=ARGS)
@click.argument('bases', type=int, nargs=3)
@click.argument('n', type=int, required=False)
@click.option('--sieve-limit', type=int, default=None)
@click.option('--exclude-small', is_flag=True, help='Skip primes dividing 6Δ1Δ2Δ3')
@click.option('--classical-baseline', is_flag=True)
@click.option('--pmax', type=int, default=None)
@click.option('--threads', type=int, default=None)
@click.option('--cache', type=click.Path(dir_okay=False), default=None)
@click.option('--n-range', type=NRange(), default=None)
@click.option('--csv', 'as_csv', is_flag=True)
@domain_errors
def verify(bases, n, sieve_limit, exclude_small, classical_baseline, pmax, threads,
           cache, n_range, as_csv):
    """Count representations and compare with C_a(n)·n²"""
    if n is None and n_range is None:
        raise click.UsageError("give n or --n-range")
    settings = load_settings()
    pmax = pmax or settings.pmax
    threads = threads or settings.threads
    values = list(n_range) if n_range is not None else [n]
    limit = sieve_limit or max(settings.sieve_limit, max(values))
    triple = triple_spec(*bases)
    data = _load_sieve(limit, cache, triple)

    reports = [compare(triple, m, data, pmax, exclude_small, classical_baseline, threads)
               for m in values]
    if as_csv:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['n', 'raw_count', 'weighted_sum', 'predicted', 'ratio'])
        for r in reports:
            writer.writerow([r.n, r.raw_count, normalize(r.weighted_sum),
                             normalize(r.predicted.value), normalize(r.ratio)])
        click.echo(buffer.getvalue(), nl=False)
        return
    inputs = {"bases": list(bases), "n": n, "exclude_small": exclude_small,
              "classical_baseline": classical_baseline}
    if n_range is not None:
        inputs["n_range"] = f"{n_range.start}:{n_range.stop - 1}:{n_range.step}"
    result = reports if n_range is not None else reports[0]
    emit("verify", inputs, result, {"pmax": pmax, "sieve_limit": data.limit})


@cli.command(context_settings=ARGS)
@click.argument('a', type=int)
@click.argument('q', type=int)
@click.argument('b', type=int)
@click.option('--kmax', type=int, default=None)
@click.option('--pmax', type=int, default=None)
@domain_errors
def moree(a, q, b, kmax, pmax):
    """Truncated k-sum against δ_a(b mod q)"""
    settings = load_settings()
    kmax = kmax or settings.moree_kmax
    pmax = pmax or settings.pmax
    partial, target, gap = moree_identity_check(artin_spec(a), q, b, kmax, pmax)
    emit("moree", {"a": a, "q": q, "b": b},
         {"partial": partial, "target": target, "gap": gap},
         {"kmax": kmax, "pmax": pmax})


@cli.command('nonfact-demo')
@domain_errors
def nonfact_demo():
    """Local densities of (-15)^5 that do not factor prime by prime"""
    emit("nonfact-demo", {}, nonfactorization_witness())


@cli.command(context_settings=ARGS)
@click.argument('n', type=int)
@click.argument('p', type=int)
@domain_errors
def rho(n, p):
    """Classical local density ρ_p(n)"""
    value = classical_rho(n, p)
    emit("rho", {"n": n, "p": p}, {"rho": value, "closed_form": classical_rho_closed(n, p)})


def main():
    cli()


if __name__ == "__main__":
    main()
