import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from arith_core import (
    ArtinError,
    factorize,
    prime_divisors,
    moebius,
    euler_phi,
    odd_part,
    kronecker,
    squarefree_kernel,
    primes_up_to,
)

logger = logging.getLogger(__name__)


class InvalidBase(ArtinError):
    """Base is ±1, 0 or a perfect square"""


@dataclass(frozen=True)
class ArtinSpec:
    """Validated base a with its discriminant and power index"""
    a: int
    delta: int
    h: int


@dataclass(frozen=True)
class DensityValue:
    """Exact density as a rational multiple of the Artin constant A_a"""
    ratio: Fraction

    def __post_init__(self):
        if self.ratio < 0:
            raise ArtinError(f"density ratio must be nonnegative, got {self.ratio}")

    @property
    def positive(self) -> bool:
        return self.ratio > 0


@dataclass(frozen=True)
class RealWithError:
    value: float
    error_bound: float

    def interval(self):
        return self.value - self.error_bound, self.value + self.error_bound


@lru_cache(maxsize=None)
def artin_spec(a: int) -> ArtinSpec:
    """Validate a and compute its fundamental discriminant and h"""
    if a in (-1, 0, 1):
        raise InvalidBase(f"{a} cannot be a primitive root base")
    if a > 0 and math.isqrt(a) ** 2 == a:
        raise InvalidBase(f"{a} is a perfect square")
    exponents = [e for _, e in factorize(abs(a))]
    h = 0
    for e in exponents:
        h = math.gcd(h, e)
    if a < 0:
        h = odd_part(h)
    kernel = squarefree_kernel(a)
    delta = kernel if kernel % 4 == 1 else 4 * kernel
    spec = ArtinSpec(a=a, delta=delta, h=h)
    logger.debug(f"Artin spec for {a}: delta={delta}, h={h}")
    return spec


@lru_cache(maxsize=None)
def f_dagger(spec: ArtinSpec, q: int) -> Fraction:
    result = Fraction(1)
    for p in prime_divisors(q):
        if spec.h % p == 0:
            result *= Fraction(p - 1, p - 2)
        else:
            result *= Fraction(p * (p - 1), p * p - p - 1)
    return result


@lru_cache(maxsize=None)
def f_ddagger(spec: ArtinSpec, q: int) -> Fraction:
    result = Fraction(1)
    for p in prime_divisors(q):
        if spec.h % p == 0:
            result /= p - 2
        else:
            result /= p * p - p - 1
    return result


def beta(spec: ArtinSpec, q: int) -> int:
    """Fundamental discriminant attached to the Δ-part of q, or 1"""
    g = math.gcd(q, abs(spec.delta))
    rest = spec.delta // g
    if rest % 2 == 0:
        return 1
    sign = -1 if ((rest - 1) // 2) % 2 else 1
    return sign * g


@lru_cache(maxsize=128)
def artin_A(spec: ArtinSpec, pmax: int) -> RealWithError:
    """Artin constant A_a truncated to primes <= pmax.

    Each omitted factor lies in [1 - 1/(p(p-1)), 1], so the tail is
    bounded by the telescoping sum of 1/(m(m-1)) over m > pmax.
    """
    if pmax < 100:
        raise ArtinError(f"pmax must be at least 100, got {pmax}")
    prime_ints = primes_up_to(pmax)
    primes = prime_ints.astype(np.float64)
    divides_h = spec.h % prime_ints == 0
    terms = np.where(divides_h, 1.0 / (primes - 1.0), 1.0 / (primes * (primes - 1.0)))
    value = float(np.exp(np.sum(np.log1p(-terms))))
    return RealWithError(value=value, error_bound=1.0 / pmax)


@lru_cache(maxsize=None)
def L_bracket(spec: ArtinSpec) -> Fraction:
    """Exact factor 1 + μ(2|Δ|)f‡(|Δ|) with L_a = A_a times it"""
    d = abs(spec.delta)
    return 1 + moebius(2 * d) * f_ddagger(spec, d)


def L_const(spec: ArtinSpec, pmax: int) -> RealWithError:
    base = artin_A(spec, pmax)
    bracket = float(L_bracket(spec))
    return RealWithError(value=base.value * bracket, error_bound=base.error_bound * bracket)


@lru_cache(maxsize=None)
def _a_mod_ratio(spec: ArtinSpec, x: int, q: int) -> Fraction:
    if math.gcd(x, q) != 1:
        return Fraction(0)
    shifted = math.gcd(x - 1, q)
    if math.gcd(shifted, spec.h) != 1:
        return Fraction(0)
    ratio = f_dagger(spec, q) / euler_phi(q)
    for p in prime_divisors(shifted):
        ratio *= Fraction(p - 1, p)
    return ratio


def A_mod(spec: ArtinSpec, x: int, q: int) -> DensityValue:
    """A_a(x mod q) / A_a"""
    if q < 1:
        raise ArtinError(f"modulus must be positive, got {q}")
    return DensityValue(_a_mod_ratio(spec, x % q, q))


@lru_cache(maxsize=None)
def _delta_ratio(spec: ArtinSpec, x: int, q: int) -> Fraction:
    base = _a_mod_ratio(spec, x, q)
    if base == 0:
        return base
    d = abs(spec.delta)
    g = math.gcd(q, d)
    mu = moebius(2 * d // g)
    if mu == 0:
        return base
    return base * (1 + mu * kronecker(beta(spec, q), x) * f_ddagger(spec, d // g))


def delta_mod(spec: ArtinSpec, x: int, q: int) -> DensityValue:
    """δ_a(x mod q) / A_a as an exact rational"""
    if q < 1:
        raise ArtinError(f"modulus must be positive, got {q}")
    return DensityValue(_delta_ratio(spec, x % q, q))


def delta_lower_bound(spec: ArtinSpec, x: int, q: int) -> Fraction:
    """Structural lower bound A_a(x mod q)/2 for a nonvanishing δ ratio"""
    if not delta_mod(spec, x, q).positive:
        return Fraction(0)
    return A_mod(spec, x, q).ratio / 2


def delta_refinement_check(spec: ArtinSpec, q: int, Q: int) -> bool:
    """Check δ(m mod Q) equals the sum of δ(b mod q) over lifts b of m"""
    if q % Q != 0:
        raise ArtinError(f"refinement needs Q | q, got Q={Q}, q={q}")
    for m in range(Q):
        coarse = _delta_ratio(spec, m, Q)
        fine = sum((_delta_ratio(spec, b, q) for b in range(m, q, Q)), Fraction(0))
        if coarse != fine:
            logger.warning(f"Refinement mismatch for a={spec.a}: {m} mod {Q} vs mod {q}")
            return False
    return True
