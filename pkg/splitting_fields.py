import math
import logging
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np

from arith_core import (
    ArtinError,
    euler_phi,
    is_squarefree,
    kronecker,
    lcm,
    moebius,
    prime_divisors,
)
from artin_density import ArtinSpec, artin_A, beta, delta_mod

logger = logging.getLogger(__name__)

COMPLEX_TOLERANCE = 1e-9


class NotSquarefree(ArtinError):
    """k must be squarefree"""


class NotCoprime(ArtinError):
    """Residue b shares a factor with the modulus"""


def _require_squarefree(k: int):
    if k < 1 or not is_squarefree(k):
        raise NotSquarefree(f"k={k} is not a positive squarefree integer")


def _indicator(spec: ArtinSpec, q: int, k: int, b: int) -> int:
    if (b - 1) % math.gcd(q, k) != 0:
        return 0
    d = abs(spec.delta)
    if k % 2 == 0 and k % d != 0 and lcm(q, k) % d == 0:
        return 1 if kronecker(beta(spec, q), b) == 1 else 0
    return 1


def c_indicator(spec: ArtinSpec, q: int, k: int, b: int) -> int:
    """Whether some automorphism of F_{a,q,k} acts as b on ζ_q and fixes a^(1/k)"""
    _require_squarefree(k)
    if math.gcd(b, q) != 1:
        raise NotCoprime(f"gcd({b}, {q}) != 1")
    return _indicator(spec, q, k, b % q)


def field_degree(spec: ArtinSpec, q: int, k: int) -> int:
    """[Q(ζ_[q,k], a^(1/k)) : Q]"""
    _require_squarefree(k)
    modulus = lcm(q, k)
    k_reduced = k // math.gcd(k, spec.h)
    epsilon = 2 if k % 2 == 0 and modulus % abs(spec.delta) == 0 else 1
    return k_reduced * euler_phi(modulus) // epsilon


@lru_cache(maxsize=4096)
def indicator_support(spec: ArtinSpec, q: int, k: int) -> np.ndarray:
    """Units y mod q with c_{a,q,k}(y) = 1"""
    return np.array(
        [y for y in range(q) if math.gcd(y, q) == 1 and _indicator(spec, q, k, y)],
        dtype=np.int64,
    )


def _phases(residues: np.ndarray, b: int, q: int) -> np.ndarray:
    return np.exp(2j * np.pi * ((b * residues) % q) / q)


def exp_sum_S(spec: ArtinSpec, q: int, k: int, b: int) -> complex:
    """S_{a,q,k}(b): sum of e(by/q) over units y with c(y) = 1"""
    _require_squarefree(k)
    support = indicator_support(spec, q, k)
    if support.size == 0:
        return 0j
    return complex(_phases(support, b % q, q).sum())


def ramanujan_sum(q: int, b: int) -> int:
    """Closed form μ(q/g)φ(q)/φ(q/g) with g = gcd(b, q)"""
    g = math.gcd(b, q)
    return moebius(q // g) * euler_phi(q) // euler_phi(q // g)


def twisted_sum(values: Sequence[complex], c: int, Q: int) -> complex:
    """Σ_{b mod Q} e(bc/Q) f(b) for f sampled as values[b]"""
    f = np.asarray(values, dtype=np.complex128)
    if f.shape != (Q,):
        raise ArtinError(f"expected {Q} samples, got shape {f.shape}")
    return complex((_phases(np.arange(Q, dtype=np.int64), c % Q, Q) * f).sum())


def _close(x: complex, y: complex) -> bool:
    return abs(x.real - y.real) <= COMPLEX_TOLERANCE and abs(x.imag - y.imag) <= COMPLEX_TOLERANCE


def delta_part(spec: ArtinSpec, q: int) -> int:
    """Largest divisor of q composed of primes dividing Δ"""
    d = 1
    rest = q
    for p in prime_divisors(spec.delta):
        while rest % p == 0:
            rest //= p
            d *= p
    return d


def c_factorization_check(spec: ArtinSpec, q: int, k: int, b: int) -> bool:
    """c(q) against the product of c over the Δ-part and the coprime prime powers"""
    _require_squarefree(k)
    if math.gcd(b, q) != 1:
        raise NotCoprime(f"gcd({b}, {q}) != 1")
    d = delta_part(spec, q)
    moduli = [d] if d > 1 else []
    rest = q // d
    for p in prime_divisors(rest):
        power = 1
        while rest % p == 0:
            rest //= p
            power *= p
        moduli.append(power)
    product = 1
    for m in moduli:
        product *= _indicator(spec, m, k, b % m)
    return _indicator(spec, q, k, b % q) == product


def S_multiplicativity_check(spec: ArtinSpec, q1: int, q2: int, k: int, b: int) -> bool:
    """S(q1 q2, b) = S(q1, b1) S(q2, b2) where b = b1 q2 + b2 q1"""
    if math.gcd(q1, q2) != 1:
        raise ArtinError(f"moduli {q1} and {q2} are not coprime")
    d = abs(spec.delta)
    if math.gcd(q1, d) != 1 and math.gcd(q2, d) != 1:
        raise ArtinError(f"one of {q1}, {q2} must be prime to {spec.delta}")
    b1 = b * pow(q2, -1, q1) % q1 if q1 > 1 else 0
    b2 = b * pow(q1, -1, q2) % q2 if q2 > 1 else 0
    whole = exp_sum_S(spec, q1 * q2, k, b)
    split = exp_sum_S(spec, q1, k, b1) * exp_sum_S(spec, q2, k, b2)
    return _close(whole, split)


def squarefree_upto(kmax: int) -> Tuple[int, ...]:
    return tuple(k for k in range(1, kmax + 1) if is_squarefree(k))


def moree_identity_check(spec: ArtinSpec, q: int, b: int, kmax: int,
                         pmax: int = 10 ** 6) -> Tuple[float, float, float]:
    """Truncated k-sum of μ(k)c(b)/degree against the numeric δ_a(b mod q).

    Returns (partial, target, gap).
    """
    if q < 1:
        raise ArtinError(f"modulus must be positive, got {q}")
    if math.gcd(b, q) != 1:
        raise NotCoprime(f"gcd({b}, {q}) != 1")
    terms = []
    for k in squarefree_upto(kmax):
        if _indicator(spec, q, k, b % q):
            terms.append(moebius(k) / field_degree(spec, q, k))
    partial = math.fsum(terms)
    target = float(delta_mod(spec, b, q).ratio) * artin_A(spec, pmax).value
    gap = abs(partial - target)
    logger.info(f"Moree check a={spec.a} b={b} mod {q}, kmax={kmax}: gap={gap:.3e}")
    return partial, target, gap


def max_abs_S(spec: ArtinSpec, qmax: int, kmax: int) -> float:
    """Largest |S_{a,q,k}(b)| over q <= qmax, squarefree k <= kmax and b mod q"""
    best = 0.0
    for q in range(1, qmax + 1):
        residues = np.arange(q, dtype=np.int64)
        for k in squarefree_upto(kmax):
            support = indicator_support(spec, q, k)
            if support.size == 0:
                continue
            # rows: b, columns: y
            phases = np.exp(2j * np.pi * (np.outer(residues, support) % q) / q)
            best = max(best, float(np.abs(phases.sum(axis=1)).max()))
    logger.debug(f"max |S| for a={spec.a}: {best}")
    return best
