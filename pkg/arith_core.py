import math
import random
import logging
from fractions import Fraction
from functools import lru_cache
from typing import List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

BigRational = Fraction
Factorization = Tuple[Tuple[int, int], ...]

TRIAL_DIVISION_BOUND = 10 ** 6
# Strong-pseudoprime witnesses; deterministic for every n < 3.3 * 10^24.
MILLER_RABIN_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class ArtinError(ValueError):
    """Base class for domain errors raised by the library"""


def primes_up_to(n: int) -> np.ndarray:
    """Eratosthenes sieve, returns the primes <= n as an int64 array"""
    if n < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(n + 1, dtype=bool)
    is_prime[:2] = False
    is_prime[4::2] = False
    for p in range(3, math.isqrt(n) + 1, 2):
        if is_prime[p]:
            is_prime[p * p::2 * p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


@lru_cache(maxsize=1)
def _small_primes() -> List[int]:
    return primes_up_to(TRIAL_DIVISION_BOUND).tolist()


def _strong_probable_prime(n: int, base: int) -> bool:
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    x = pow(base, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_prime(m: int) -> bool:
    """Deterministic Miller-Rabin primality test for 64-bit inputs"""
    if m < 2:
        return False
    for p in MILLER_RABIN_BASES:
        if m % p == 0:
            return m == p
    return all(_strong_probable_prime(m, base) for base in MILLER_RABIN_BASES)


def _pollard_brent(n: int) -> int:
    """Return a nontrivial factor of the odd composite n.

    Brent's cycle detection with batched gcds. The generator is seeded
    from n so repeated runs walk the same sequence.
    """
    rng = random.Random(n)
    g = n
    while g == n:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), rng.randrange(1, n)
        g, r, q = 1, 1, 1
        x = ys = y
        while g == 1:
            x, k = y, 0
            for _ in range(r):
                y = (y * y + c) % n
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g, k = math.gcd(q, n), k + m
            r *= 2
        if g == n:
            while True:
                ys = (ys * ys + c) % n
                g = math.gcd(x - ys, n)
                if g > 1:
                    break
    return g


def _split_large(n: int, found: dict):
    if n == 1:
        return
    if is_prime(n):
        found[n] = found.get(n, 0) + 1
        return
    d = _pollard_brent(n)
    _split_large(d, found)
    _split_large(n // d, found)


@lru_cache(maxsize=65536)
def factorize(m: int) -> Factorization:
    """Exact prime factorization of a positive integer, sorted by prime"""
    if m < 1:
        raise ArtinError(f"factorize expects a positive integer, got {m}")
    found = {}
    rest = m
    for p in _small_primes():
        if p * p > rest:
            break
        if rest % p == 0:
            e = 0
            while rest % p == 0:
                rest //= p
                e += 1
            found[p] = e
    if rest > 1:
        if rest <= TRIAL_DIVISION_BOUND ** 2:
            found[rest] = found.get(rest, 0) + 1
        else:
            _split_large(rest, found)
    return tuple(sorted(found.items()))


def prime_divisors(m: int) -> Tuple[int, ...]:
    """Distinct primes dividing |m|"""
    return tuple(p for p, _ in factorize(abs(m)))


def is_squarefree(m: int) -> bool:
    return m != 0 and all(e == 1 for _, e in factorize(abs(m)))


def moebius(m: int) -> int:
    """Möbius function: 0 unless m is squarefree"""
    fac = factorize(m)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def euler_phi(m: int) -> int:
    result = 1
    for p, e in factorize(m):
        result *= (p - 1) * p ** (e - 1)
    return result


def valuation(m: int, p: int) -> int:
    """Exponent of the prime p in the nonzero integer m"""
    if m == 0:
        raise ArtinError("valuation of 0 is undefined")
    m = abs(m)
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def odd_part(m: int) -> int:
    m = abs(m)
    return m >> valuation(m, 2) if m else 0


def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd positive n"""
    if n <= 0 or n % 2 == 0:
        raise ArtinError(f"jacobi expects an odd positive modulus, got {n}")
    a %= n
    t = 1
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                t = -t
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            t = -t
        a %= n
    return t if n == 1 else 0


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n), the full extension to all integers n.

    (a/0) is 1 iff a = ±1; (a/-1) is -1 iff a < 0; (a/2) is 0 for even a,
    1 for a ≡ ±1 mod 8 and -1 for a ≡ ±3 mod 8.
    """
    if n == 0:
        return 1 if abs(a) == 1 else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -1
    v = valuation(n, 2)
    if v:
        if a % 2 == 0:
            return 0
        if v % 2 and a % 8 in (3, 5):
            result = -result
        n >>= v
    if n == 1:
        return result
    return result * jacobi(a, n)


def squarefree_kernel(a: int) -> int:
    """Signed product of the primes dividing a to an odd power"""
    if a == 0:
        raise ArtinError("squarefree_kernel is undefined at 0")
    kernel = 1
    for p, e in factorize(abs(a)):
        if e % 2:
            kernel *= p
    return kernel if a > 0 else -kernel


def lcm(*values: int) -> int:
    result = 1
    for v in values:
        result = result * abs(v) // math.gcd(result, v)
    return result
