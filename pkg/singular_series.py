import math
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np

from arith_core import (
    ArtinError,
    euler_phi,
    is_prime,
    lcm,
    moebius,
    odd_part,
    prime_divisors,
    primes_up_to,
    valuation,
)
from artin_density import (
    ArtinSpec,
    RealWithError,
    artin_A,
    artin_spec,
    A_mod,
    delta_mod,
    L_bracket,
)
from parallel import chunked, ordered_map
from splitting_fields import field_degree, indicator_support, squarefree_upto

logger = logging.getLogger(__name__)

EULER_CHUNK = 1 << 15
KSUM_CHUNK = 8
KSUM_TAIL_CONSTANT = 1.0


class DividesDiscriminant(ArtinError):
    """Closed form requires p prime to Δ1Δ2Δ3"""


class NonFactorizationMismatch(RuntimeError):
    """A sub-check of the non-factorization example diverged"""


@dataclass(frozen=True)
class TripleSpec:
    specs: Tuple[ArtinSpec, ArtinSpec, ArtinSpec]
    D: int

    @property
    def bases(self) -> Tuple[int, int, int]:
        return tuple(s.a for s in self.specs)

    @property
    def discriminant_product(self) -> int:
        result = 1
        for s in self.specs:
            result *= s.delta
        return result


@dataclass(frozen=True)
class ThetaVector:
    """θ_i(p) for the three bases and the elementary symmetric values Ξ_0..Ξ_3"""
    theta: Tuple[Fraction, Fraction, Fraction]
    xi: Tuple[Fraction, Fraction, Fraction, Fraction]


@dataclass
class SingularSeriesEstimate:
    value: float
    rational_part: Fraction
    transcendental_part: RealWithError
    truncation: Dict[str, int] = field(default_factory=dict)
    tail_estimate: float = 0.0


def modulus_D(specs) -> int:
    """Odd part of lcm(|Δ_i|) times 2 to the least 2-adic valuation"""
    deltas = [abs(s.delta) for s in specs]
    two_power = min(valuation(d, 2) for d in deltas)
    return odd_part(lcm(*deltas)) << two_power


def triple_spec(a1: int, a2: int, a3: int) -> TripleSpec:
    specs = (artin_spec(a1), artin_spec(a2), artin_spec(a3))
    return TripleSpec(specs=specs, D=modulus_D(specs))


@lru_cache(maxsize=1024)
def _density_weights(spec: ArtinSpec, d: int) -> Tuple[Fraction, ...]:
    """δ_a(b mod d)/L_a for b = 0..d-1"""
    bracket = L_bracket(spec)
    return tuple(delta_mod(spec, b, d).ratio / bracket for b in range(d))


@lru_cache(maxsize=256)
def _pair_convolution(first: ArtinSpec, second: ArtinSpec, d: int) -> Tuple[Fraction, ...]:
    w1 = _density_weights(first, d)
    w2 = _density_weights(second, d)
    conv = [Fraction(0)] * d
    for b1, x in enumerate(w1):
        if not x:
            continue
        for b2, y in enumerate(w2):
            if y:
                conv[(b1 + b2) % d] += x * y
    return tuple(conv)


def sigma_d(triple: TripleSpec, n: int, d: int) -> Fraction:
    """Local density σ_{a,n}(d), exact"""
    if d < 1:
        raise ArtinError(f"modulus must be positive, got {d}")
    s1, s2, s3 = triple.specs
    conv = _pair_convolution(s1, s2, d)
    w3 = _density_weights(s3, d)
    total = Fraction(0)
    for s, x in enumerate(conv):
        if x:
            total += x * w3[(n - s) % d]
    return d * total


def theta_vector(triple: TripleSpec, p: int) -> ThetaVector:
    theta = tuple(Fraction(1) if s.h % p == 0 else Fraction(1, p) for s in triple.specs)
    t1, t2, t3 = theta
    xi = (Fraction(1), t1 + t2 + t3, t1 * t2 + t1 * t3 + t2 * t3, t1 * t2 * t3)
    return ThetaVector(theta=theta, xi=xi)


def _require_unramified(triple: TripleSpec, p: int):
    if not is_prime(p):
        raise ArtinError(f"{p} is not prime")
    if triple.discriminant_product % p == 0:
        raise DividesDiscriminant(f"p={p} divides Δ1Δ2Δ3={triple.discriminant_product}")


def sigma_p_closed(triple: TripleSpec, n: int, p: int) -> Fraction:
    """Closed form of σ_{a,n}(p) at primes not dividing any Δ_i"""
    _require_unramified(triple, p)
    tv = theta_vector(triple, p)
    matching = sum((tv.xi[j] for j in range(4) if (j - n) % p == 0), Fraction(0))
    denominator = Fraction(1)
    numerator = Fraction(1)
    for t in tv.theta:
        denominator *= p - 1 - t
        numerator *= 1 + t
    return 1 - p * matching / denominator + numerator / denominator


def M_closed(spec: ArtinSpec, c: int, p: int) -> Tuple[Fraction, Fraction]:
    """(u, v) with M_a(c, p) = u + v·e_p(c)"""
    if c % p == 0:
        raise ArtinError(f"p={p} divides c={c}")
    if spec.delta % p == 0:
        raise DividesDiscriminant(f"p={p} divides Δ={spec.delta}")
    theta = Fraction(1) if spec.h % p == 0 else Fraction(1, p)
    scale = p - 1 - theta
    return -1 / scale, -theta / scale


def M_direct(spec: ArtinSpec, c: int, r: int) -> complex:
    """Σ_{b mod r} e_r(bc) A_a(b mod r)/A_a by direct summation"""
    weights = np.array([float(A_mod(spec, b, r).ratio) for b in range(r)])
    phases = np.exp(2j * np.pi * (((c % r) * np.arange(r)) % r) / r)
    return complex((weights * phases).sum())


def sigma_p_exponential(triple: TripleSpec, n: int, p: int) -> complex:
    """σ_{a,n}(p) as 1 + Σ_c e_p(-nc) ∏ M(c, p)"""
    _require_unramified(triple, p)
    total = 1 + 0j
    for c in range(1, p):
        term = np.exp(-2j * np.pi * ((n * c) % p) / p)
        for s in triple.specs:
            term *= M_direct(s, c, p)
        total += term
    return complex(total)


def classical_rho(n: int, p: int) -> Fraction:
    """p·#{unit triples summing to n mod p}/(p-1)^3 by direct count"""
    if not is_prime(p):
        raise ArtinError(f"{p} is not prime")
    count = 0
    for b1 in range(1, p):
        for b2 in range(1, p):
            if (n - b1 - b2) % p != 0:
                count += 1
    return Fraction(p * count, (p - 1) ** 3)


def classical_rho_closed(n: int, p: int) -> Fraction:
    if n % p == 0:
        return 1 - Fraction(1, (p - 1) ** 2)
    return 1 + Fraction(1, (p - 1) ** 3)


def _residues(n: int, primes: np.ndarray) -> np.ndarray:
    """n mod p for each prime, reduced with Python ints so any n fits"""
    return np.fromiter((n % p for p in primes.tolist()), dtype=np.int64, count=primes.size)


def _require_positive_n(n: int):
    if n < 1:
        raise ArtinError(f"n must be a positive integer, got {n}")


def classical_constant(n: int, pmax: int) -> float:
    """½∏_{p<=pmax} ρ_p(n)"""
    primes = primes_up_to(pmax)
    pf = primes.astype(np.float64)
    divides = _residues(n, primes) == 0
    factors = np.where(divides, 1.0 - 1.0 / (pf - 1.0) ** 2, 1.0 + 1.0 / (pf - 1.0) ** 3)
    return 0.5 * float(np.prod(factors))


def _euler_chunk(job) -> float:
    """Product of closed-form σ(p) over one chunk of primes, in floating point"""
    hs, n, primes = job
    pf = primes.astype(np.float64)
    thetas = [np.where(h % primes == 0, 1.0, 1.0 / pf) for h in hs]
    t1, t2, t3 = thetas
    xi = [np.ones_like(pf), t1 + t2 + t3, t1 * t2 + t1 * t3 + t2 * t3, t1 * t2 * t3]
    residue = _residues(n, primes)
    # p >= 5, so at most one j in 0..3 matches n mod p
    matching = np.zeros_like(pf)
    for j in range(4):
        matching = np.where(residue == j, xi[j], matching)
    denominator = (pf - 1.0 - t1) * (pf - 1.0 - t2) * (pf - 1.0 - t3)
    numerator = (1.0 + t1) * (1.0 + t2) * (1.0 + t3)
    sigma = 1.0 - pf * matching / denominator + numerator / denominator
    return float(np.prod(sigma))


def euler_tail_bound(pmax: int) -> float:
    """Integral comparison bound for Σ_{p>pmax} 11p/(p-2)^3"""
    u = pmax - 2
    return 11.0 * (1.0 / u + 1.0 / u ** 2)


def _local_primes(triple: TripleSpec) -> List[int]:
    """Primes treated exactly: 2, 3 and divisors of Δ1Δ2Δ3, minus those dividing D"""
    candidates = {2, 3} | set(prime_divisors(triple.discriminant_product))
    return sorted(p for p in candidates if triple.D % p != 0)


def _local_sigma(triple: TripleSpec, n: int, p: int) -> Fraction:
    if triple.discriminant_product % p:
        return sigma_p_closed(triple, n, p)
    return sigma_d(triple, n, p)


def euler_constant(triple: TripleSpec, n: int, pmax: int, workers: int = 1) -> SingularSeriesEstimate:
    """C_a(n) via the Euler product ½∏L_i·σ(D)·∏_{p∤D}σ(p)"""
    _require_positive_n(n)
    if pmax < 100:
        raise ArtinError(f"pmax must be at least 100, got {pmax}")
    rational = Fraction(1)
    for s in triple.specs:
        rational *= L_bracket(s)
    rational *= sigma_d(triple, n, triple.D)
    for p in _local_primes(triple):
        rational *= _local_sigma(triple, n, p)

    a_product = 1.0
    a_error = 0.0
    for s in triple.specs:
        a = artin_A(s, pmax)
        a_error = a_error * a.value + a_product * a.error_bound
        a_product *= a.value

    primes = primes_up_to(pmax)
    ramified = np.array(prime_divisors(triple.discriminant_product), dtype=np.int64)
    primes = primes[(primes >= 5) & ~np.isin(primes, ramified)]
    hs = tuple(s.h for s in triple.specs)
    jobs = [(hs, n, chunk) for chunk in chunked(primes, EULER_CHUNK)]
    partials = ordered_map(_euler_chunk, jobs, workers)
    euler = math.prod(partials)

    tail = euler_tail_bound(pmax)
    transcendental = RealWithError(
        value=a_product * euler,
        error_bound=a_product * euler * tail + a_error * euler,
    )
    value = 0.5 * float(rational) * transcendental.value
    logger.info(f"Euler constant for {triple.bases}, n={n}, pmax={pmax}: {value:.12g}")
    return SingularSeriesEstimate(
        value=value,
        rational_part=rational,
        transcendental_part=transcendental,
        truncation={'pmax': pmax},
        tail_estimate=tail,
    )


@lru_cache(maxsize=512)
def _k_transform(spec: ArtinSpec, q: int, kmax: int) -> np.ndarray:
    """T(z) = Σ_k μ(k) S_{a,q,k}(z)/[F_{a,q,k}:Q] at every unit z mod q"""
    units = np.array([z for z in range(q) if math.gcd(z, q) == 1], dtype=np.int64)
    total = np.zeros(units.size, dtype=np.complex128)
    for k in squarefree_upto(kmax):
        support = indicator_support(spec, q, k)
        if support.size == 0:
            continue
        phases = np.exp(2j * np.pi * (np.outer(units, support) % q) / q)
        total += moebius(k) * phases.sum(axis=1) / field_degree(spec, q, k)
    return total


def _ksum_chunk(job) -> List[float]:
    specs, n, kmax, qs = job
    terms = []
    for q in qs:
        units = np.array([z for z in range(q) if math.gcd(z, q) == 1], dtype=np.int64)
        product = np.exp(-2j * np.pi * (((n % q) * units) % q) / q)
        for s in specs:
            product = product * _k_transform(s, q, kmax)
        terms.append(float(product.sum().real))
    return terms


def ksum_constant(triple: TripleSpec, n: int, kmax: int, qmax: int,
                  workers: int = 1) -> SingularSeriesEstimate:
    """C_a(n) via the truncated k-sum of restricted singular series"""
    _require_positive_n(n)
    if kmax < 1 or qmax < 1:
        raise ArtinError(f"kmax and qmax must be positive, got {kmax}, {qmax}")
    jobs = [(triple.specs, n, kmax, qs) for qs in chunked(list(range(1, qmax + 1)), KSUM_CHUNK)]
    terms = [t for chunk in ordered_map(_ksum_chunk, jobs, workers) for t in chunk]
    value = 0.5 * math.fsum(terms)
    tail = KSUM_TAIL_CONSTANT * (1.0 / kmax + 1.0 / qmax)
    logger.info(f"k-sum constant for {triple.bases}, n={n}, kmax={kmax}, qmax={qmax}: {value:.12g}")
    return SingularSeriesEstimate(
        value=value,
        rational_part=Fraction(1),
        transcendental_part=RealWithError(value=2 * value, error_bound=2 * tail),
        truncation={'kmax': kmax, 'qmax': qmax},
        tail_estimate=tail,
    )


def _solving_residues(triple: TripleSpec, n: int) -> Optional[Tuple[int, int, int]]:
    d = triple.D
    w1, w2, w3 = (_density_weights(s, d) for s in triple.specs)
    for b1 in range(d):
        if not w1[b1]:
            continue
        for b2 in range(d):
            if w2[b2] and w3[(n - b1 - b2) % d]:
                return b1, b2, (n - b1 - b2) % d
    return None


def positivity(triple: TripleSpec, n: int) -> Tuple[bool, dict]:
    """Decide C_a(n) > 0 from the finitely many local factors that can vanish"""
    residues = _solving_residues(triple, n)
    if residues is None:
        return False, {'vanishing_modulus': triple.D}
    for p in _local_primes(triple):
        if _local_sigma(triple, n, p) == 0:
            return False, {'vanishing_modulus': p}
    return True, {'modulus': triple.D, 'residues': list(residues)}


def congruence_table(a: int) -> Set[int]:
    """Residues n mod lcm(6, |Δ_a|) for which (a, a, a) is locally admissible"""
    return set(admissible_residues(a)[1])


def admissible_residues(a: int) -> Tuple[int, List[int]]:
    spec = artin_spec(a)
    triple = TripleSpec(specs=(spec, spec, spec), D=modulus_D((spec, spec, spec)))
    modulus = lcm(6, spec.delta)
    residues = [n for n in range(modulus) if positivity(triple, n)[0]]
    logger.info(f"Admissible residues for a={a} mod {modulus}: {residues}")
    return modulus, residues


def lower_bound_diagnostic(triple: TripleSpec) -> Fraction:
    """∏ φ(h_i)/(Δ_i² h_i)"""
    result = Fraction(1)
    for s in triple.specs:
        result *= Fraction(euler_phi(s.h), s.delta ** 2 * s.h)
    return result


def _positive_residues(spec: ArtinSpec, q: int) -> FrozenSet[int]:
    return frozenset(x for x in range(q) if delta_mod(spec, x, q).positive)


def _expect(label: str, observed, expected):
    if observed != expected:
        raise NonFactorizationMismatch(f"{label}: expected {expected}, got {observed}")


def nonfactorization_witness() -> dict:
    """Local densities of a = (-15)^5 that admit no prime-by-prime factorization"""
    a = -759375
    spec = artin_spec(a)
    triple = TripleSpec(specs=(spec, spec, spec), D=modulus_D((spec, spec, spec)))
    report = {'a': a, 'delta': spec.delta, 'h': spec.h}

    for q, expected in ((15, {7, 13, 14}), (3, {1, 2}), (5, {2, 3, 4})):
        observed = _positive_residues(spec, q)
        _expect(f"positivity set mod {q}", set(observed), expected)
        report[f'positive_mod_{q}'] = sorted(observed)

    sigma15 = sigma_d(triple, 7, 15)
    _expect("sigma(15) at n = 7", sigma15, Fraction(0))
    report['sigma_15_at_7'] = sigma15

    witnesses = {3: (1, 1, 2), 5: (4, 4, 4)}
    for q, xs in witnesses.items():
        _expect(f"witness sum mod {q}", sum(xs) % q, 7 % q)
        product = Fraction(1)
        for x in xs:
            product *= delta_mod(spec, x, q).ratio
        if product <= 0:
            raise NonFactorizationMismatch(f"witness {xs} mod {q} has zero density")
        report[f'witness_mod_{q}'] = {'residues': list(xs), 'density_product': product}

    logger.info("Non-factorization example verified")
    return report
