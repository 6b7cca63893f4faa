import math
import struct
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from arith_core import ArtinError, prime_divisors, primes_up_to
from artin_density import ArtinSpec
from config import load_settings
from parallel import chunked, ordered_map
from singular_series import (
    SingularSeriesEstimate,
    TripleSpec,
    classical_constant,
    euler_constant,
)

logger = logging.getLogger(__name__)

SEGMENT_SIZE = 1 << 20
COUNT_CHUNK = 1024
CACHE_MAGIC = b"AGSV1"


class LimitTooLarge(ArtinError):
    """Requested sieve limit exceeds the configured memory cap"""


class SieveTooSmall(ArtinError):
    """n lies beyond the sieve limit"""


def _pack(mask: np.ndarray) -> np.ndarray:
    return np.packbits(mask.astype(bool), bitorder='little')


def _unpack(bits: np.ndarray, limit: int) -> np.ndarray:
    return np.unpackbits(bits, count=limit + 1, bitorder='little').astype(bool)


@dataclass(frozen=True, eq=False)
class SieveData:
    """Packed primality and primitive-root bit sets over [0, limit]"""
    limit: int
    prime_bits: np.ndarray
    primroot_bits: Dict[int, np.ndarray] = field(default_factory=dict)

    def prime_mask(self) -> np.ndarray:
        return _unpack(self.prime_bits, self.limit)

    def primroot_mask(self, a: int) -> np.ndarray:
        if a not in self.primroot_bits:
            raise ArtinError(f"primitive roots for base {a} are not marked")
        return _unpack(self.primroot_bits[a], self.limit)

    def primes(self) -> np.ndarray:
        return np.flatnonzero(self.prime_mask())


@dataclass
class RepresentationReport:
    n: int
    weighted_sum: float
    raw_count: int
    predicted: Optional[SingularSeriesEstimate] = None
    ratio: Optional[float] = None
    classical_sum: Optional[float] = None
    classical_ratio: Optional[float] = None


def sieve(N: int, max_limit: Optional[int] = None) -> SieveData:
    """Segmented sieve of Eratosthenes over [0, N]"""
    if N < 10:
        raise ArtinError(f"sieve limit must be at least 10, got {N}")
    if max_limit is None:
        max_limit = load_settings().sieve_max_limit
    if N > max_limit:
        raise LimitTooLarge(f"sieve limit {N} exceeds cap {max_limit}")

    logger.info(f"Sieving primes up to {N}")
    base = primes_up_to(math.isqrt(N)).tolist()
    bits = np.zeros((N + 1 + 7) // 8, dtype=np.uint8)
    count = 0
    for lo in range(0, N + 1, SEGMENT_SIZE):
        hi = min(lo + SEGMENT_SIZE, N + 1)
        segment = np.ones(hi - lo, dtype=bool)
        if lo == 0:
            segment[:2] = False
        for p in base:
            start = max(p * p, (lo + p - 1) // p * p)
            if start >= hi:
                continue
            segment[start - lo::p] = False
        count += int(segment.sum())
        packed = _pack(segment)
        bits[lo // 8:lo // 8 + packed.size] = packed
    result = SieveData(limit=N, prime_bits=bits)
    logger.info(f"Sieve done: {count} primes up to {N}")
    return result


def has_primitive_root(spec: ArtinSpec, p: int) -> bool:
    """Whether a generates (Z/pZ)*"""
    a = spec.a
    if a % p == 0:
        return False
    if p == 2:
        return a % 2 == 1
    residue = a % p
    return all(pow(residue, (p - 1) // q, p) != 1 for q in prime_divisors(p - 1))


def smallest_prime_factors(N: int) -> np.ndarray:
    spf = np.arange(N + 1, dtype=np.uint32)
    # descending, so smaller primes overwrite larger ones
    for p in reversed(primes_up_to(math.isqrt(N)).tolist()):
        spf[p * p::p] = p
    return spf


def _distinct_factors(m: int, spf: np.ndarray) -> List[int]:
    factors = []
    while m > 1:
        p = int(spf[m])
        factors.append(p)
        while m % p == 0:
            m //= p
    return factors


def mark_primitive_roots(data: SieveData, spec: ArtinSpec) -> SieveData:
    """Return a copy of data with the primitive-root bits for spec.a filled"""
    if spec.a in data.primroot_bits:
        return data
    logger.info(f"Marking primes up to {data.limit} with primitive root {spec.a}")
    spf = smallest_prime_factors(data.limit)
    mask = np.zeros(data.limit + 1, dtype=bool)
    a = spec.a
    for p in data.primes().tolist():
        if a % p == 0:
            continue
        if p == 2:
            mask[p] = a % 2 == 1
            continue
        residue = a % p
        mask[p] = all(pow(residue, (p - 1) // q, p) != 1 for q in _distinct_factors(p - 1, spf))
    logger.info(f"Marked {int(mask.sum())} primes for base {a}")
    bits = dict(data.primroot_bits)
    bits[a] = _pack(mask)
    return replace(data, primroot_bits=bits)


def mark_triple(data: SieveData, triple: TripleSpec) -> SieveData:
    for spec in triple.specs:
        data = mark_primitive_roots(data, spec)
    return data


def _count_chunk(job) -> Tuple[List[float], int]:
    """Weighted and raw counts for one block of first primes"""
    first, second, third_mask, n = job
    log_second = np.log(second.astype(np.float64))
    partials = []
    count = 0
    for p1 in first.tolist():
        limit = np.searchsorted(second, n - p1 - 2, side='right')
        if limit == 0:
            continue
        p2 = second[:limit]
        p3 = n - p1 - p2
        hits = third_mask[p3]
        hit_count = int(hits.sum())
        if hit_count == 0:
            continue
        count += hit_count
        inner = np.sum(log_second[:limit][hits] * np.log(p3[hits].astype(np.float64)))
        partials.append(math.log(p1) * float(inner))
    return partials, count


def _count(masks: Tuple[np.ndarray, np.ndarray, np.ndarray], n: int,
           workers: int) -> Tuple[float, int]:
    m1, m2, m3 = (m[:n + 1] for m in masks)
    first = np.flatnonzero(m1[:max(n - 3, 0) + 1])
    second = np.flatnonzero(m2)
    jobs = [(chunk, second, m3, n) for chunk in chunked(first, COUNT_CHUNK)]
    results = ordered_map(_count_chunk, jobs, workers)
    partials = [x for chunk_partials, _ in results for x in chunk_partials]
    raw = sum(c for _, c in results)
    return math.fsum(partials), raw


def _excluded_primes(triple: TripleSpec) -> Tuple[int, ...]:
    return prime_divisors(6 * triple.discriminant_product)


def _check_range(n: int, data: SieveData):
    if n < 1:
        raise ArtinError(f"n must be a positive integer, got {n}")
    if n > data.limit:
        raise SieveTooSmall(f"n={n} exceeds sieve limit {data.limit}")


def count_representations(triple: TripleSpec, n: int, data: SieveData,
                          exclude_small: bool = False, workers: int = 1) -> RepresentationReport:
    """Σ log p1 log p2 log p3 over ordered p1+p2+p3 = n with prescribed primitive roots"""
    _check_range(n, data)
    data = mark_triple(data, triple)
    masks = []
    for spec in triple.specs:
        mask = data.primroot_mask(spec.a)
        if exclude_small:
            excluded = [p for p in _excluded_primes(triple) if p <= data.limit]
            mask[np.array(excluded, dtype=np.int64)] = False
        masks.append(mask)
    weighted, raw = _count(tuple(masks), n, workers)
    logger.info(f"n={n} bases={triple.bases}: raw_count={raw}, V={weighted:.6g}")
    return RepresentationReport(n=n, weighted_sum=weighted, raw_count=raw)


def classical_representations(n: int, data: SieveData, workers: int = 1) -> Tuple[float, int]:
    """Same count over all primes, no primitive-root constraint"""
    _check_range(n, data)
    mask = data.prime_mask()
    return _count((mask, mask, mask), n, workers)


def compare(triple: TripleSpec, n: int, data: SieveData, pmax: int,
            exclude_small: bool = False, classical_baseline: bool = False,
            workers: int = 1) -> RepresentationReport:
    """Fill the predicted constant and the ratio V/(C n²)"""
    data = mark_triple(data, triple)
    report = count_representations(triple, n, data, exclude_small, workers)
    report.predicted = euler_constant(triple, n, pmax, workers)
    scale = report.predicted.value * n * n
    if scale == 0:
        logger.warning(f"Predicted constant vanishes at n={n}; ratio flagged infinite")
        report.ratio = math.inf
    else:
        report.ratio = report.weighted_sum / scale
    if classical_baseline:
        report.classical_sum, _ = classical_representations(n, data, workers)
        report.classical_ratio = report.classical_sum / (classical_constant(n, pmax) * n * n)
    return report


def observed_threshold(triple: TripleSpec, residues: Iterable[int], modulus: int,
                       n_values: Iterable[int], data: SieveData) -> dict:
    """Smallest sampled n from which every admissible n has a representation"""
    data = mark_triple(data, triple)
    admissible = set(r % modulus for r in residues)
    sample = sorted(n for n in n_values if n % modulus in admissible)
    failures = [n for n in sample
                if count_representations(triple, n, data, exclude_small=True).raw_count == 0]
    cutoff = max(failures) if failures else -1
    later = [n for n in sample if n > cutoff]
    threshold = later[0] if later else None
    return {'threshold': threshold, 'failures': failures, 'sampled': len(sample)}


def write_sieve_cache(data: SieveData, path: str):
    """Binary cache: magic, N, base count, bases, then raw little-endian bit sets"""
    bases = sorted(data.primroot_bits)
    with open(path, 'wb') as handle:
        handle.write(CACHE_MAGIC)
        handle.write(struct.pack('<QQ', data.limit, len(bases)))
        for a in bases:
            handle.write(struct.pack('<q', a))
        handle.write(data.prime_bits.tobytes())
        for a in bases:
            handle.write(data.primroot_bits[a].tobytes())
    logger.info(f"Wrote sieve cache {path} (N={data.limit}, bases={bases})")


def read_sieve_cache(path: str) -> SieveData:
    with open(path, 'rb') as handle:
        blob = handle.read()
    if not blob.startswith(CACHE_MAGIC):
        raise ArtinError(f"{path} is not a sieve cache")
    offset = len(CACHE_MAGIC)
    limit, count = struct.unpack_from('<QQ', blob, offset)
    offset += 16
    bases = list(struct.unpack_from(f'<{count}q', blob, offset))
    offset += 8 * count
    size = (limit + 1 + 7) // 8
    if len(blob) != offset + size * (count + 1):
        raise ArtinError(f"{path} is truncated")

    def take(index: int) -> np.ndarray:
        start = offset + index * size
        return np.frombuffer(blob, dtype=np.uint8, count=size, offset=start).copy()

    primroots = {a: take(i + 1) for i, a in enumerate(bases)}
    logger.info(f"Loaded sieve cache {path} (N={limit}, bases={bases})")
    return SieveData(limit=limit, prime_bits=take(0), primroot_bits=primroots)
