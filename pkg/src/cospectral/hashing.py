"""Counter-based 64-bit mixing shared by the walk engine and the environments.

Every random quantity in the package is a pure function of a seed and a
counter, so results do not depend on evaluation order or worker count.
Each function has a scalar form (Python ints) and an array form (numpy
uint64); the two agree bit for bit.
"""

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
# polynomial base for word hashes (odd, so invertible mod 2**64)
BASE = 0x100000001B3

TAG_SAMPLE = 0x5A17
TAG_STEP = 0x57E9
TAG_LETTER = 0x1E77
TAG_LEN = 0x1E46
TAG_ABEL = 0xAB31
TAG_PROD = 0x9D0D
TAG_EDGE = 0xED6E
TAG_SHIFT = 0x5B1F
TAG_PERC = 0x9E4C
TAG_RESTRICT = 0x4E57

_INV53 = 1.0 / (1 << 53)


def mix64(x):
    """SplitMix64 finalizer on a Python int."""
    z = (x + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def mix64_array(x):
    z = np.asarray(x, dtype=np.uint64) + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def to_uniform(z):
    """Map a 64-bit word to a double in [0, 1)."""
    return (z >> 11) * _INV53


def to_uniform_array(z):
    return (np.asarray(z, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * _INV53


def seed_key(seed, tag=TAG_SAMPLE):
    return mix64((mix64(int(seed) & MASK) ^ tag) & MASK)


def sample_key(seed, i):
    """Key of the i-th independent sample stream."""
    return mix64(seed_key(seed) ^ (int(i) & MASK))


def sample_keys(seed, idx):
    idx = np.asarray(idx, dtype=np.uint64)
    return mix64_array(np.uint64(seed_key(seed)) ^ idx)


def step_uniform(skey, t):
    return to_uniform(mix64(skey ^ mix64(TAG_STEP + t)))


def step_uniform_array(skeys, t):
    return to_uniform_array(mix64_array(skeys ^ np.uint64(mix64(TAG_STEP + t))))


def derive(key, tag):
    """Child key for a named sub-stream (environment seeds and the like)."""
    return mix64((key ^ mix64(tag)) & MASK)


def derive_array(keys, tag):
    return mix64_array(np.asarray(keys, dtype=np.uint64) ^ np.uint64(mix64(tag)))


def letter_code(letter):
    return mix64((TAG_LETTER << 32) ^ (int(letter) & MASK))


def letter_code_array(letters):
    letters = np.asarray(letters, dtype=np.int64).astype(np.uint64)
    return mix64_array(np.uint64(TAG_LETTER << 32) ^ letters)


def free_key_hash(letters):
    """Hash of a reduced free word: Horner polynomial, then a length-salted mix."""
    h = 0
    for l in letters:
        h = (h * BASE + letter_code(l)) & MASK
    return mix64(h ^ mix64(TAG_LEN + len(letters)))


def free_poly_finish_array(poly, length):
    lens = np.asarray(length, dtype=np.uint64)
    return mix64_array(poly ^ mix64_array(np.uint64(TAG_LEN) + lens))


def abelian_key_hash(exponents):
    h = mix64(TAG_ABEL)
    for e in exponents:
        h = mix64(h ^ (int(e) & MASK))
    return h


def abelian_key_hash_array(exps):
    """Row-wise hash of an (n, d) int64 exponent array."""
    exps = np.asarray(exps, dtype=np.int64)
    h = np.full(exps.shape[0], mix64(TAG_ABEL), dtype=np.uint64)
    for c in range(exps.shape[1]):
        h = mix64_array(h ^ exps[:, c].astype(np.uint64))
    return h


def combine_hashes(parts):
    h = mix64(TAG_PROD)
    for p in parts:
        h = mix64(h ^ p)
    return h


def combine_hashes_array(parts, n):
    h = np.full(n, mix64(TAG_PROD), dtype=np.uint64)
    for p in parts:
        h = mix64_array(h ^ p)
    return h


def edge_uniform(env_key, vertex_hash, generator):
    """Uniform variable of the undirected Cayley edge (v, v*generator)."""
    return to_uniform(mix64(env_key ^ mix64(vertex_hash ^ mix64((TAG_EDGE << 16) + generator))))


def coordinate_uniform(env_key, vertex_hash):
    return to_uniform(mix64(env_key ^ mix64(vertex_hash ^ TAG_SHIFT)))


def coordinate_uniform_array(env_keys, vertex_hashes):
    inner = mix64_array(np.asarray(vertex_hashes, dtype=np.uint64) ^ np.uint64(TAG_SHIFT))
    return to_uniform_array(mix64_array(np.asarray(env_keys, dtype=np.uint64) ^ inner))
