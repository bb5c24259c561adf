"""Pure numpy implementations of the hot loops.

These must stay bit-identical to ``_kernels.pyx``; ``tests/test_kernels.py``
checks both against each other whenever the extension is importable.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1
LANES = 8
CHUNK = 1 << 16

BACKEND = "python"


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def round_key(seed: int) -> int:
    z = np.array([(int(seed) + 0x9E3779B97F4A7C15) & _MASK], dtype=np.uint64)
    return int(_mix(z)[0])


def _words(key: int, rounds: np.ndarray, lane: int) -> np.ndarray:
    ctr = rounds.astype(np.uint64) * np.uint64(LANES) + np.uint64(lane + 1)
    return _mix(np.uint64(key) + ctr * GOLDEN)


def _to_unit(words: np.ndarray) -> np.ndarray:
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def uniforms(seed: int, start: int, stop: int, lanes: int) -> np.ndarray:
    """Uniform [0, 1) doubles for rounds ``start..stop-1``, one column per lane."""
    if not 0 < lanes <= LANES:
        raise ValueError(f"lanes must be in 1..{LANES}")
    key = round_key(seed)
    rounds = np.arange(start, stop, dtype=np.uint64)
    out = np.empty((stop - start, lanes), dtype=np.float64)
    for lane in range(lanes):
        out[:, lane] = _to_unit(_words(key, rounds, lane))
    return out


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, cdf.shape[-1] - 1)


def draw_table(input_cdf, outcome_cdf, seed: int, start: int, stop: int):
    """Per-round (joint input index, joint outcome index) arrays."""
    input_cdf = np.ascontiguousarray(input_cdf, dtype=np.float64)
    outcome_cdf = np.ascontiguousarray(outcome_cdf, dtype=np.float64)
    u = uniforms(seed, start, stop, 2)
    inp = _inverse_cdf(input_cdf, u[:, 0])
    k_out = outcome_cdf.shape[1]
    out = (u[:, 1:2] >= outcome_cdf[inp]).sum(axis=1)
    out = np.minimum(out, k_out - 1)
    return inp.astype(np.int64), out.astype(np.int64)


def tally_table(input_cdf, outcome_cdf, seed: int, start: int, stop: int) -> np.ndarray:
    outcome_cdf = np.asarray(outcome_cdf, dtype=np.float64)
    k_in, k_out = outcome_cdf.shape
    counts = np.zeros(k_in * k_out, dtype=np.int64)
    for lo in range(start, stop, CHUNK):
        hi = min(lo + CHUNK, stop)
        inp, out = draw_table(input_cdf, outcome_cdf, seed, lo, hi)
        counts += np.bincount(inp * k_out + out, minlength=k_in * k_out)
    return counts.reshape(k_in, k_out)


def strategy_values(coeffs, inputs, outputs, start: int, stop: int) -> np.ndarray:
    """Functional value of each deterministic strategy with index in [start, stop).

    ``coeffs`` has shape (joint inputs, joint outcomes), both row-major over
    parties. Strategy index digits run party-major, input-minor, first digit
    most significant; digit (p, x) is party p's output on input x.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    inputs = [int(v) for v in inputs]
    outputs = [int(v) for v in outputs]
    radices = [o for o, m in zip(outputs, inputs) for _ in range(m)]
    ks = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((ks.size, len(radices)), dtype=np.int64)
    rest = ks.copy()
    for pos in range(len(radices) - 1, -1, -1):
        digits[:, pos] = rest % radices[pos]
        rest //= radices[pos]
    offsets = np.cumsum([0] + inputs[:-1])
    values = np.zeros(ks.size, dtype=np.float64)
    for j, joint in enumerate(np.ndindex(*inputs)):
        out_idx = np.zeros(ks.size, dtype=np.int64)
        for p, x in enumerate(joint):
            out_idx = out_idx * outputs[p] + digits[:, offsets[p] + x]
        values += coeffs[j, out_idx]
    return values
