"""Counter-based random streams.

Every random draw in the package is taken from a Philox stream whose key is
derived from ``(seed, purpose, index...)`` through ``numpy.random.SeedSequence``.
Within a stream, the Philox counter is the draw index, so the Brownian
normal for particle ``i`` at step ``k`` is draw ``k`` of the stream keyed by
``(seed, NOISE, i)``.  Results therefore do not depend on how work is split
across processes.

Run seeds are derived from a master seed as::

    SeedSequence(entropy=master, spawn_key=(n, replicate)).generate_state(1, uint64)[0]
"""

import numpy as np

# stream purposes (part of the published derivation; do not renumber)
GRAPH = 1
MEDIA = 2
INITIAL = 3
NOISE = 4
HEURISTIC = 5
DICTIONARY = 6
MC = 7


def stream(seed, *key):
    """Return a Philox-backed Generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def run_seed(master, n, replicate):
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(n), int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0])


def brownian_increments(seed, n, steps, dt, aggregate=1):
    """Brownian increments of shape ``(n, steps)``.

    Row ``i`` is built from the first ``steps * aggregate`` standard normals of
    the stream ``(seed, NOISE, i)``.  With ``aggregate > 1`` consecutive groups of
    fine normals are summed, so a run at step ``dt`` with ``aggregate=2`` follows
    the same Brownian path as a run at ``dt / 2`` with ``aggregate=1``.
    """
    if steps < 0 or aggregate < 1:
        raise ValueError("steps must be >= 0 and aggregate >= 1")
    fine_dt = dt / aggregate
    out = np.empty((n, steps))
    for i in range(n):
        z = stream(seed, NOISE, i).standard_normal(steps * aggregate)
        out[i] = z.reshape(steps, aggregate).sum(axis=1) * np.sqrt(fine_dt)
    return out
