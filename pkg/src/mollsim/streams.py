"""Reproducible random streams for replicas and particles.

Streams are counter-based (Philox) and keyed by (master seed, replica,
purpose) through SeedSequence spawn keys.  Within a purpose block the draw
is laid out row-per-particle, so particle i consumes a fixed counter range
independent of the ensemble size: the marginal stream of particle i does
not depend on N, and permuting row indices permutes particle streams
exactly.

Brownian increments are drawn once at a base step and aggregated for any
coarser step that is an integer multiple, which couples runs across a step
ladder pathwise (common random numbers) and makes step-halving tests exact.
"""

import numpy as np

PURPOSE_INIT = 0
PURPOSE_NOISE = 1
PURPOSE_MIXTURE = 2
PURPOSE_SAMPLER = 3


def replica_generator(master_seed, replica, purpose):
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=(int(replica), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def init_normals(master_seed, replica, n_rows, d, stream_indices=None):
    """Standard normals for initial sampling, one row per particle stream."""
    gen = replica_generator(master_seed, replica, PURPOSE_INIT)
    rows = n_rows if stream_indices is None else int(np.max(stream_indices)) + 1
    block = gen.standard_normal((rows, d))
    if stream_indices is None:
        return block
    return block[np.asarray(stream_indices, dtype=np.int64)]


class BrownianBlock:
    """Pre-drawn Brownian increments at a base step for one replica.

    increments(h) returns the (n_steps, N, d) array of increments for any
    step h that is an integer multiple of the base step, by summing
    consecutive base increments; runs at different h share paths.
    """

    def __init__(self, master_seed, replica, n_particles, d, h_base, n_base,
                 stream_indices=None):
        self.h_base = float(h_base)
        self.n_base = int(n_base)
        gen = replica_generator(master_seed, replica, PURPOSE_NOISE)
        rows = (n_particles if stream_indices is None
                else int(np.max(stream_indices)) + 1)
        block = gen.standard_normal((rows, self.n_base, d))
        if stream_indices is not None:
            block = block[np.asarray(stream_indices, dtype=np.int64)]
        # scale to increments of variance h_base per coordinate
        self._fine = block * np.sqrt(self.h_base)

    def increments(self, h):
        k = h / self.h_base
        k_int = int(round(k))
        if not np.isclose(k, k_int, rtol=1e-9, atol=0.0) or k_int < 1:
            raise ValueError(f"step {h} is not an integer multiple of the "
                             f"base step {self.h_base}")
        if self.n_base % k_int != 0:
            raise ValueError("base step count does not divide the requested "
                             "coarse stepping")
        n_coarse = self.n_base // k_int
        n, _, d = self._fine.shape
        agg = self._fine.reshape(n, n_coarse, k_int, d).sum(axis=2)
        return np.transpose(agg, (1, 0, 2))  # (n_steps, N, d)
