import numpy as np
import pytest

from mollsim import streams


def test_init_normals_deterministic():
    a = streams.init_normals(123, 0, 16, 2)
    b = streams.init_normals(123, 0, 16, 2)
    assert np.array_equal(a, b)
    assert a.shape == (16, 2)


def test_init_normals_varies_with_seed_and_replica():
    base = streams.init_normals(123, 0, 8, 1)
    assert not np.array_equal(base, streams.init_normals(124, 0, 8, 1))
    assert not np.array_equal(base, streams.init_normals(123, 1, 8, 1))


def test_rows_are_per_particle_streams():
    # the first rows of a larger ensemble reproduce the smaller one, so a
    # particle's draws do not depend on how many other particles exist
    full = streams.init_normals(99, 2, 12, 3)
    part = streams.init_normals(99, 2, 5, 3)
    assert np.array_equal(full[:5], part)


def test_stream_indices_select_rows():
    full = streams.init_normals(7, 0, 10, 2)
    picked = streams.init_normals(7, 0, 3, 2, stream_indices=(4, 7, 9))
    assert np.array_equal(picked, full[[4, 7, 9]])


def test_purposes_are_independent():
    g0 = streams.replica_generator(5, 0, 0)
    g1 = streams.replica_generator(5, 0, 1)
    assert not np.array_equal(g0.standard_normal(8), g1.standard_normal(8))


def test_brownian_block_shapes_and_determinism():
    blk = streams.BrownianBlock(11, 0, n_particles=6, d=2,
                                h_base=0.01, n_base=8)
    dw = blk.increments(0.01)
    assert dw.shape == (8, 6, 2)
    blk2 = streams.BrownianBlock(11, 0, n_particles=6, d=2,
                                 h_base=0.01, n_base=8)
    assert np.array_equal(dw, blk2.increments(0.01))


def test_brownian_aggregation_is_exact():
    blk = streams.BrownianBlock(11, 3, n_particles=4, d=1,
                                h_base=0.005, n_base=8)
    fine = blk.increments(0.005)          # (8, 4, 1)
    coarse = blk.increments(0.01)         # (4, 4, 1)
    want = fine[0::2] + fine[1::2]
    assert np.allclose(coarse, want, atol=1e-15)
    coarser = blk.increments(0.02)        # (2, 4, 1)
    want2 = np.stack([fine[:4].sum(axis=0), fine[4:].sum(axis=0)])
    assert np.allclose(coarser, want2, atol=1e-15)


def test_brownian_block_rejects_incommensurate_h():
    blk = streams.BrownianBlock(1, 0, n_particles=2, d=1,
                                h_base=0.01, n_base=10)
    with pytest.raises(ValueError):
        blk.increments(0.015)
    with pytest.raises(ValueError):
        blk.increments(0.03)  # 3 steps of h=0.03 do not tile 10 fine steps


def test_brownian_coupling_across_ensemble_size():
    big = streams.BrownianBlock(21, 0, n_particles=8, d=2,
                                h_base=0.01, n_base=4).increments(0.01)
    small = streams.BrownianBlock(21, 0, n_particles=3, d=2,
                                  h_base=0.01, n_base=4).increments(0.01)
    assert np.array_equal(big[:, :3, :], small)


def test_brownian_variance_scale():
    # loose moment check: Var(dW) = h
    blk = streams.BrownianBlock(2, 0, n_particles=4000, d=1,
                                h_base=0.25, n_base=2)
    dw = blk.increments(0.25)
    v = float(np.var(dw))
    assert abs(v - 0.25) < 0.02
