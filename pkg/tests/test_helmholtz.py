import numpy as np
import pytest
import scipy.sparse as sp

from tofwi.errors import AssemblyError
from tofwi.grid import Grid, Model, Partition, build_partition
from tofwi.helmholtz import PaddedDomain, apply_operator, assemble, split_columns
from tofwi.linsolve import factorize

from _dense_oracles import dense_plain_stencil


def _const_model(nx, nz, dx, dz, v=2000.0):
    g = Grid(nx, nz, dx, dz)
    return Model.from_velocity(g, np.full(g.n, v))


def test_padded_domain_mapping():
    g = Grid(4, 3, 10.0, 10.0)
    pad = PaddedDomain(g, 2)
    assert pad.nx_pad == 8 and pad.nz_pad == 7
    imap = pad.interior_map
    assert len(set(imap.tolist())) == g.n  # injective
    x = np.arange(pad.n_pad, dtype=float)
    assert np.array_equal(pad.restrict_interior(x), x[imap])
    # zero padding degenerates to the identity layout
    pad0 = PaddedDomain(g, 0)
    assert np.array_equal(pad0.interior_map, np.arange(g.n))


def test_model_edge_replication():
    g = Grid(3, 3, 10.0, 10.0)
    pad = PaddedDomain(g, 1)
    vals = np.arange(1.0, 10.0)
    emb = pad.embed_model(vals).reshape(5, 5)
    assert emb[0, 0] == 1.0 and emb[0, 4] == 3.0 and emb[4, 4] == 9.0
    assert emb[2, 0] == 4.0  # left edge replicates row start


def test_stencil_by_hand_3x3():
    m = _const_model(3, 3, 10.0, 20.0)
    omega = 2 * np.pi * 5
    system = assemble(m, omega, 0)
    a = system.matrix.toarray()
    diag = -2 / 10.0**2 - 2 / 20.0**2 + omega**2 / 2000.0**2
    assert np.allclose(np.diag(a), diag, rtol=0, atol=1e-14)
    assert a[4, 3] == pytest.approx(1 / 10.0**2)
    assert a[4, 1] == pytest.approx(1 / 20.0**2)
    assert a[4, 0] == 0.0


def test_matrix_matches_dense_stencil_oracle():
    g = Grid(10, 10, 30.0, 30.0)
    rng = np.random.default_rng(7)
    m = Model.from_velocity(g, rng.uniform(1800.0, 2600.0, g.n))
    omega = 2 * np.pi * 6
    system = assemble(m, omega, 0)
    dense = dense_plain_stencil(10, 10, 30.0, 30.0, omega, m.values)
    u = np.zeros(g.n, dtype=complex)
    u[g.node_index(5, 5)] = 1.0
    assert np.max(np.abs(system.matrix @ u - dense @ u)) < 1e-16
    assert np.max(np.abs(system.matrix.toarray() - dense)) < 1e-18


def test_plane_wave_symbol():
    dx, dz = 15.0, 25.0
    m = _const_model(24, 20, dx, dz, 2500.0)
    omega = 2 * np.pi * 8
    system = assemble(m, omega, 0)
    kx, kz = 0.7 / dx, 0.4 / dz
    g = m.grid
    xs = g.x_coords[None, :]
    zs = g.z_coords[:, None]
    wave = np.exp(1j * (kx * xs + kz * zs)).ravel()
    applied = system.matrix @ wave
    symbol = ((2 * np.cos(kx * dx) - 2) / dx**2
              + (2 * np.cos(kz * dz) - 2) / dz**2
              + omega**2 / 2500.0**2)
    interior = np.zeros((g.nz, g.nx), dtype=bool)
    interior[1:-1, 1:-1] = True
    idx = np.nonzero(interior.ravel())[0]
    rel = np.abs(applied[idx] - symbol * wave[idx]) / np.abs(symbol)
    assert rel.max() < 1e-12


def test_row_pattern_five_point():
    m = _const_model(8, 8, 20.0, 20.0)
    system = assemble(m, 2 * np.pi * 5, 4)
    per_row = np.diff(system.matrix.tocsr().indptr)
    assert per_row.max() <= 5


def test_symmetric_not_hermitian():
    g = Grid(12, 10, 25.0, 25.0)
    rng = np.random.default_rng(3)
    m = Model.from_velocity(g, rng.uniform(1900.0, 2400.0, g.n))
    system = assemble(m, 2 * np.pi * 7, 6)
    asym = abs(system.matrix - system.matrix.T).max()
    assert asym <= 1e-14
    assert abs(system.matrix - system.matrix.conj().T).max() > 1.0e-9


def test_assemble_deterministic():
    m = _const_model(9, 9, 25.0, 25.0)
    a = assemble(m, 2 * np.pi * 5, 5)
    b = assemble(m, 2 * np.pi * 5, 5)
    assert np.array_equal(a.matrix.toarray(), b.matrix.toarray())


def test_assemble_rejects_bad_inputs():
    m = _const_model(5, 5, 10.0, 10.0)
    with pytest.raises(ValueError):
        assemble(m, -1.0, 0)


def test_split_reassembly_exact(rng):
    g = Grid(8, 8, 40.0, 40.0)
    m = Model.from_velocity(g, rng.uniform(1800.0, 2800.0, g.n))
    system = assemble(m, 2 * np.pi * 4, 3)
    partition = build_partition(g, [(80.0, 200.0, 80.0, 200.0)])
    blocks = split_columns(system, partition)
    # entrywise reassembly of the column permutation is exact
    rebuilt = np.empty((system.n, system.n), dtype=complex)
    rebuilt[:, blocks.idx_background] = blocks.a1.toarray()
    rebuilt[:, blocks.idx_target] = blocks.a2.toarray()
    assert np.array_equal(rebuilt, system.matrix.toarray())
    # applying the blocks reproduces the full product to rounding
    x = rng.standard_normal(system.n) + 1j * rng.standard_normal(system.n)
    x1 = blocks.restrict_background(x)[:, None]
    x2 = blocks.restrict_target(x)[:, None]
    residual = blocks.apply(x1, x2)[:, 0] - system.matrix @ x
    scale = np.abs(system.matrix).max() * np.abs(x).max()
    assert np.max(np.abs(residual)) <= 1e-13 * scale


def test_single_node_target_column():
    g = Grid(6, 6, 10.0, 10.0)
    m = Model.from_velocity(g, np.full(g.n, 2000.0))
    system = assemble(m, 2 * np.pi * 5, 2)
    partition = Partition(g, np.array([14]))
    blocks = split_columns(system, partition)
    assert blocks.a2.shape[1] == 1
    col = system.matrix[:, system.padded.interior_map[14]].toarray()
    assert np.array_equal(blocks.a2.toarray(), col)


def test_mass_term_locality():
    g = Grid(8, 6, 20.0, 20.0)
    m = Model.from_velocity(g, np.full(g.n, 2200.0))
    omega = 2 * np.pi * 6
    system = assemble(m, omega, 3)
    partition = build_partition(g, [(40.0, 100.0, 40.0, 80.0)])
    blocks = split_columns(system, partition)
    delta = 3.7e-6
    rebuilt = blocks.with_target_model(blocks.target_model + delta)
    diff = (rebuilt.a2 - blocks.a2).tocoo()
    assert diff.nnz == blocks.n_target
    assert np.allclose(np.abs(diff.data), omega**2 * delta, rtol=1e-12)
    assert np.array_equal(diff.row, blocks.idx_target[diff.col])
    # the split identity: a2(m2) == lap2 + omega^2 E2 Diag(m2)
    manual = (blocks.lap2 + blocks.e2 @ sp.diags(omega**2 * blocks.target_model)).toarray()
    assert np.max(np.abs(manual - blocks.a2.toarray())) < 1e-18


def test_e2_columns_are_unit():
    g = Grid(7, 7, 10.0, 10.0)
    m = Model.from_velocity(g, np.full(g.n, 2000.0))
    system = assemble(m, 2 * np.pi * 5, 2)
    partition = build_partition(g, [(20.0, 50.0, 20.0, 50.0)])
    blocks = split_columns(system, partition)
    gram = (blocks.e2.conj().T @ blocks.e2).toarray()
    assert np.array_equal(gram, np.eye(blocks.n_target))


def test_apply_operator_dense_oracle(rng):
    g = Grid(6, 6, 30.0, 30.0)
    m = Model.from_velocity(g, rng.uniform(1900.0, 2500.0, g.n))
    system = assemble(m, 2 * np.pi * 5, 0)
    dense = system.matrix.toarray()
    fields = rng.standard_normal((g.n, 3)) + 1j * rng.standard_normal((g.n, 3))
    assert np.max(np.abs(apply_operator(system, fields) - dense @ fields)) <= 1e-13
    partition = build_partition(g, [(60.0, 120.0, 60.0, 120.0)])
    blocks = split_columns(system, partition)
    u1 = blocks.restrict_background(fields)
    u2 = blocks.restrict_target(fields)
    assert np.max(np.abs(apply_operator(blocks, u1, u2) - dense @ fields)) <= 1e-13


def test_apply_operator_exact_solution_residual(tiny):
    system = assemble(tiny.model_true, 2 * np.pi * tiny.freq, tiny.pml)
    b = tiny.acq.source_term(system.padded, tiny.freq)
    fields = factorize(system.matrix).solve(b)
    blocks = split_columns(system, tiny.partition)
    u1 = blocks.restrict_background(fields)
    u2 = blocks.restrict_target(fields)
    residual = b - apply_operator(blocks, u1, u2)
    assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(b)
    # zero fields leave the full source term
    assert np.array_equal(b - apply_operator(blocks, 0 * u1, 0 * u2), b)


def test_absorption_at_outer_boundary():
    g = Grid(81, 81, 25.0, 25.0)
    m = Model.from_velocity(g, np.full(g.n, 2000.0))
    system = assemble(m, 2 * np.pi * 8, 20)
    b = np.zeros((system.n, 1), dtype=complex)
    b[system.padded.interior_map[g.node_index(40, 40)], 0] = 1.0
    u = np.abs(factorize(system.matrix).solve(b)[:, 0])
    raster = u.reshape(system.padded.nz_pad, system.padded.nx_pad)
    edge = max(raster[0, :].max(), raster[-1, :].max(),
               raster[:, 0].max(), raster[:, -1].max())
    assert edge <= 1e-3 * raster.max()


def test_with_model_rebuilds_only_mass(rng):
    g = Grid(9, 8, 30.0, 30.0)
    m = Model.from_velocity(g, rng.uniform(1900.0, 2500.0, g.n))
    system = assemble(m, 2 * np.pi * 5, 4)
    m_new = m.with_values(m.values * rng.uniform(0.9, 1.1, g.n))
    rebuilt = system.with_model(m_new)
    assert rebuilt.laplacian is system.laplacian
    diff = (rebuilt.matrix - system.matrix).tocoo()
    assert np.all(diff.row == diff.col)  # mass is diagonal
    fields = rng.standard_normal((system.n, 2)) + 1j * rng.standard_normal((system.n, 2))
    direct = rebuilt.matrix @ fields
    shortcut = system.apply_with_model(m_new.values, fields)
    assert np.max(np.abs(direct - shortcut)) < 1e-13 * np.max(np.abs(direct))
