import math

import numpy as np
import pytest

from tofwi.acquisition import (
    Acquisition,
    RickerSpectrum,
    build_observation,
    ricker_spectrum,
    synthesize_data,
)
from tofwi.errors import GeometryError
from tofwi.grid import Grid, Model, build_partition
from tofwi.helmholtz import PaddedDomain
from tofwi.linsolve import SolveLedger


def test_ricker_closed_form_values():
    # vanishes toward DC
    assert ricker_spectrum(1e-9, 10.0) < 1e-20
    # peak value at f0
    assert ricker_spectrum(10.0, 10.0) == pytest.approx(
        2.0 / (math.sqrt(math.pi) * 10.0) * math.exp(-1.0), rel=1e-15)


def test_ricker_peak_is_global_max():
    f0 = 10.0
    grid = np.linspace(0.01, 80.0, 16000)
    values = np.array([ricker_spectrum(f, f0) for f in grid])
    peak = ricker_spectrum(f0, f0)
    assert np.all(values <= peak + 1e-18)
    assert ricker_spectrum(f0 + 1e-3, f0) < peak
    assert ricker_spectrum(f0 - 1e-3, f0) < peak
    with pytest.raises(ValueError):
        ricker_spectrum(-1.0, 10.0)


def _setup(pml=4):
    g = Grid(11, 9, 10.0, 10.0)
    pad = PaddedDomain(g, pml)
    return g, pad


def test_observation_on_node():
    g, pad = _setup()
    acq = Acquisition([[50.0, 40.0]], [[30.0, 20.0]])
    obs = build_observation(acq, pad)
    col = obs.matrix.tocoo().col[0]
    assert col == pad.interior_map[g.node_index(3, 2)]


def test_observation_tie_breaks_to_lowest_index():
    g, pad = _setup()
    # exact cell center: equidistant from four nodes
    acq = Acquisition([[50.0, 40.0]], [[35.0, 25.0]])
    obs = build_observation(acq, pad)
    col = obs.matrix.tocoo().col[0]
    assert col == pad.interior_map[g.node_index(3, 2)]


def test_observation_outside_interior_raises():
    g, pad = _setup()
    acq = Acquisition([[50.0, 40.0]], [[0.0, 20.0]])  # on the hull edge
    with pytest.raises(GeometryError):
        build_observation(acq, pad)


def test_observation_rows_unit_and_gram_diagonal():
    g, pad = _setup()
    recs = [[12.0, 31.0], [55.0, 55.0], [77.0, 21.0]]
    acq = Acquisition([[50.0, 40.0]], recs)
    obs = build_observation(acq, pad)
    row_mass = np.asarray(obs.matrix.sum(axis=1)).ravel()
    assert np.array_equal(row_mass, np.ones(3))
    gram = (obs.matrix.conj().T @ obs.matrix).toarray()
    assert np.array_equal(gram, np.diag(np.diag(gram)))
    assert set(np.diag(gram).tolist()) <= {0.0, 1.0}


def test_observation_partition_views():
    g, pad = _setup()
    partition = build_partition(g, [(30.0, 70.0, 20.0, 60.0)])
    inside = [[40.0, 30.0], [50.0, 50.0]]
    acq_in = Acquisition([[50.0, 70.0]], inside)
    obs = build_observation(acq_in, pad, partition)
    # all receivers inside the target: p1 carries nothing, p2 everything
    assert obs.p1.nnz == 0
    assert obs.p2.nnz == 2
    assert np.array_equal(np.asarray(obs.p2.sum(axis=1)).ravel(), np.ones(2))
    # block application identity
    rng = np.random.default_rng(5)
    x = rng.standard_normal(pad.n_pad) + 1j * rng.standard_normal(pad.n_pad)
    idx_t = pad.lift_indices(partition.target_indices)
    mask = np.ones(pad.n_pad, dtype=bool)
    mask[idx_t] = False
    full = obs.matrix @ x
    split = obs.p1 @ x[mask] + obs.p2 @ x[idx_t]
    assert np.allclose(full, split, rtol=0, atol=0)


def test_source_term_scaling():
    g, pad = _setup()
    acq = Acquisition([[50.0, 40.0]], [[30.0, 20.0]], RickerSpectrum(10.0))
    b = acq.source_term(pad, 10.0)
    assert b.shape == (pad.n_pad, 1)
    expected = ricker_spectrum(10.0, 10.0) / (10.0 * 10.0)
    nz = np.nonzero(b[:, 0])[0]
    assert nz.size == 1
    assert b[nz[0], 0] == pytest.approx(expected, rel=1e-15)


def test_identical_sources_identical_columns(tiny):
    acq2 = Acquisition(
        np.vstack([tiny.acq.sources[:1], tiny.acq.sources[:1]]),
        tiny.acq.receivers, tiny.acq.spectrum)
    ds = synthesize_data(tiny.model_true, acq2, [tiny.freq], tiny.pml)
    rec = ds.records[tiny.freq]
    assert np.array_equal(rec[:, 0], rec[:, 1])


def test_synthesis_reproducible_bitwise(tiny):
    a = synthesize_data(tiny.model_true, tiny.acq, [tiny.freq], tiny.pml)
    b = synthesize_data(tiny.model_true, tiny.acq, [tiny.freq], tiny.pml)
    assert np.array_equal(a.records[tiny.freq], b.records[tiny.freq])


def test_synthesis_threads_match_serial(tiny):
    freqs = [3.0, 4.0, 5.0]
    serial = synthesize_data(tiny.model_true, tiny.acq, freqs, tiny.pml, threads=1)
    parallel = synthesize_data(tiny.model_true, tiny.acq, freqs, tiny.pml, threads=3)
    for f in freqs:
        assert np.array_equal(serial.records[f], parallel.records[f])


def test_noise_changes_records_and_is_seeded(tiny):
    clean = synthesize_data(tiny.model_true, tiny.acq, [tiny.freq], tiny.pml)
    noisy1 = synthesize_data(tiny.model_true, tiny.acq, [tiny.freq], tiny.pml,
                             noise_snr_db=20.0, seed=7)
    noisy2 = synthesize_data(tiny.model_true, tiny.acq, [tiny.freq], tiny.pml,
                             noise_snr_db=20.0, seed=7)
    assert not np.array_equal(clean.records[tiny.freq], noisy1.records[tiny.freq])
    assert np.array_equal(noisy1.records[tiny.freq], noisy2.records[tiny.freq])
    snr = (np.linalg.norm(clean.records[tiny.freq])
           / np.linalg.norm(noisy1.records[tiny.freq] - clean.records[tiny.freq]))
    assert 10 ** (20.0 / 20.0) * 0.5 < snr < 10 ** (20.0 / 20.0) * 2.0


def test_synthesis_counts_forward_solves(tiny):
    ledger = SolveLedger()
    synthesize_data(tiny.model_true, tiny.acq, [3.0, 5.0], tiny.pml, ledger=ledger)
    assert ledger.solves(size_class="full", phase="forward") == 2 * tiny.acq.n_sources
    assert ledger.factorizations(phase="forward") == 2


def test_amplitude_envelope_follows_green_decay():
    # homogeneous model, ring acquisition: |D| ~ r^{-1/2} envelope
    g = Grid(85, 85, 30.0, 30.0)
    m = Model.from_velocity(g, np.full(g.n, 2000.0))
    center = (1260.0, 1260.0)
    angles = np.linspace(0, 2 * np.pi, 120, endpoint=False)
    ring = np.column_stack([center[0] + 1100.0 * np.cos(angles),
                            center[1] + 1100.0 * np.sin(angles)])
    source = [[center[0] - 1100.0, center[1]]]
    acq = Acquisition(source, ring, RickerSpectrum(10.0))
    ds = synthesize_data(m, acq, [5.0], 20)
    d = np.abs(ds.records[5.0][:, 0])
    r = np.hypot(ring[:, 0] - source[0][0], ring[:, 1] - source[0][1])
    keep = r > 2.0 * 400.0  # past the near field
    slope, _ = np.polyfit(np.log(r[keep]), np.log(d[keep]), 1)
    assert abs(slope - (-0.5)) <= 0.15


def test_reciprocity_colocated_pair():
    g = Grid(41, 41, 30.0, 30.0)
    m = Model.from_velocity(g, np.full(g.n, 2000.0))
    p1 = [330.0, 600.0]
    p2 = [870.0, 510.0]
    ds_fwd = synthesize_data(m, Acquisition([p1], [p2]), [6.0], 12)
    ds_rev = synthesize_data(m, Acquisition([p2], [p1]), [6.0], 12)
    a = ds_fwd.records[6.0][0, 0]
    b = ds_rev.records[6.0][0, 0]
    assert abs(a - b) <= 1e-8 * abs(a)


def test_dataset_validation():
    from tofwi.acquisition import DataSet

    with pytest.raises(ValueError):
        DataSet(frequencies=(5.0, 5.0), records={5.0: np.zeros((1, 1))},
                source_positions=[[0.0, 0.0]], receiver_positions=[[1.0, 1.0]])
    with pytest.raises(ValueError):
        DataSet(frequencies=(5.0,), records={5.0: np.zeros((2, 1))},
                source_positions=[[0.0, 0.0]], receiver_positions=[[1.0, 1.0]])
