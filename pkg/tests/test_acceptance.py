"""Acceptance battery: one test per criterion, each printing a PASS line.

Every oracle here is independent of the pipeline it audits: plaquette
field strengths against transport windings, Wannier-center flow against
the symplectic-square-root invariant, factor Chern numbers against the
splitting parity, and byte-level determinism of the batch front end.

Run with ``pytest -m acceptance -v -s`` (the full battery takes tens of
minutes; everything is seeded and deterministic).
"""

import json
import time

import numpy as np
import pytest

from bandtopo import linalg
from bandtopo.cli import RunConfig, emit_phase_diagram, run
from bandtopo.decomposition import (
    pseudo_periodic_frame,
    split,
    symmetric_equivalence,
    symmetric_frame,
    verify_homotopy,
)
from bandtopo.errors import ParityObstruction, TooFar
from bandtopo.invariants import chern, delta, fhs_chern, wilson_z2
from bandtopo.models import (
    KM_J,
    gauge_transform,
    haldane,
    kane_mele,
    random_gapped_hamiltonian,
    random_gauge_map,
    random_trs_hamiltonian,
    spectral_projector,
)
from bandtopo.transport import kato_nagy
from bandtopo.trs import Grid2, direct_sum_fields

from helpers import projector_pair_at_distance, random_symplectic_unitary, rng

pytestmark = pytest.mark.acceptance

GRID = Grid2(32, 32)
WILSON = Grid2(64, 256)
LAMBDA_SO = 0.06
LAMBDA_R = 0.05
KM_CRITICAL = 3.0 * np.sqrt(3.0) * LAMBDA_SO  # ~0.3118


def _report(criterion, text):
    print(f"ACCEPTANCE {criterion}: PASS  ({text})")


@pytest.fixture(scope="module")
def forty_trs_fields():
    fields = []
    for seed in range(1, 41):
        _, field, window = random_trs_hamiltonian(8, 4, 2, seed=seed)
        fields.append((seed, field, window))
    return fields


@pytest.fixture(scope="module")
def fifty_rank2_fields():
    fields = []
    for seed in range(1, 51):
        _, field, _ = random_gapped_hamiltonian(4, 2, 1, seed=seed)
        fields.append((seed, field))
    return fields


@pytest.fixture(scope="module")
def km_sweep_fields():
    values = [0.05 * i for i in range(13)]  # 0.0 .. 0.6
    fields = []
    for lam_v in values:
        model = kane_mele(1.0, LAMBDA_SO, LAMBDA_R, lam_v)
        field, window = spectral_projector(model, 2)
        fields.append((lam_v, field, window))
    return fields


def test_criterion_01_trs_fields_have_zero_chern(forty_trs_fields):
    worst_time = 0.0
    for seed, field, _ in forty_trs_fields:
        started = time.monotonic()
        report = chern(field, GRID)
        elapsed = time.monotonic() - started
        worst_time = max(worst_time, elapsed)
        assert report.value == 0, f"seed {seed}: chern {report.value} != 0"
        assert elapsed <= 60.0, f"seed {seed}: took {elapsed:.1f}s"
    _report(1, f"40/40 zero Chern, worst field {worst_time:.1f}s")


def test_criterion_02_chern_oracle_agreement(fifty_rank2_fields):
    for seed, field in fifty_rank2_fields:
        a = chern(field, GRID).value
        b = fhs_chern(field, GRID)
        assert a == b, f"seed {seed}: transport {a} vs field-strength {b}"

    t1, t2, phi = 1.0, 0.1, np.pi / 2
    critical = 3.0 * np.sqrt(3.0) * t2 * np.sin(phi)
    values = [0.1 * i for i in range(11)]  # 0.0 .. 1.0 spans 0.5196
    cherns = []
    for m_sub in values:
        field, _ = spectral_projector(haldane(t1, t2, phi, m_sub), 1)
        a = chern(field, GRID).value
        b = fhs_chern(field, GRID)
        assert a == b, f"m_sub {m_sub}: transport {a} vs field-strength {b}"
        cherns.append(a)
    flips = [
        (values[i], values[i + 1])
        for i in range(len(values) - 1)
        if cherns[i] != cherns[i + 1]
    ]
    assert len(flips) == 1, f"expected one transition, saw {flips} in {cherns}"
    lo, hi = flips[0]
    assert lo < critical < hi, f"transition {flips[0]} does not bracket {critical:.4f}"
    _report(2, f"50 random + 11 sweep points agree; transition in {flips[0]}")


def test_criterion_03_z2_oracle_agreement(forty_trs_fields, km_sweep_fields):
    for seed, field, _ in forty_trs_fields:
        d = delta(field, GRID).value
        w = wilson_z2(field, WILSON)
        assert d == w, f"seed {seed}: delta {d} vs wilson {w}"

    deltas = []
    for lam_v, field, _ in km_sweep_fields:
        d = delta(field, GRID).value
        w = wilson_z2(field, WILSON)
        assert d == w, f"lambda_v {lam_v}: delta {d} vs wilson {w}"
        deltas.append(d)
    flips = [
        (km_sweep_fields[i][0], km_sweep_fields[i + 1][0])
        for i in range(len(deltas) - 1)
        if deltas[i] != deltas[i + 1]
    ]
    assert len(flips) == 1, f"expected one flip, saw {flips} in {deltas}"
    lo, hi = flips[0]
    step = km_sweep_fields[1][0] - km_sweep_fields[0][0]
    # the Rashba coupling shifts the critical point slightly below
    # 3*sqrt(3)*lambda_so; the flip must land within one sweep step of it
    assert min(abs(lo - KM_CRITICAL), abs(hi - KM_CRITICAL)) <= step + 1e-12
    _report(3, f"40 random + 13 sweep points agree; flip in {flips[0]}")


def test_criterion_04_parity_round_trip(forty_trs_fields, km_sweep_fields):
    fields = [(f"random {s}", f) for s, f, _ in forty_trs_fields]
    fields += [(f"kane_mele {v:.2f}", f) for v, f, _ in km_sweep_fields]
    n_splits = 0
    for name, field in fields:
        d = delta(field, GRID).value
        base = 0 if d == 1 else 1
        for h in (base, base + 2):
            cert = split(field, h, GRID)
            assert cert.chern_minus == h, f"{name}: Ch(P-) {cert.chern_minus} != {h}"
            assert cert.chern_plus == -h, f"{name}: Ch(P+) {cert.chern_plus} != {-h}"
            worst = max(
                v for k, v in cert.residuals.items() if k != "grid_depth"
            )
            assert worst <= 1e-7, f"{name} h={h}: residual {worst:.2e}"
            assert (-1) ** cert.chern_minus == d
            n_splits += 1
        with pytest.raises(ParityObstruction):
            split(field, base + 1, GRID)
    _report(4, f"{n_splits} splits with exact factor Chern, obstructions 100%")


def test_criterion_05_delta_well_posedness(forty_trs_fields):
    r = rng(505)
    fields = [(f"random {s}", f) for s, f, _ in forty_trs_fields]
    for lam_v in (0.1, 0.5):
        field, _ = spectral_projector(kane_mele(1.0, LAMBDA_SO, LAMBDA_R, lam_v), 2)
        fields.append((f"kane_mele {lam_v}", field))
    for name, field in fields:
        values = set()
        for policy in (None, 0.15):
            for _ in range(5):
                s, _, _ = random_symplectic_unitary(r, field.rank // 2)
                values.add(
                    delta(field, GRID, basis_rotation=s, step_target=policy).value
                )
        assert len(values) == 1, f"{name}: delta values {values}"
    _report(5, f"{len(fields)} fields x 5 bases x 2 step policies all agree")


def test_criterion_06_invariance_suites(fifty_rank2_fields, forty_trs_fields):
    # Chern under arbitrary periodic gauge transformations
    chern_fields = [fifty_rank2_fields[i][1] for i in range(3)]
    chern_fields.append(spectral_projector(haldane(1.0, 0.1, np.pi / 2, 0.0), 1)[0])
    chern_fields.append(spectral_projector(haldane(1.0, 0.0, 0.0, 0.5), 1)[0])
    for field in chern_fields:
        c0 = chern(field, GRID).value
        for seed in range(10):
            w = random_gauge_map(field.dim, seed=1000 + seed, symmetric=False)
            assert chern(gauge_transform(field, w), GRID).value == c0

    # delta under symmetric gauge transformations
    delta_fields = [forty_trs_fields[i][1] for i in range(3)]
    for lam_v in (0.1, 0.5):
        delta_fields.append(
            spectral_projector(kane_mele(1.0, LAMBDA_SO, LAMBDA_R, lam_v), 2)[0]
        )
    for field in delta_fields:
        d0 = delta(field, GRID).value
        for seed in range(10):
            w = random_gauge_map(
                field.dim, seed=2000 + seed, symmetric=True, trs=field.trs
            )
            moved = gauge_transform(field, w, symmetric=True)
            assert delta(moved, GRID).value == d0

    # delta constant along gapped parameter paths
    for lam_values in ([0.10, 0.14, 0.18, 0.22, 0.26], [0.40, 0.45, 0.50, 0.55, 0.60]):
        path = [
            spectral_projector(kane_mele(1.0, LAMBDA_SO, LAMBDA_R, v), 2)[0]
            for v in lam_values
        ]
        report = verify_homotopy(path, Grid2(16, 16))
        assert report.passed, f"path {lam_values}: {report.failures}"
        assert len(set(report.deltas)) == 1
    _report(6, "10 gauges/field for Chern and delta, 2 five-snapshot paths")


def test_criterion_07_additivity(fifty_rank2_fields, forty_trs_fields):
    small = Grid2(16, 16)
    for i in range(10):
        fa = fifty_rank2_fields[2 * i][1]
        fb = fifty_rank2_fields[2 * i + 1][1]
        total = direct_sum_fields(fa, fb)
        assert (
            chern(total, small).value
            == chern(fa, small).value + chern(fb, small).value
        )
    for i in range(10):
        fa = forty_trs_fields[2 * i][1]
        fb = forty_trs_fields[2 * i + 1][1]
        total = direct_sum_fields(fa, fb)
        assert (
            delta(total, small).value
            == delta(fa, small).value * delta(fb, small).value
        )
    _report(7, "Chern additive and delta multiplicative on 10 sums each")


def test_criterion_08_frames(forty_trs_fields):
    # non-symmetric pseudo-periodic frame on a Chern band
    field, _ = spectral_projector(haldane(1.0, 0.1, np.pi / 2, 0.0), 1)
    frame = pseudo_periodic_frame(field, GRID)
    assert frame.h == chern(field, GRID).value
    assert frame.residuals["boundary_law"] <= 1e-8
    assert frame.residuals["gram"] <= 1e-10
    assert frame.residuals["reconstruction"] <= 1e-8

    # symmetric frames: exactly 0 or 2 pseudo-periodic vectors
    sym_cases = []
    for lam_v in (0.1, 0.5):
        sym_cases.append(
            spectral_projector(kane_mele(1.0, LAMBDA_SO, LAMBDA_R, lam_v), 2)[0]
        )
    sym_cases += [forty_trs_fields[0][1], forty_trs_fields[1][1]]
    for field in sym_cases:
        d = delta(field, GRID).value
        frame = symmetric_frame(field, GRID)
        assert frame.residuals["boundary_law"] <= 1e-8
        assert frame.residuals["gram"] <= 1e-10
        assert frame.residuals["reconstruction"] <= 1e-8
        cols = frame.pseudo_periodic_columns()
        if d == 1:
            assert cols == []
        else:
            n = frame.rank // 2
            assert cols == [0, n]
            assert frame.boundary_exponents[0] == -frame.boundary_exponents[n] == 1
    _report(8, "frame laws exact to 1e-8; 0 or 2 pseudo-periodic vectors")


def test_criterion_09_equivalence_completeness():
    g = Grid2(16, 16)
    km_topo, _ = spectral_projector(kane_mele(1.0, LAMBDA_SO, LAMBDA_R, 0.1), 2)
    km_triv, _ = spectral_projector(kane_mele(1.0, LAMBDA_SO, LAMBDA_R, 0.5), 2)
    topo_gauged = [
        gauge_transform(
            km_topo, random_gauge_map(4, seed=s, symmetric=True, trs=km_topo.trs), True
        )
        for s in (31, 32)
    ]
    triv_gauged = [
        gauge_transform(
            km_triv, random_gauge_map(4, seed=s, symmetric=True, trs=km_triv.trs), True
        )
        for s in (33, 34)
    ]
    rand_neg = random_trs_hamiltonian(4, 2, 2, seed=5, j=KM_J, dispersion=0.8)[1]
    rand_pos = [
        random_trs_hamiltonian(4, 2, 2, seed=s, j=KM_J)[1] for s in (11, 12, 13)
    ]

    same_pairs = [
        (km_topo, topo_gauged[0]),
        (km_topo, topo_gauged[1]),
        (km_topo, rand_neg),
        (topo_gauged[0], rand_neg),
        (km_triv, triv_gauged[0]),
        (km_triv, triv_gauged[1]),
        (km_triv, rand_pos[0]),
        (rand_pos[0], rand_pos[1]),
        (rand_pos[1], rand_pos[2]),
        (triv_gauged[0], rand_pos[2]),
    ]
    for idx, (a, b) in enumerate(same_pairs):
        res = symmetric_equivalence(a, b, g)
        assert not res.obstructed, f"pair {idx} unexpectedly obstructed"
        worst = max(res.residuals.values())
        assert worst <= 1e-7, f"pair {idx}: residual {worst:.2e}"

    mixed_pairs = [
        (km_topo, km_triv),
        (km_topo, triv_gauged[0]),
        (km_topo, rand_pos[0]),
        (topo_gauged[0], km_triv),
        (topo_gauged[1], rand_pos[1]),
        (rand_neg, km_triv),
        (rand_neg, rand_pos[0]),
        (rand_neg, rand_pos[1]),
        (rand_neg, rand_pos[2]),
        (topo_gauged[0], triv_gauged[1]),
    ]
    for idx, (a, b) in enumerate(mixed_pairs):
        res = symmetric_equivalence(a, b, g)
        assert res.obstructed, f"mixed pair {idx} not obstructed"
        assert res.unitary is None
    _report(9, "10 same-delta pairs equivalent, 10 mixed pairs obstructed")


def test_criterion_10_kato_nagy_kernel():
    r = rng(1010)
    for trial in range(100):
        dim = int(r.integers(3, 8))
        rank = int(r.integers(1, dim))
        distance = float(r.uniform(0.2, 0.9))
        p, q = projector_pair_at_distance(r, dim, rank, distance)
        u = kato_nagy(p, q)
        resid = linalg.op_norm(u @ p @ u.conj().T - q)
        assert resid <= 1e-12, f"trial {trial}: residual {resid:.2e}"
    p = np.diag([1.0, 0.0]).astype(complex)
    q = np.diag([0.0, 1.0]).astype(complex)
    with pytest.raises(TooFar):
        kato_nagy(p, q)
    _report(10, "100 intertwinings at <=1e-12; TooFar at orthogonal pair")


def test_criterion_11_cli_determinism(tmp_path):
    doc = {
        "schema": 1,
        "command": "sweep",
        "model": {
            "name": "kane_mele",
            "params": {"t": 1.0, "lambda_so": LAMBDA_SO, "lambda_r": LAMBDA_R},
        },
        "occupied": 2,
        "grid": [16, 16],
        "sweep": {"parameter": "lambda_v", "min": 0.0, "max": 0.6, "steps": 5},
    }
    outputs = []
    for tag, workers in (("a", 1), ("b", 2), ("c", 1)):
        records = run(RunConfig.from_dict(doc, {"workers": workers}))
        csv_path, json_path = emit_phase_diagram(records, tmp_path / tag)
        outputs.append((open(csv_path, "rb").read(), open(json_path, "rb").read()))
    assert outputs[0] == outputs[1] == outputs[2]
    _report(11, "sweep reruns byte-identical across worker counts")
