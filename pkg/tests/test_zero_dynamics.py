import pytest
from hypothesis import given
from hypothesis import strategies as st

from residue_lwe.errors import InsufficientHistory, NoRelativeDegree, NonzeroInitialOutput
from residue_lwe.linalg import ZqMatrix, hstack, mat_pow, vstack
from residue_lwe.lwe import make_rng
from residue_lwe.verify import random_system, random_vector
from residue_lwe.zero_dynamics import (
    SystemZq,
    build_normal_form,
    equivalent_info,
    normal_form_step,
    relative_degree,
    residue_to_equivalent_input,
    simulate,
    zero_output_input,
    zero_output_inputs,
)

seeds = st.integers(0, 2**32)


def _brute_relative_degree(sys):
    if sys.J:
        return 0
    for d in range(1, sys.n + 1):
        if (sys.H @ mat_pow(sys.F, d - 1) @ sys.G)[0, 0]:
            return d
    return None


def _chain(q=11):
    # shift-register: y enters at the bottom, output reads the top
    F = ZqMatrix([[0, 1, 0], [0, 0, 1], [2, 3, 4]], q)
    G = ZqMatrix.column([0, 0, 1], q)
    H = ZqMatrix.row([1, 0, 0], q)
    return F, G, H


def test_chain_example_q11():
    q = 11
    F, G, H = _chain(q)
    sys = SystemZq(F, G, H, 0)
    assert relative_degree(sys) == 3
    nf = build_normal_form(sys)
    assert nf.T1.shape == (0, 3) and nf.T == ZqMatrix.identity(3, q)
    assert nf.g == 1

    sys2 = SystemZq(F, G, ZqMatrix.row([0, 1, 0], q), 0)
    nf2 = build_normal_form(sys2)
    assert nf2.nu == 2 and nf2.T1.shape == (1, 3)
    assert (nf2.T1 @ G).is_zero()

    assert relative_degree(SystemZq(F, G, H, 5)) == 0


def test_no_relative_degree():
    q = 11
    sys = SystemZq(ZqMatrix.identity(2, q), ZqMatrix.column([1, 0], q), ZqMatrix.row([0, 1], q), 0)
    with pytest.raises(NoRelativeDegree):
        relative_degree(sys)
    with pytest.raises(NoRelativeDegree):
        build_normal_form(sys)


@given(seeds)
def test_normal_form_identities(seed):
    sys, nf = random_system(make_rng(seed))
    n, q, nu = sys.n, sys.q, nf.nu
    assert nu == _brute_relative_degree(sys)
    V = hstack([nf.V1, nf.V2]) if nu < n else nf.V2
    assert V @ nf.T == ZqMatrix.identity(n, q)
    assert nf.T @ V == ZqMatrix.identity(n, q)
    if nu == 0:
        assert nf.F1 == sys.F - (sys.G * nf.g_inv) @ sys.H
        return
    assert (nf.T1 @ sys.G).is_zero()
    assert nf.T2 == vstack([sys.H @ mat_pow(sys.F, i) for i in range(nu)])
    assert nf.g == (sys.H @ mat_pow(sys.F, nu - 1) @ sys.G)[0, 0] != 0


@given(seeds)
def test_normal_form_trajectories(seed):
    rng = make_rng(seed)
    sys, nf = random_system(rng)
    x = random_vector(rng, sys.n, sys.q)
    z, v = nf.T1 @ x, nf.T2 @ x
    if nf.nu == 0:
        z = x
    for y in rng.integers(0, sys.q, 20):
        x, r = sys.step(x, int(y))
        z, v, r_nf = normal_form_step(nf, z, v, int(y))
        assert r == r_nf
        assert (z if nf.nu == 0 else vstack([z, v])) == (x if nf.nu == 0 else nf.T @ x)


@given(seeds)
def test_zero_output_inputs(seed):
    rng = make_rng(seed)
    sys, nf = random_system(rng)
    x0 = nf.V1 @ random_vector(rng, sys.n - nf.nu, sys.q)
    ys = zero_output_inputs(nf, x0, 40)
    assert ys[:5] == [zero_output_input(nf, x0, t) for t in range(5)]
    assert simulate(sys, x0, ys) == [0] * 40
    k = int(rng.integers(0, 40 - nf.nu))
    ys[k] = (ys[k] + 1) % sys.q
    out = simulate(sys, x0, ys)
    assert out[:k + nf.nu] == [0] * (k + nf.nu)
    assert out[k + nf.nu] != 0


def test_zero_output_requires_zero_chain(systems):
    sys, nf = next((s, f) for s, f in systems if f.nu >= 1)
    x0 = nf.V2 @ ZqMatrix.column([1] + [0] * (nf.nu - 1), sys.q)
    with pytest.raises(NonzeroInitialOutput):
        zero_output_inputs(nf, x0, 3)


@given(seeds)
def test_equivalent_information(seed):
    rng = make_rng(seed)
    sys, nf = random_system(rng)
    x0 = random_vector(rng, sys.n, sys.q)
    ys = [int(v) for v in rng.integers(0, sys.q, 30)]
    v0, yp = equivalent_info(nf, x0, ys)
    assert simulate(sys, x0, ys) == simulate(sys, nf.V2 @ v0, yp)


@given(seeds)
def test_residue_inverse_round_trip(seed):
    rng = make_rng(seed)
    sys, nf = random_system(rng)
    v0 = random_vector(rng, nf.nu, sys.q) if nf.nu else ZqMatrix.zeros(0, 1, sys.q)
    yp = [int(v) for v in rng.integers(0, sys.q, 25)]
    r = simulate(sys, nf.V2 @ v0, yp)
    got_v0, got_yp = residue_to_equivalent_input(nf, r)
    assert got_v0 == v0
    assert got_yp == yp[: 25 - nf.nu]


def test_residue_inverse_needs_history():
    F, G, H = _chain()
    nf = build_normal_form(SystemZq(F, G, ZqMatrix.row([0, 1, 0], 11), 0))
    with pytest.raises(InsufficientHistory):
        residue_to_equivalent_input(nf, [0] * 5, steps=5)
    assert residue_to_equivalent_input(nf, [0] * 5, steps=5 - nf.nu)[1] == [0] * (5 - nf.nu)
