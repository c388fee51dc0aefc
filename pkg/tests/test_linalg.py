import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sympy import GF, Matrix
from sympy.polys.matrices import DomainMatrix

from residue_lwe.errors import DependentInput, DimensionMismatch, ModulusMismatch, Singular
from residue_lwe.linalg import (
    ZqMatrix,
    extend_to_basis,
    hstack,
    left_kernel_basis,
    mat_inverse,
    mat_pow,
    null_space,
    rank,
    row_reduce,
    vstack,
)

Q = st.sampled_from([3, 11, 97])


@st.composite
def matrices(draw, rows=None, cols=None, square=False):
    q = draw(Q)
    r = rows or draw(st.integers(1, 5))
    c = r if square else (cols or draw(st.integers(1, 5)))
    vals = draw(st.lists(st.integers(0, q - 1), min_size=r * c, max_size=r * c))
    return ZqMatrix(np.array(vals, dtype=object).reshape(r, c), q)


def _gf_rank(M: ZqMatrix) -> int:
    K = GF(M.q)
    return DomainMatrix([[K(v) for v in row] for row in M.tolist()], M.shape, K).rank()


@given(matrices())
def test_rank_matches_sympy(M):
    assert rank(M) == _gf_rank(M)


@given(matrices())
def test_rref_shape(M):
    red, pivots = row_reduce(M)
    assert pivots == sorted(pivots)
    for i, p in enumerate(pivots):
        col = [red[k, p] for k in range(M.rows)]
        assert col == [1 if k == i else 0 for k in range(M.rows)]
    for i in range(len(pivots), M.rows):
        assert all(v == 0 for v in red[i, :].flat())


@given(matrices(square=True))
def test_inverse_matches_sympy(M):
    if _gf_rank(M) < M.rows:
        with pytest.raises(Singular):
            mat_inverse(M)
        return
    inv = mat_inverse(M)
    assert inv.tolist() == Matrix(M.tolist()).inv_mod(M.q).tolist()
    assert M @ inv == ZqMatrix.identity(M.rows, M.q)


@given(matrices())
def test_null_space_is_a_kernel_basis(M):
    basis = null_space(M)
    assert len(basis) == M.cols - _gf_rank(M)
    for v in basis:
        assert (M @ v).is_zero()
    if basis:
        assert rank(hstack(basis)) == len(basis)


@given(matrices(cols=1))
def test_left_kernel_basis(G):
    rows = left_kernel_basis(G)
    n = G.rows
    assert len(rows) == (n - 1 if not G.is_zero() else n)
    for v in rows:
        assert (v @ G).is_zero()
    if rows:
        assert rank(vstack(rows)) == len(rows)


def test_left_kernel_example_q11():
    G = ZqMatrix.column([3, 7, 5], 11)
    rows = left_kernel_basis(G)
    assert len(rows) == 2 and rank(vstack(rows)) == 2
    assert all((v @ G).is_zero() for v in rows)


def test_extend_to_basis(rng):
    q = 11
    kernel = [ZqMatrix.row(r, q) for r in ([1, 0, 0, 2], [0, 1, 0, 3], [0, 0, 1, 4])]
    partial = [ZqMatrix.row([1, 1, 0, 5], q)]
    extra = extend_to_basis(partial, kernel)
    assert len(extra) == 2
    assert rank(vstack(partial + extra)) == 3
    assert extend_to_basis(partial, kernel) == extra  # deterministic

    with pytest.raises(DependentInput):
        extend_to_basis(partial + partial, kernel)
    with pytest.raises(DependentInput):
        extend_to_basis([ZqMatrix.row([0, 0, 0, 1], q)], kernel)


@given(matrices(square=True), st.integers(0, 20))
def test_mat_pow_matches_repeated_product(M, t):
    expect = ZqMatrix.identity(M.rows, M.q)
    for _ in range(t):
        expect = expect @ M
    assert mat_pow(M, t) == expect


def test_arithmetic_reduces_and_checks():
    a = ZqMatrix([[10, 20], [-1, 5]], 11)
    assert a.tolist() == [[10, 9], [10, 5]]
    assert (a + a).tolist() == [[9, 7], [9, 10]]
    assert (a - a).is_zero()
    assert (-a + a).is_zero()
    assert (a * 3).tolist() == [[8, 5], [8, 4]]
    assert a[0, 1] == 9 and isinstance(a[0, 1], int)
    assert a[0].shape == (1, 2) and a[:, 1].shape == (2, 1)
    assert a.centered().tolist() == [[-1, -2], [-1, 5]]
    with pytest.raises(ModulusMismatch):
        a + ZqMatrix([[1, 2], [3, 4]], 13)
    with pytest.raises(DimensionMismatch):
        a @ ZqMatrix([[1, 2, 3]], 11)


def test_big_modulus_is_exact():
    q = 2**127 - 1
    a = ZqMatrix([[q - 1]], q)
    assert (a @ a)[0, 0] == 1
