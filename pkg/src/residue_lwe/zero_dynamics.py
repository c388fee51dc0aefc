"""Relative degree, normal form and zero-dynamics of SISO systems over Z_q.

The system is::

    x(t+1) = F x(t) + G y(t)
    r(t)   = H x(t) + J y(t)        (mod q)

For relative degree ``nu >= 1`` the transform ``T = [T1; T2]`` with
``T2 = [H; HF; ...; HF^(nu-1)]`` splits the state into the input chain
``v = T2 x`` and the internal part ``z = T1 x``. For ``nu = 0`` the
conventions ``T1 = I``, ``F1 = F - G J^-1 H``, ``g = J``, ``psi = H`` are
used so that one set of formulas covers both cases.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import (
    DimensionMismatch,
    InsufficientHistory,
    NoRelativeDegree,
    NonzeroInitialOutput,
)
from .field import mod_inv
from .linalg import (
    ZqMatrix,
    extend_to_basis,
    left_kernel_basis,
    mat_inverse,
    mat_pow,
    vstack,
)

__all__ = [
    "SystemZq",
    "NormalForm",
    "relative_degree",
    "build_normal_form",
    "simulate",
    "normal_form_step",
    "zero_output_input",
    "zero_output_inputs",
    "equivalent_info",
    "residue_to_equivalent_input",
]


@dataclass(frozen=True)
class SystemZq:
    F: ZqMatrix
    G: ZqMatrix
    H: ZqMatrix
    J: int

    def __post_init__(self):
        n = self.F.rows
        if self.F.shape != (n, n) or self.G.shape != (n, 1) or self.H.shape != (1, n):
            raise DimensionMismatch(
                f"inconsistent shapes F{self.F.shape} G{self.G.shape} H{self.H.shape}"
            )
        if not (self.F.q == self.G.q == self.H.q):
            raise DimensionMismatch("system matrices use different moduli")
        object.__setattr__(self, "J", int(self.J) % self.F.q)

    @property
    def n(self) -> int:
        return self.F.rows

    @property
    def q(self) -> int:
        return self.F.q

    def step(self, x: ZqMatrix, y: int) -> tuple[ZqMatrix, int]:
        """One update; returns ``(x(t+1), r(t))``."""
        r = ((self.H @ x)[0, 0] + self.J * y) % self.q
        return self.F @ x + self.G * y, r


@dataclass(frozen=True)
class NormalForm:
    system: SystemZq
    nu: int
    T1: ZqMatrix  # (n-nu) x n
    T2: ZqMatrix  # nu x n
    V1: ZqMatrix  # n x (n-nu)
    V2: ZqMatrix  # n x nu
    F1: ZqMatrix
    F2: ZqMatrix
    psi: ZqMatrix  # 1 x (n-nu)
    phi: ZqMatrix  # 1 x nu
    g: int

    @property
    def q(self) -> int:
        return self.system.q

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def g_inv(self) -> int:
        return mod_inv(self.g, self.q)

    @property
    def T(self) -> ZqMatrix:
        return vstack([self.T1, self.T2])

    def zero_dynamics(self, z0: ZqMatrix) -> Iterator[ZqMatrix]:
        """``z(0), z(1), ...`` of ``z(t+1) = F1 z(t)``."""
        z = z0
        while True:
            yield z
            z = self.F1 @ z


def relative_degree(sys: SystemZq) -> int:
    if sys.J != 0:
        return 0
    FkG = sys.G
    for d in range(1, sys.n + 1):
        if (sys.H @ FkG)[0, 0] != 0:
            return d
        FkG = sys.F @ FkG
    raise NoRelativeDegree("output does not depend on the input for any delay <= n")


def build_normal_form(sys: SystemZq) -> NormalForm:
    """Construct the transform and normal-form matrices of ``sys``.

    ``T1`` completes ``{H F^i : i <= nu-2}`` to a basis of the left kernel of
    ``G`` using the rows of :func:`left_kernel_basis` in elimination order.
    """
    q, n = sys.q, sys.n
    nu = relative_degree(sys)
    if nu == 0:
        J_inv = mod_inv(sys.J, q)
        ident = ZqMatrix.identity(n, q)
        return NormalForm(
            system=sys,
            nu=0,
            T1=ident,
            T2=ZqMatrix.zeros(0, n, q),
            V1=ident,
            V2=ZqMatrix.zeros(n, 0, q),
            F1=sys.F - (sys.G * J_inv) @ sys.H,
            F2=ZqMatrix.zeros(n, 0, q),
            psi=sys.H,
            phi=ZqMatrix.zeros(1, 0, q),
            g=sys.J,
        )

    HF = [sys.H]
    for _ in range(nu):
        HF.append(HF[-1] @ sys.F)
    T2 = vstack(HF[:nu])
    kernel = left_kernel_basis(sys.G)
    T1_rows = extend_to_basis(HF[: nu - 1], kernel)
    T1 = vstack(T1_rows) if T1_rows else ZqMatrix.zeros(0, n, q)
    T = vstack([T1, T2])
    V = mat_inverse(T)
    k = n - nu
    V1, V2 = V[:, :k], V[:, k:]
    g = (HF[nu - 1] @ sys.G)[0, 0]
    return NormalForm(
        system=sys,
        nu=nu,
        T1=T1,
        T2=T2,
        V1=V1,
        V2=V2,
        F1=T1 @ sys.F @ V1,
        F2=T1 @ sys.F @ V2,
        psi=HF[nu] @ V1,
        phi=HF[nu] @ V2,
        g=g,
    )


def simulate(sys: SystemZq, x0: ZqMatrix, ys: Sequence[int]) -> list[int]:
    """Outputs ``r(0..len(ys)-1)`` of the plain Z_q system."""
    x, out = x0, []
    for y in ys:
        x, r = sys.step(x, y)
        out.append(r)
    return out


def normal_form_step(
    nf: NormalForm, z: ZqMatrix, v: ZqMatrix, y: int
) -> tuple[ZqMatrix, ZqMatrix, int]:
    """Advance the normal-form coordinates by one step; returns ``(z+, v+, r)``.

    For ``nu = 0`` there is no chain: ``z`` is the original state and ``v``
    is empty.
    """
    q = nf.q
    if nf.nu == 0:
        sys = nf.system
        x_next, r = sys.step(z, y)
        return x_next, v, r
    if z.shape != (nf.n - nf.nu, 1) or v.shape != (nf.nu, 1):
        raise DimensionMismatch("state does not match the normal form")
    z_next = nf.F1 @ z + nf.F2 @ v
    last = ((nf.psi @ z)[0, 0] + (nf.phi @ v)[0, 0] + nf.g * y) % q
    v_next = ZqMatrix.column(v.flat()[1:] + [last], q)
    return z_next, v_next, v[0, 0]


def _check_zero_output_premise(nf: NormalForm, x0: ZqMatrix) -> None:
    if nf.nu and not (nf.T2 @ x0).is_zero():
        raise NonzeroInitialOutput("T2 x0 != 0, the output cannot stay at zero")


def zero_output_input(nf: NormalForm, x0: ZqMatrix, t: int) -> int:
    """The input at step ``t`` that keeps the output identically zero."""
    _check_zero_output_premise(nf, x0)
    z = mat_pow(nf.F1, t) @ (nf.T1 @ x0)
    return (-nf.g_inv * (nf.psi @ z)[0, 0]) % nf.q


def zero_output_inputs(nf: NormalForm, x0: ZqMatrix, steps: int) -> list[int]:
    """Same as :func:`zero_output_input` for ``t = 0..steps-1``, iteratively."""
    _check_zero_output_premise(nf, x0)
    g_inv, q = nf.g_inv, nf.q
    out = []
    z = nf.T1 @ x0
    for _ in range(steps):
        out.append((-g_inv * (nf.psi @ z)[0, 0]) % q)
        z = nf.F1 @ z
    return out


def equivalent_info(
    nf: NormalForm, x0: ZqMatrix, ys: Sequence[int]
) -> tuple[ZqMatrix, list[int]]:
    """``(v0, y')`` with ``S(x0, y) = S(V2 v0, y')``.

    ``v0 = T2 x0`` and ``y'(t) = y(t) + g^-1 psi F1^t T1 x0``. For ``nu = 0``
    ``v0`` is empty and the equality reads ``S(x0, y) = S(0, y')``.
    """
    q, g_inv = nf.q, nf.g_inv
    v0 = nf.T2 @ x0
    z = nf.T1 @ x0
    y_prime = []
    for y in ys:
        y_prime.append((int(y) + g_inv * (nf.psi @ z)[0, 0]) % q)
        z = nf.F1 @ z
    return v0, y_prime


def residue_to_equivalent_input(
    nf: NormalForm, r: Sequence[int], steps: int | None = None
) -> tuple[ZqMatrix, list[int]]:
    """Recover ``(v0, y'(0..steps-1))`` from an output record alone.

    ``y'(t)`` needs ``r`` through index ``t + nu``; by default as many
    inputs as the record supports are returned. The accumulated term
    ``w(t) = sum_tau F1^(t-1-tau) F2 v(tau)`` is carried recursively. With
    ``nu = 0`` the same recursion runs the inverse system
    ``w(t+1) = F1 w(t) + G J^-1 r(t)``, ``y'(t) = J^-1 (r(t) - H w(t))``.
    """
    q, nu, g_inv = nf.q, nf.nu, nf.g_inv
    r = [int(v) % q for v in r]
    available = len(r) - nu
    if steps is None:
        steps = max(available, 0)
    if steps > available or len(r) < nu:
        raise InsufficientHistory(
            f"{steps} equivalent inputs need r through index {steps + nu - 1}, have {len(r)} values"
        )
    v0 = ZqMatrix.column(r[:nu], q)
    w = ZqMatrix.zeros(nf.n - nu, 1, q)
    y_prime = []
    if nu == 0:
        GJ = nf.system.G * g_inv
        for t in range(steps):
            y_prime.append((g_inv * (r[t] - (nf.psi @ w)[0, 0])) % q)
            w = nf.F1 @ w + GJ * r[t]
        return v0, y_prime
    for t in range(steps):
        v = ZqMatrix.column(r[t : t + nu], q)
        num = r[t + nu] - (nf.phi @ v)[0, 0] - (nf.psi @ w)[0, 0]
        y_prime.append((g_inv * num) % q)
        w = nf.F1 @ w + nf.F2 @ v
    return v0, y_prime
