"""Turn a real observer-based controller into a Z_q system and back.

The controller::

    xhat+ = (A + BK - LC) xhat + L y,   u = K xhat,   r = y - C xhat

is rewritten with the residue fed back through a free gain ``R``::

    xhat+ = F xhat + (L - R) y + R r,   F = A + BK - LC + RC

``R`` assigns the characteristic polynomial of ``F`` to integer coefficients
and ``T`` moves ``F`` into observer canonical form, so ``T F T^-1`` is an
integer companion matrix. Everything else is scaled by ``1/s`` and rounded.

Scales are stored as integers where the construction requires it:
``s_inv = 1/s`` and ``L_inv = 1/L`` (the message scale); ``r`` is the real
quantization step. All rounding is half away from zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ModulusTooSmall, ObservabilityFailure
from .field import centered_lift, next_prime, require_prime, round_div, round_half_away
from .linalg import ZqMatrix
from .lwe import Ciphertext, CiphertextKind, tail_bound, trivial_ciphertext
from .zero_dynamics import SystemZq

__all__ = [
    "PlantModel",
    "ObserverController",
    "IntegerRealization",
    "Scales",
    "ScaledParams",
    "controllability_matrix",
    "observability_matrix",
    "integerize",
    "scaled_integers",
    "scale_params",
    "quantize_initial_state",
    "quantize_measurement",
    "restore_residue",
    "restore_input",
    "residue_feedback_value",
    "residue_feedback_ciphertext",
    "size_modulus",
    "error_gain",
    "residue_observability_ranks",
]

RANK_TOL = 1e-8
INTEGER_TOL = 1e-9


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def _rank(M: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(M, tol=RANK_TOL))


@dataclass(frozen=True)
class PlantModel:
    A: np.ndarray
    B: np.ndarray  # n x 1
    C: np.ndarray  # 1 x n
    x0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, n)
        x0 = np.asarray(self.x0, dtype=float).reshape(n)
        if A.shape != (n, n):
            raise ConfigError(f"A must be square, got {A.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "x0", x0)
        if _rank(controllability_matrix(A, B)) < n:
            raise ConfigError("plant (A, B) is not controllable")
        if _rank(observability_matrix(A, C)) < n:
            raise ConfigError("plant (A, C) is not observable")

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class ObserverController:
    K: np.ndarray  # 1 x n
    L: np.ndarray  # n x 1
    xhat0: np.ndarray

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        n = K.shape[1]
        object.__setattr__(self, "K", K.reshape(1, n))
        object.__setattr__(self, "L", np.asarray(self.L, dtype=float).reshape(n, 1))
        object.__setattr__(self, "xhat0", np.asarray(self.xhat0, dtype=float).reshape(n))

    def closed_loop_matrix(self, plant: PlantModel) -> np.ndarray:
        """State matrix of the plant/observer loop in ``[x; xhat]``."""
        A, B, C = plant.A, plant.B, plant.C
        top = np.hstack([A, B @ self.K])
        bottom = np.hstack([self.L @ C, A + B @ self.K - self.L @ C])
        return np.vstack([top, bottom])

    def validate(self, plant: PlantModel) -> None:
        rho = max(abs(np.linalg.eigvals(self.closed_loop_matrix(plant))))
        if rho >= 1:
            raise ConfigError(f"closed loop is not stable (spectral radius {rho:.6g})")
        if _rank(observability_matrix(plant.A + plant.B @ self.K, plant.C)) < plant.n:
            raise ObservabilityFailure("(A + BK, C) is not observable")


def residue_observability_ranks(plant: PlantModel, ctrl: ObserverController) -> tuple[int, int]:
    """Ranks of the observability matrices seen from the residue output.

    Returns ``(rank over [x; xhat], rank over x - xhat)``. The first is at
    most ``n`` out of ``2n``: the residue only sees the estimation error,
    whose dynamics are ``e+ = (A - LC) e`` with ``r = C e``.
    """
    C = plant.C
    full = observability_matrix(ctrl.closed_loop_matrix(plant), np.hstack([C, -C]))
    err = observability_matrix(plant.A - ctrl.L @ C, C)
    return _rank(full), _rank(err)


@dataclass(frozen=True)
class IntegerRealization:
    T: np.ndarray
    R: np.ndarray  # n x 1
    F_int: np.ndarray  # integer n x n
    target: tuple[int, ...]

    @property
    def T_inv(self) -> np.ndarray:
        return np.linalg.inv(self.T)


def integerize(
    plant: PlantModel, ctrl: ObserverController, target: Sequence[int] | None = None
) -> IntegerRealization:
    """Find ``(T, R)`` with ``T (A+BK-LC+RC) T^-1`` the companion matrix of ``target``.

    ``target`` lists the integer coefficients ``d_1..d_n`` of
    ``lambda^n + d_1 lambda^(n-1) + ... + d_n``; all zeros (the default) gives
    a nilpotent state matrix.
    """
    n = plant.n
    target = tuple(int(v) for v in (target if target is not None else [0] * n))
    if len(target) != n:
        raise ConfigError(f"target polynomial needs {n} coefficients, got {len(target)}")
    M = plant.A + plant.B @ ctrl.K
    C = plant.C
    O = observability_matrix(M, C)
    sv = np.linalg.svd(O, compute_uv=False)
    if sv.min() <= RANK_TOL:
        raise ObservabilityFailure(
            f"(A + BK, C) is not observable: smallest singular value {sv.min():.3g}"
        )
    coeffs = np.real(np.poly(M))  # [1, c_1, ..., c_n]
    rows = [C.reshape(n)]
    for i in range(1, n):
        rows.append(rows[-1] @ M + coeffs[i] * C.reshape(n))
    T = np.vstack(rows)
    T_inv = np.linalg.inv(T)
    # In these coordinates C T^-1 = e_1 and only the first column of T F T^-1
    # depends on R, so R is solved for directly.
    R = ctrl.L + T_inv @ (coeffs[1:] - np.asarray(target, dtype=float)).reshape(n, 1)
    F = M - ctrl.L @ C + R @ C
    F_t = T @ F @ T_inv
    F_int = np.rint(F_t)
    drift = np.max(np.abs(F_t - F_int))
    if drift >= INTEGER_TOL:
        raise ValueError(f"transformed state matrix is not integral (max deviation {drift:.3g})")
    return IntegerRealization(T=T, R=R, F_int=F_int.astype(np.int64), target=target)


@dataclass(frozen=True)
class Scales:
    """Quantization step ``r``, ``s_inv = 1/s`` and ``L_inv = 1/L`` (message scale)."""

    r: float
    s_inv: int
    L_inv: int

    def __post_init__(self):
        if not self.r > 0:
            raise ConfigError("quantization step r must be positive")
        if int(self.s_inv) != self.s_inv or self.s_inv < 1:
            raise ConfigError("1/s must be a positive integer")
        if int(self.L_inv) != self.L_inv or self.L_inv < 1:
            raise ConfigError("1/L must be a positive integer")
        object.__setattr__(self, "s_inv", int(self.s_inv))
        object.__setattr__(self, "L_inv", int(self.L_inv))

    @property
    def output_unit(self) -> float:
        """Real value of one unit of a restored residue or input: L r s^2."""
        return self.r / (self.L_inv * self.s_inv * self.s_inv)


def _round_matrix(M: np.ndarray) -> list[list[int]]:
    return [[round_half_away(float(v)) for v in row] for row in np.atleast_2d(M)]


def scaled_integers(
    ir: IntegerRealization, ctrl: ObserverController, plant: PlantModel, s_inv: int
) -> dict[str, list[list[int]]]:
    """The controller matrices as unreduced integers (before ``mod q``)."""
    T, T_inv = ir.T, ir.T_inv
    return {
        "F": [[int(v) for v in row] for row in ir.F_int],
        "G": _round_matrix(T @ (ctrl.L - ir.R) * s_inv),
        "H": _round_matrix(-plant.C @ T_inv * s_inv),
        "J": [[s_inv * s_inv]],
        "R": _round_matrix(T @ ir.R * s_inv),
        "P": _round_matrix(ctrl.K @ T_inv * s_inv),
    }


def _check_fits(name: str, values, q: int) -> None:
    for v in np.asarray(values, dtype=object).ravel():
        if 2 * abs(int(v)) >= q:
            raise ModulusTooSmall(name, abs(int(v)), q)


@dataclass(frozen=True)
class ScaledParams:
    F: ZqMatrix
    G: ZqMatrix
    H: ZqMatrix
    J: int
    R: ZqMatrix
    P: ZqMatrix
    scales: Scales

    @property
    def q(self) -> int:
        return self.F.q

    @property
    def system(self) -> SystemZq:
        return SystemZq(self.F, self.G, self.H, self.J)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "r": self.scales.r,
            "s_inv": self.scales.s_inv,
            "L_inv": self.scales.L_inv,
            "F": self.F.tolist(),
            "G": self.G.tolist(),
            "H": self.H.tolist(),
            "J": self.J,
            "R": self.R.tolist(),
            "P": self.P.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScaledParams":
        try:
            q = require_prime(int(d["q"]))
            return cls(
                F=ZqMatrix(d["F"], q),
                G=ZqMatrix(d["G"], q),
                H=ZqMatrix(d["H"], q),
                J=int(d["J"]) % q,
                R=ZqMatrix(d["R"], q),
                P=ZqMatrix(d["P"], q),
                scales=Scales(float(d["r"]), int(d["s_inv"]), int(d["L_inv"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scaled-parameter table: {exc}") from exc


def scale_params(
    ir: IntegerRealization,
    ctrl: ObserverController,
    plant: PlantModel,
    scales: Scales,
    q: int,
) -> ScaledParams:
    q = require_prime(q)
    ints = scaled_integers(ir, ctrl, plant, scales.s_inv)
    for name, vals in ints.items():
        _check_fits(name, vals, q)
    return ScaledParams(
        F=ZqMatrix(ints["F"], q),
        G=ZqMatrix(ints["G"], q),
        H=ZqMatrix(ints["H"], q),
        J=ints["J"][0][0] % q,
        R=ZqMatrix(ints["R"], q),
        P=ZqMatrix(ints["P"], q),
        scales=scales,
    )


def quantize_initial_state(
    xhat0: np.ndarray, ir: IntegerRealization, scales: Scales, q: int
) -> ZqMatrix:
    """``L_inv * round(T xhat0 * s_inv / r) mod q``."""
    vals = [
        scales.L_inv * round_half_away(float(v) * scales.s_inv / scales.r)
        for v in ir.T @ np.asarray(xhat0, dtype=float).reshape(-1)
    ]
    _check_fits("initial state", vals, q)
    return ZqMatrix.column(vals, q)


def quantize_measurement(y: float, scales: Scales, q: int) -> int:
    """``L_inv * round(y / r) mod q``."""
    val = scales.L_inv * round_half_away(float(y) / scales.r)
    _check_fits("measurement", [val], q)
    return val % q


def restore_residue(r1: int, scales: Scales, q: int) -> float:
    """Real residue from the disclosed element: ``L r s^2 * centered_lift(r1)``."""
    return scales.output_unit * centered_lift(r1, q)


def restore_input(u_dec: int, scales: Scales, q: int) -> float:
    """Plant input from the decrypted controller output."""
    return scales.output_unit * centered_lift(u_dec, q)


def residue_feedback_value(r1: int, s_inv: int, q: int) -> int:
    """``round(s^2 * centered_lift(r1)) mod q`` in exact integer arithmetic."""
    return round_div(centered_lift(r1, q), s_inv * s_inv) % q


def residue_feedback_ciphertext(r1: int, s_inv: int, q: int, N: int) -> Ciphertext:
    """The fed-back residue as a trivial modified ciphertext ``[value, 0, ..., 0]``."""
    value = ZqMatrix.scalar(residue_feedback_value(r1, s_inv, q), q)
    return trivial_ciphertext(value, N, CiphertextKind.MODIFIED)


def size_modulus(
    bound: float, *, safety: float = 4.0, min_bits: int = 0
) -> int:
    """Smallest prime above ``max(2 * safety * bound, 2**min_bits)``."""
    floor = max(int(np.ceil(2 * safety * bound)), (1 << min_bits) if min_bits else 3)
    return next_prime(floor)


def error_gain(ints: dict[str, list[list[int]]], sigma: float, horizon: int) -> int:
    """Bound on ``|P e(t)|`` where ``e`` is the decryption-error state.

    ``ints`` is the output of :func:`scaled_integers`. The error state obeys
    ``e(t+1) = F e(t) + G e_y(t)`` from ``e(0) = e_x``, each injected error
    bounded by the Gaussian tail cut. Powers of ``F`` are summed up to
    ``horizon`` (the sum stops after n terms when ``F`` is nilpotent).
    """
    bound = tail_bound(sigma)
    if bound == 0:
        return 0
    F = np.array(ints["F"], dtype=object)
    G = np.array(ints["G"], dtype=object)
    PFk = np.array(ints["P"], dtype=object)
    total = 0
    for _ in range(max(horizon, 1)):
        total += sum(abs(int(v)) for v in np.dot(PFk, G).ravel()) * bound
        total += sum(abs(int(v)) for v in PFk.ravel()) * bound
        PFk = np.dot(PFk, F)
        if all(v == 0 for v in PFk.ravel()):
            break
    return total
