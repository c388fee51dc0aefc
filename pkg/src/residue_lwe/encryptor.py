"""Residue-disclosing dynamic encryption.

An :class:`EncryptorSession` encrypts the initial state once and then one
input per step. Each ciphertext carries one extra column: for the initial
state it is ``V2 T2 Bx`` and for step ``t`` it is
``B'_y(t) = B_y(t) + g^-1 psi z(t)``, where ``z`` runs the zero-dynamics
``z(t+1) = F1 z(t)`` from ``z(0) = T1 Bx``. With those parts moved out of the
first column, the encryption noise no longer reaches the first element of
the residue ciphertext, which therefore equals the plaintext residue.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, ModulusMismatch, SessionOrderViolation, WidthMismatch
from .linalg import ZqMatrix, hstack
from .lwe import (
    Ciphertext,
    CiphertextKind,
    SecretKey,
    gaussian_vector,
    hom_matmul,
    uniform_matrix,
)
from .zero_dynamics import NormalForm, SystemZq, build_normal_form, residue_to_equivalent_input

__all__ = [
    "EncryptorSession",
    "InputRecord",
    "open_session",
    "decrypt_mod",
    "disclosed_residue",
    "run_encrypted_system",
    "ModifiedTranscript",
    "ConventionalTranscript",
    "transcript_to_conventional",
    "transcript_from_conventional",
]


@dataclass(frozen=True)
class InputRecord:
    """Randomness behind one input ciphertext (kept for tests and audits)."""

    A: ZqMatrix  # 1 x N
    e: int
    B: int  # A sk + e
    B_prime: int


@dataclass
class EncryptorSession:
    key: SecretKey
    nf: NormalForm
    rng: np.random.Generator
    Ax: ZqMatrix
    ex: list[int]
    Bx: ZqMatrix
    z: ZqMatrix
    t: int = 0
    initial_done: bool = False
    inputs: list[InputRecord] = field(default_factory=list)

    @property
    def q(self) -> int:
        return self.key.q

    @property
    def disclosed_initial(self) -> ZqMatrix:
        """``V2 T2 Bx``, the last column of the initial-state ciphertext."""
        return self.nf.V2 @ (self.nf.T2 @ self.Bx)

    def encrypt_initial_state(self, x0: ZqMatrix) -> Ciphertext:
        if self.initial_done or self.t > 0:
            raise SessionOrderViolation("initial state must be encrypted once, before any input")
        if x0.shape != (self.nf.n, 1):
            raise DimensionMismatch(f"initial state must be {self.nf.n} x 1, got {x0.shape}")
        if x0.q != self.q:
            raise ModulusMismatch("initial state and key moduli differ")
        self.initial_done = True
        d = self.disclosed_initial
        return Ciphertext(hstack([x0 + self.Bx - d, self.Ax, d]), CiphertextKind.MODIFIED)

    def mask_offset(self) -> int:
        """``g^-1 psi z(t)`` for the current step."""
        return (self.nf.g_inv * (self.nf.psi @ self.z)[0, 0]) % self.q

    def encrypt_input(
        self, y: int, *, A: ZqMatrix | None = None, e: int | None = None
    ) -> Ciphertext:
        """Encrypt the input for the current step and advance the zero-dynamics.

        ``A`` and ``e`` override the sampled randomness (test hook).
        """
        if not self.initial_done:
            raise SessionOrderViolation("encrypt the initial state before any input")
        q = self.q
        if A is None:
            A = uniform_matrix(1, self.key.N, q, self.rng)
        if e is None:
            e = gaussian_vector(1, self.key.sigma, self.rng)[0]
        B = ((A @ self.key.sk)[0, 0] + e) % q
        B_prime = (B + self.mask_offset()) % q
        self.inputs.append(InputRecord(A, int(e), B, B_prime))
        self.z = self.nf.F1 @ self.z
        self.t += 1
        first = ZqMatrix.scalar(int(y) + B - B_prime, q)
        return Ciphertext(
            hstack([first, A, ZqMatrix.scalar(B_prime, q)]), CiphertextKind.MODIFIED
        )

    def precompute_offsets(self, steps: int) -> list[int]:
        """``g^-1 psi z(t)`` for the next ``steps`` steps without advancing.

        These do not depend on any message, so they can be prepared offline.
        """
        g_inv, q = self.nf.g_inv, self.q
        out, z = [], self.z
        for _ in range(steps):
            out.append((g_inv * (self.nf.psi @ z)[0, 0]) % q)
            z = self.nf.F1 @ z
        return out


def open_session(
    key: SecretKey,
    sys: SystemZq | NormalForm,
    rng: np.random.Generator,
    *,
    Ax: ZqMatrix | None = None,
    ex: Sequence[int] | None = None,
) -> EncryptorSession:
    """Sample ``Ax``, ``ex`` and start the masking zero-dynamics at ``T1 Bx``."""
    nf = sys if isinstance(sys, NormalForm) else build_normal_form(sys)
    if nf.q != key.q:
        raise ModulusMismatch("system and key moduli differ")
    n, q = nf.n, key.q
    if Ax is None:
        Ax = uniform_matrix(n, key.N, q, rng)
    ex = list(gaussian_vector(n, key.sigma, rng) if ex is None else ex)
    Bx = Ax @ key.sk + ZqMatrix.column(ex, q)
    return EncryptorSession(key=key, nf=nf, rng=rng, Ax=Ax, ex=ex, Bx=Bx, z=nf.T1 @ Bx)


def decrypt_mod(c: Ciphertext, key: SecretKey) -> ZqMatrix:
    """``c [1, -sk^T, 1]^T mod q`` for width-(N+2) ciphertexts."""
    if c.kind is not CiphertextKind.MODIFIED or c.N != key.N:
        raise WidthMismatch(f"expected a modified ciphertext of width {key.N + 2}")
    return c.message_column - c.mask @ key.sk + c.disclosed_column


def disclosed_residue(rct: Ciphertext) -> int:
    """The first element of a residue ciphertext; no key involved."""
    return rct.body[0, 0]


def run_encrypted_system(
    sys: SystemZq, x_ct: Ciphertext, y_cts: Sequence[Ciphertext]
) -> list[Ciphertext]:
    """Iterate ``x+ = F x + G y``, ``r = H x + J y`` on ciphertexts."""
    J = ZqMatrix.scalar(sys.J, sys.q)
    x, out = x_ct, []
    for y_ct in y_cts:
        out.append(hom_matmul(sys.H, x) + hom_matmul(J, y_ct))
        x = hom_matmul(sys.F, x) + hom_matmul(sys.G, y_ct)
    return out


@dataclass(frozen=True)
class ModifiedTranscript:
    x0: Ciphertext
    inputs: tuple[Ciphertext, ...]


@dataclass(frozen=True)
class ConventionalTranscript:
    x0: Ciphertext
    inputs: tuple[Ciphertext, ...]


def _fold_disclosed(c: Ciphertext) -> Ciphertext:
    body = c.body
    first = body[:, 0] + body[:, -1]
    return Ciphertext(hstack([first, body[:, 1:-1]]), CiphertextKind.CONVENTIONAL)


def transcript_to_conventional(
    sys: SystemZq, transcript: ModifiedTranscript
) -> tuple[ConventionalTranscript, list[int]]:
    """Split a modified transcript into the conventional one and the residues.

    Adding each disclosed column back into the first column gives the
    conventional ciphertexts; running the system on the modified ones gives
    the residues.
    """
    conv = ConventionalTranscript(
        _fold_disclosed(transcript.x0),
        tuple(_fold_disclosed(c) for c in transcript.inputs),
    )
    residues = [
        disclosed_residue(rc)
        for rc in run_encrypted_system(sys, transcript.x0, transcript.inputs)
    ]
    return conv, residues


def transcript_from_conventional(
    nf: NormalForm,
    transcript: ConventionalTranscript,
    residues: Sequence[int],
    steps: int | None = None,
) -> ModifiedTranscript:
    """Rebuild the modified transcript from conventional ciphertexts and residues.

    The first column of the conventional residue ciphertext minus the
    disclosed residue is the output of the system driven by the encryption
    randomness ``(Bx, B_y)``; its equivalent information is exactly
    ``(T2 Bx, B'_y)``. Input ``t`` needs residues through ``t + nu``.
    """
    sys, q = nf.system, nf.q
    conv_r = run_encrypted_system(sys, transcript.x0, transcript.inputs)
    noise_out = [(rc.body[0, 0] - int(r)) % q for rc, r in zip(conv_r, residues)]
    v0, b_prime = residue_to_equivalent_input(nf, noise_out, steps)
    d = nf.V2 @ v0
    x0 = transcript.x0.body
    x_mod = Ciphertext(hstack([x0[:, 0] - d, x0[:, 1:], d]), CiphertextKind.MODIFIED)
    inputs = []
    for c, bp in zip(transcript.inputs, b_prime):
        col = ZqMatrix.scalar(bp, q)
        inputs.append(
            Ciphertext(hstack([c.body[:, 0] - col, c.body[:, 1:], col]), CiphertextKind.MODIFIED)
        )
    return ModifiedTranscript(x_mod, tuple(inputs))
