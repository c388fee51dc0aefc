"""Randomized property checks behind ``residue-lwe verify``.

Each check draws random small systems over Z_11 / Z_97 and compares the
library's output with a direct computation. Every check returns a
:class:`CheckResult`; none of them raise on a failed property.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import bundled_scenario
from .encryptor import (
    ModifiedTranscript,
    decrypt_mod,
    disclosed_residue,
    open_session,
    run_encrypted_system,
    transcript_from_conventional,
    transcript_to_conventional,
)
from .errors import NoRelativeDegree
from .linalg import ZqMatrix, hstack, vstack
from .lwe import decrypt, encrypt, hom_matmul, keygen, make_rng, uniform_matrix
from .simulation import run_scenario
from .zero_dynamics import (
    NormalForm,
    SystemZq,
    build_normal_form,
    equivalent_info,
    normal_form_step,
    simulate,
    zero_output_inputs,
)

__all__ = ["CheckResult", "random_system", "random_vector", "CHECKS", "run_checks"]

SMALL_PRIMES = (11, 97)


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    detail: str = ""


def random_vector(rng: np.random.Generator, n: int, q: int) -> ZqMatrix:
    return uniform_matrix(n, 1, q, rng)


def random_system(
    rng: np.random.Generator, q: int | None = None, n_max: int = 4
) -> tuple[SystemZq, NormalForm]:
    """A random SISO system that has a relative degree, with its normal form.

    ``J`` is zero half of the time so that every relative degree shows up.
    """
    while True:
        qq = q or int(rng.choice(SMALL_PRIMES))
        n = int(rng.integers(1, n_max + 1))
        F = uniform_matrix(n, n, qq, rng)
        G = uniform_matrix(n, 1, qq, rng)
        H = uniform_matrix(1, n, qq, rng)
        J = int(rng.integers(0, qq)) if rng.random() < 0.5 else 0
        sys = SystemZq(F, G, H, J)
        try:
            return sys, build_normal_form(sys)
        except NoRelativeDegree:
            continue


def _random_inputs(rng, q, steps) -> list[int]:
    return [int(v) for v in rng.integers(0, q, steps)]


def check_normal_form(rng, trials: int, canary: bool = False) -> CheckResult:
    for _ in range(trials):
        sys, nf = random_system(rng)
        n, q = sys.n, sys.q
        Vfull = hstack([nf.V1, nf.V2])
        eye = ZqMatrix.identity(n, q)
        if Vfull @ nf.T != eye or nf.T @ Vfull != eye:
            return CheckResult("normal form", False, trials, "T V != I")
        if nf.nu == 0:
            continue
        x = random_vector(rng, n, q)
        z, v = nf.T1 @ x, nf.T2 @ x
        for y in _random_inputs(rng, q, 20):
            x, r = sys.step(x, y)
            z, v, r_nf = normal_form_step(nf, z, v, y)
            if r != r_nf or vstack([z, v]) != nf.T @ x:
                return CheckResult("normal form", False, trials, "trajectory mismatch")
    return CheckResult("normal form", True, trials)


def check_zero_output(rng, trials: int, canary: bool = False) -> CheckResult:
    for _ in range(trials):
        sys, nf = random_system(rng)
        n, q = sys.n, sys.q
        # x0 from the kernel of T2: V1 times anything
        x0 = nf.V1 @ random_vector(rng, n - nf.nu, q)
        ys = zero_output_inputs(nf, x0, 50)
        if any(simulate(sys, x0, ys)):
            return CheckResult("zero-output inputs", False, trials, "output not identically zero")
        k = int(rng.integers(0, 50 - nf.nu))
        ys[k] = (ys[k] + int(rng.integers(1, q))) % q
        out = simulate(sys, x0, ys)
        if not any(out[k : k + nf.nu + 1]):
            return CheckResult("zero-output inputs", False, trials, "perturbation went unseen")
    return CheckResult("zero-output inputs", True, trials)


def check_equivalence(rng, trials: int, canary: bool = False) -> CheckResult:
    for _ in range(trials):
        sys, nf = random_system(rng)
        q = sys.q
        x0 = random_vector(rng, sys.n, q)
        ys = _random_inputs(rng, q, 30)
        v0, yp = equivalent_info(nf, x0, ys)
        if simulate(sys, x0, ys) != simulate(sys, nf.V2 @ v0, yp):
            return CheckResult("equivalent information", False, trials, "outputs differ")
    return CheckResult("equivalent information", True, trials)


def check_correctness(rng, trials: int, canary: bool = False) -> CheckResult:
    for _ in range(trials):
        sys, nf = random_system(rng)
        q, n = sys.q, sys.n
        key = keygen(4, q, 1.0, rng)
        session = open_session(key, nf, rng)
        x0 = random_vector(rng, n, q)
        cx = session.encrypt_initial_state(x0)
        conv = encrypt(x0, key, rng, A=session.Ax, e=session.ex)
        if decrypt_mod(cx, key) != decrypt(conv, key):
            return CheckResult("modified decryption", False, trials, "initial state")
        y = int(rng.integers(0, q))
        cy = session.encrypt_input(y)
        rec = session.inputs[-1]
        conv_y = encrypt(ZqMatrix.scalar(y, q), key, rng, A=rec.A, e=[rec.e])
        if decrypt_mod(cy, key) != decrypt(conv_y, key):
            return CheckResult("modified decryption", False, trials, "input")
        K = uniform_matrix(int(rng.integers(1, 4)), n, q, rng)
        if decrypt_mod(hom_matmul(K, cx), key) != decrypt(hom_matmul(K, conv), key):
            return CheckResult("modified decryption", False, trials, "K-multiplication")
    return CheckResult("modified decryption", True, trials)


def check_disclosure(rng, trials: int, canary: bool = False) -> CheckResult:
    for i in range(trials):
        sys, nf = random_system(rng)
        q = sys.q
        key = keygen(4, q, float(i % 2), rng)
        session = open_session(key, nf, rng)
        x0 = random_vector(rng, sys.n, q)
        ys = _random_inputs(rng, q, 30)
        cx = session.encrypt_initial_state(x0)
        cys = [session.encrypt_input(y) for y in ys]
        disclosed = [disclosed_residue(c) for c in run_encrypted_system(sys, cx, cys)]
        if canary:
            disclosed[0] = (disclosed[0] + 1) % q
        if disclosed != simulate(sys, x0, ys):
            return CheckResult("residue disclosure", False, trials, "disclosed != plaintext residue")
    return CheckResult("residue disclosure", True, trials)


def check_transcript(rng, trials: int, canary: bool = False) -> CheckResult:
    for _ in range(trials):
        sys, nf = random_system(rng)
        q = sys.q
        key = keygen(4, q, 1.0, rng)
        session = open_session(key, nf, rng)
        x0 = random_vector(rng, sys.n, q)
        cx = session.encrypt_initial_state(x0)
        cys = [session.encrypt_input(y) for y in _random_inputs(rng, q, 30 + nf.nu)]
        conv, residues = transcript_to_conventional(sys, ModifiedTranscript(cx, tuple(cys)))
        back = transcript_from_conventional(nf, conv, residues, 30)
        if back.x0 != cx or back.inputs != tuple(cys[:30]):
            return CheckResult("transcript bijection", False, trials, "round trip differs")
    return CheckResult("transcript bijection", True, trials)


def check_closed_loop(profile: str) -> Callable:
    def check(rng, trials: int, canary: bool = False) -> CheckResult:
        seed = int(rng.integers(0, 2**63))
        name = "double_integrator" if profile == "demo" else "toy"
        cfg = bundled_scenario(name, seed=seed)
        trace = run_scenario(cfg)
        eps = cfg.epsilon or 1e-3
        gap = trace.max_residue_gap
        ok = gap <= eps and trace.max_input_gap <= 10 * eps
        return CheckResult(
            "closed-loop residue bound",
            ok,
            1,
            f"max |r_ref - r_disclosed| = {gap:.3g} (eps {eps:g}), "
            f"max |u_ref - u_enc| = {trace.max_input_gap:.3g}",
        )

    return check


CHECKS = (
    check_normal_form,
    check_zero_output,
    check_equivalence,
    check_correctness,
    check_disclosure,
    check_transcript,
)


def run_checks(seed: int, trials: int, profile: str = "test", canary: bool = False) -> list[CheckResult]:
    rng = make_rng(seed)
    results = [check(rng, trials, canary) for check in CHECKS]
    if trials > 0:
        results.append(check_closed_loop(profile)(rng, trials))
    return results
