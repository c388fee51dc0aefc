"""Closed-loop simulation of the plant with the encrypted controller.

Two loops run side by side from the same initial plant state: one with the
real-valued observer-based controller, one with the encrypted controller.
The anomaly detector only ever sees the disclosed residue of the encrypted
loop. Attacks are applied to both loops in matching form.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .codec import (
    IntegerRealization,
    ObserverController,
    PlantModel,
    ScaledParams,
    Scales,
    error_gain,
    integerize,
    quantize_initial_state,
    quantize_measurement,
    residue_feedback_ciphertext,
    restore_input,
    scale_params,
    scaled_integers,
    size_modulus,
)
from .detector import AnomalyDetector
from .encryptor import EncryptorSession, decrypt_mod, disclosed_residue, open_session
from .errors import ConfigError, DimensionMismatch, NonFinite
from .field import round_half_away
from .linalg import ZqMatrix
from .lwe import Ciphertext, SecretKey, hom_matmul, keygen, make_rng, trivial_ciphertext

log = logging.getLogger(__name__)

__all__ = [
    "AttackSpec",
    "ScenarioConfig",
    "StepRecord",
    "SimTrace",
    "Setup",
    "step_plant",
    "ReferenceController",
    "step_reference_controller",
    "step_encrypted_controller",
    "EncryptedController",
    "inject_attack",
    "reference_run",
    "prepare",
    "run_scenario",
    "CSV_HEADER",
]

DIVERGENCE_LIMIT = 1e12
ATTACK_KINDS = ("none", "measurement_bias", "measurement_replay", "output_bias")
CSV_HEADER = ("t", "y", "u_enc", "u_ref", "r_disclosed", "r_ref", "alarm", "attack_active")


@dataclass(frozen=True)
class AttackSpec:
    """An integrity attack active on steps ``start <= t < stop``.

    ``magnitude`` is an absolute bias; ``magnitude_thresholds`` expresses it
    as a multiple of the detector threshold instead. Replay re-sends the
    measurement ciphertext from ``delay`` steps earlier.
    """

    kind: str = "none"
    start: int = 0
    stop: int | None = None
    magnitude: float | None = None
    magnitude_thresholds: float | None = None
    delay: int = 10

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ConfigError(f"unknown attack kind {self.kind!r}; choose from {ATTACK_KINDS}")
        if self.kind in ("measurement_bias", "output_bias"):
            if (self.magnitude is None) == (self.magnitude_thresholds is None):
                raise ConfigError("bias attacks need exactly one of magnitude, magnitude_thresholds")
        if self.kind == "measurement_replay" and self.delay < 1:
            raise ConfigError("replay delay must be at least one step")

    def active(self, t: int) -> bool:
        if self.kind == "none" or t < self.start:
            return False
        return self.stop is None or t < self.stop

    def bias(self, threshold: float) -> float:
        if self.magnitude is not None:
            return float(self.magnitude)
        return float(self.magnitude_thresholds) * threshold


@dataclass(frozen=True)
class ScenarioConfig:
    plant: PlantModel
    controller: ObserverController
    scales: Scales
    horizon: int
    N: int = 1024
    sigma: float = 3.2
    seed: int = 0
    q: int | None = None
    q_min_bits: int = 0
    safety: float = 4.0
    target: tuple[int, ...] | None = None
    threshold: float | None = None
    threshold_factor: float = 5.0
    epsilon: float | None = None
    attack: AttackSpec = field(default_factory=AttackSpec)

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.threshold is not None and self.threshold < 0:
            raise ConfigError("threshold must be non-negative")
        if self.N < 1:
            raise ConfigError("key dimension N must be at least 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")


@dataclass(frozen=True)
class StepRecord:
    t: int
    y: float
    u_enc: float
    u_ref: float
    r_disclosed: float
    r_ref: float
    alarm: bool
    attack_active: bool
    y_ref: float = 0.0

    def csv_row(self) -> list[str]:
        def f(v: float) -> str:
            return f"{v:.17g}"

        return [
            str(self.t),
            f(self.y),
            f(self.u_enc),
            f(self.u_ref),
            f(self.r_disclosed),
            f(self.r_ref),
            str(int(self.alarm)),
            str(int(self.attack_active)),
        ]


@dataclass
class SimTrace:
    records: list[StepRecord]
    q: int
    threshold: float
    params: ScaledParams | None = None
    realization: IntegerRealization | None = None
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])

    @property
    def max_residue_gap(self) -> float:
        return float(np.max(np.abs(self.column("r_ref") - self.column("r_disclosed"))))

    @property
    def max_input_gap(self) -> float:
        return float(np.max(np.abs(self.column("u_ref") - self.column("u_enc"))))

    @property
    def alarm_steps(self) -> list[int]:
        return [rec.t for rec in self.records if rec.alarm]

    def summary(self) -> dict:
        alarms = self.alarm_steps
        return {
            "steps": len(self.records),
            "q": self.q,
            "threshold": self.threshold,
            "max_residue_gap": self.max_residue_gap,
            "max_input_gap": self.max_input_gap,
            "alarms": len(alarms),
            "first_alarm": alarms[0] if alarms else None,
            **self.stats,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in self.records:
            writer.writerow(rec.csv_row())
        return buf.getvalue()


def step_plant(plant: PlantModel, x: np.ndarray, u: float) -> tuple[np.ndarray, float]:
    """Returns ``(A x + B u, C x)``."""
    y = float(plant.C[0] @ x)
    x_next = plant.A @ x + plant.B[:, 0] * u
    if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next)) > DIVERGENCE_LIMIT:
        raise NonFinite("plant state diverged; check the scenario parameters")
    return x_next, y


def step_reference_controller(
    plant: PlantModel, ctrl: ObserverController, xhat: np.ndarray, y: float
) -> tuple[np.ndarray, float, float]:
    """One step of the real observer-based controller: ``(xhat+, u, r)``."""
    A, B, C = plant.A, plant.B, plant.C
    u = float(ctrl.K[0] @ xhat)
    r = y - float(C[0] @ xhat)
    xhat_next = (A + B @ ctrl.K - ctrl.L @ C) @ xhat + ctrl.L[:, 0] * y
    return xhat_next, u, r


@dataclass
class ReferenceController:
    plant: PlantModel
    ctrl: ObserverController
    xhat: np.ndarray = None

    def __post_init__(self):
        if self.xhat is None:
            self.xhat = self.ctrl.xhat0.copy()

    def step(self, y: float) -> tuple[float, float]:
        self.xhat, u, r = step_reference_controller(self.plant, self.ctrl, self.xhat, y)
        return u, r


def _controller_outputs(
    xct: Ciphertext, yct: Ciphertext, params: ScaledParams
) -> tuple[Ciphertext, Ciphertext]:
    J = ZqMatrix.scalar(params.J, params.q)
    uct = hom_matmul(params.P, xct)
    rct = hom_matmul(params.H, xct) + hom_matmul(J, yct)
    return uct, rct


def step_encrypted_controller(
    xct: Ciphertext, yct: Ciphertext, rfb: Ciphertext, params: ScaledParams
) -> tuple[Ciphertext, Ciphertext, Ciphertext]:
    """``x+ = F x + G y + R rfb``, ``u = P x``, ``r = H x + J y``, all on ciphertexts."""
    for c in (yct, rfb):
        if c.body.cols != xct.body.cols:
            raise DimensionMismatch("ciphertext widths differ")
    if yct.rows != 1 or rfb.rows != 1:
        raise DimensionMismatch("measurement and feedback ciphertexts must have one row")
    uct, rct = _controller_outputs(xct, yct, params)
    x_next = hom_matmul(params.F, xct) + hom_matmul(params.G, yct) + hom_matmul(params.R, rfb)
    return x_next, uct, rct


@dataclass
class EncryptedController:
    """Holds the encrypted state; never sees the secret key."""

    params: ScaledParams
    xct: Ciphertext

    def outputs(self, yct: Ciphertext) -> tuple[Ciphertext, Ciphertext]:
        return _controller_outputs(self.xct, yct, self.params)

    def step(self, yct: Ciphertext) -> tuple[Ciphertext, Ciphertext]:
        """Consume one measurement ciphertext; returns ``(uct, rct)``."""
        _, rct = self.outputs(yct)
        N = self.xct.N
        rfb = residue_feedback_ciphertext(
            disclosed_residue(rct), self.params.scales.s_inv, self.params.q, N
        )
        self.xct, uct, rct = step_encrypted_controller(self.xct, yct, rfb, self.params)
        return uct, rct


def inject_attack(ct: Ciphertext, delta: ZqMatrix) -> Ciphertext:
    """Add the keyless trivial encryption of ``delta`` to ``ct``."""
    if delta.shape != (ct.rows, 1):
        raise DimensionMismatch(f"delta must be {ct.rows} x 1, got {delta.shape}")
    return ct + trivial_ciphertext(delta, ct.N, ct.kind)


@dataclass
class _RefRun:
    y: list[float]
    u: list[float]
    r: list[float]
    xhat: list[np.ndarray]


def reference_run(
    plant: PlantModel,
    ctrl: ObserverController,
    horizon: int,
    attack: AttackSpec | None = None,
    threshold: float = 0.0,
) -> _RefRun:
    """The unencrypted loop, optionally under attack."""
    attack = attack or AttackSpec()
    x = plant.x0.copy()
    ref = ReferenceController(plant, ctrl)
    out = _RefRun([], [], [], [])
    history: list[float] = []
    for t in range(horizon):
        y_true = float(plant.C[0] @ x)
        history.append(y_true)
        y_meas = _attacked_measurement(attack, t, y_true, history, threshold)
        out.xhat.append(ref.xhat.copy())
        u, r = ref.step(y_meas)
        if attack.kind == "output_bias" and attack.active(t):
            u += attack.bias(threshold)
        x, _ = step_plant(plant, x, u)
        out.y.append(y_true)
        out.u.append(u)
        out.r.append(r)
    return out


def _attacked_measurement(
    attack: AttackSpec, t: int, y: float, history: list[float], threshold: float
) -> float:
    if not attack.active(t):
        return y
    if attack.kind == "measurement_bias":
        return y + attack.bias(threshold)
    if attack.kind == "measurement_replay":
        return history[max(t - attack.delay, 0)]
    return y


@dataclass
class Setup:
    """Everything derived from a scenario before the encrypted run starts."""

    realization: IntegerRealization
    params: ScaledParams
    q: int
    threshold: float
    bound: int


def _plaintext_bound(
    cfg: ScenarioConfig, ir: IntegerRealization, runs: Iterable[_RefRun]
) -> int:
    """Worst-case magnitude of any value whose centered lift is taken.

    Those are the disclosed residue, the decrypted input, and the quantized
    measurement and initial state. State entries may wrap around freely.
    """
    sc = cfg.scales
    ints = scaled_integers(ir, cfg.controller, cfg.plant, sc.s_inv)
    unit = sc.output_unit
    bound = 0.0
    for run in runs:
        y_max = max(abs(v) for v in run.y) + max(abs(v) for v in run.r)
        bound = max(
            bound,
            max(abs(v) for v in run.r) / unit,
            max(abs(v) for v in run.u) / unit,
            y_max * sc.L_inv / sc.r,
            max(float(np.max(np.abs(ir.T @ xh))) for xh in run.xhat) * sc.L_inv * sc.s_inv / sc.r,
        )
    return int(np.ceil(bound)) + error_gain(ints, cfg.sigma, cfg.horizon) + sc.L_inv * sc.s_inv**2


def prepare(cfg: ScenarioConfig) -> Setup:
    """Integerize, calibrate the threshold, size q and scale the parameters."""
    cfg.controller.validate(cfg.plant)
    ir = integerize(cfg.plant, cfg.controller, cfg.target)
    calib = reference_run(cfg.plant, cfg.controller, cfg.horizon)
    if cfg.threshold is not None:
        threshold = cfg.threshold
    else:
        threshold = cfg.threshold_factor * max(abs(v) for v in calib.r)
    runs = [calib]
    if cfg.attack.kind != "none":
        runs.append(reference_run(cfg.plant, cfg.controller, cfg.horizon, cfg.attack, threshold))
    bound = _plaintext_bound(cfg, ir, runs)
    q = cfg.q if cfg.q else size_modulus(bound, safety=cfg.safety, min_bits=cfg.q_min_bits)
    params = scale_params(ir, cfg.controller, cfg.plant, cfg.scales, q)
    log.info("q = %d (%.1f bits), plaintext bound %d, threshold %.6g", q, np.log2(q), bound, threshold)
    return Setup(realization=ir, params=params, q=q, threshold=threshold, bound=bound)


def run_scenario(cfg: ScenarioConfig, setup: Setup | None = None) -> SimTrace:
    """Run the encrypted and reference loops side by side for ``cfg.horizon`` steps."""
    setup = setup or prepare(cfg)
    params, q, theta = setup.params, setup.q, setup.threshold
    sc = cfg.scales
    rng = make_rng(cfg.seed)

    # sensor/actuator side: holds the key
    key: SecretKey = keygen(cfg.N, q, cfg.sigma, rng)
    session: EncryptorSession = open_session(key, params.system, rng)
    x0_int = quantize_initial_state(cfg.controller.xhat0, setup.realization, sc, q)
    controller = EncryptedController(params, session.encrypt_initial_state(x0_int))
    detector = AnomalyDetector(sc, q, theta)

    x_enc = cfg.plant.x0.copy()
    x_ref = cfg.plant.x0.copy()
    ref = ReferenceController(cfg.plant, cfg.controller)
    attack = cfg.attack
    bias = attack.bias(theta) if attack.kind in ("measurement_bias", "output_bias") else 0.0
    y_hist: list[float] = []
    yct_hist: list[Ciphertext] = []
    records = []
    for t in range(cfg.horizon):
        active = attack.active(t)

        # reference loop
        y_ref = float(cfg.plant.C[0] @ x_ref)
        y_hist.append(y_ref)
        u_ref, r_ref = ref.step(_attacked_measurement(attack, t, y_ref, y_hist, theta))
        if attack.kind == "output_bias" and active:
            u_ref += bias

        # encrypted loop
        y = float(cfg.plant.C[0] @ x_enc)
        yct = session.encrypt_input(quantize_measurement(y, sc, q))
        yct_hist.append(yct)
        if active and attack.kind == "measurement_bias":
            delta = sc.L_inv * round_half_away(bias / sc.r)
            yct = inject_attack(yct, ZqMatrix.scalar(delta, q))
        elif active and attack.kind == "measurement_replay":
            yct = yct_hist[max(t - attack.delay, 0)]
        uct, rct = controller.step(yct)
        r_disclosed, alarm = detector.observe(rct)
        if active and attack.kind == "output_bias":
            uct = inject_attack(uct, ZqMatrix.scalar(round_half_away(bias / sc.output_unit), q))
        u_enc = restore_input(decrypt_mod(uct, key)[0, 0], sc, q)

        records.append(
            StepRecord(t, y, u_enc, u_ref, r_disclosed, r_ref, alarm, active, y_ref)
        )
        x_enc, _ = step_plant(cfg.plant, x_enc, u_enc)
        x_ref, _ = step_plant(cfg.plant, x_ref, u_ref)

    stats = {"initial_encryptions": int(session.initial_done), "input_encryptions": session.t}
    return SimTrace(records, q, theta, params, setup.realization, stats)
