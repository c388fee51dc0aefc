"""Scenario files (TOML) and the parameter export format.

Scenario schema::

    [plant]                 # required
    A  = [[...], ...]       # n x n
    B  = [[...], ...]       # n x 1
    C  = [[...]]            # 1 x n
    x0 = [...]              # n

    [controller]            # required
    K      = [[...]]        # 1 x n
    L      = [[...], ...]   # n x 1
    xhat0  = [...]          # n
    target = [...]          # optional, n integer char-poly coefficients (default zeros)

    [scales]                # required
    r     = 6.103515625e-05 # quantization step
    s_inv = 4096            # 1/s, positive integer
    L_inv = 16              # 1/L, positive integer

    [crypto]
    N        = 1024
    sigma    = 3.2
    seed     = 0
    q        = 0            # 0 or absent: size from the plaintext bound
    q_min_bits = 47         # lower bound for the sized modulus
    safety   = 4.0

    [run]
    horizon          = 1000 # required
    threshold        = 0.5  # optional; default threshold_factor * max |r| of a clean run
    threshold_factor = 5.0
    epsilon          = 1e-3 # optional; reported against the residue gap

    [attack]                # optional
    kind  = "measurement_bias"   # none | measurement_bias | measurement_replay | output_bias
    start = 500
    stop  = 1000                 # optional
    magnitude = 2.0              # or magnitude_thresholds = 10
    delay = 10                   # replay only

Exported parameters (``write_params``) hold the realization ``T``, ``R``,
``F_int`` and the scaled Z_q matrices under ``[realization]`` and
``[params]``.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from .codec import IntegerRealization, ObserverController, PlantModel, ScaledParams, Scales
from .errors import ConfigError
from .simulation import AttackSpec, ScenarioConfig

__all__ = [
    "load_scenario",
    "parse_scenario",
    "bundled_scenario",
    "params_to_toml",
    "params_from_toml",
]

BUNDLED = ("double_integrator", "double_integrator_attack", "toy")


def _table(doc: dict, name: str, required: bool = True) -> dict:
    if name not in doc:
        if required:
            raise ConfigError(f"missing [{name}] table")
        return {}
    if not isinstance(doc[name], dict):
        raise ConfigError(f"[{name}] must be a table")
    return doc[name]


def _get(table: dict, key: str, where: str, default: Any = ...) -> Any:
    if key in table:
        return table[key]
    if default is ...:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return default


def parse_scenario(doc: dict, seed: int | None = None) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a parsed TOML document."""
    try:
        p = _table(doc, "plant")
        c = _table(doc, "controller")
        s = _table(doc, "scales")
        crypto = _table(doc, "crypto", required=False)
        run = _table(doc, "run")
        att = _table(doc, "attack", required=False)
        plant = PlantModel(
            np.array(_get(p, "A", "plant"), dtype=float),
            np.array(_get(p, "B", "plant"), dtype=float),
            np.array(_get(p, "C", "plant"), dtype=float),
            np.array(_get(p, "x0", "plant"), dtype=float),
        )
        ctrl = ObserverController(
            np.array(_get(c, "K", "controller"), dtype=float),
            np.array(_get(c, "L", "controller"), dtype=float),
            np.array(_get(c, "xhat0", "controller"), dtype=float),
        )
        scales = Scales(
            float(_get(s, "r", "scales")),
            _get(s, "s_inv", "scales"),
            _get(s, "L_inv", "scales"),
        )
        attack = AttackSpec(
            kind=att.get("kind", "none"),
            start=int(att.get("start", 0)),
            stop=att.get("stop"),
            magnitude=att.get("magnitude"),
            magnitude_thresholds=att.get("magnitude_thresholds"),
            delay=int(att.get("delay", 10)),
        )
        target = c.get("target")
        q = crypto.get("q") or None
        return ScenarioConfig(
            plant=plant,
            controller=ctrl,
            scales=scales,
            horizon=int(_get(run, "horizon", "run")),
            N=int(crypto.get("N", 1024)),
            sigma=float(crypto.get("sigma", 3.2)),
            seed=int(crypto.get("seed", 0) if seed is None else seed),
            q=int(q) if q else None,
            q_min_bits=int(crypto.get("q_min_bits", 0)),
            safety=float(crypto.get("safety", 4.0)),
            target=tuple(int(v) for v in target) if target is not None else None,
            threshold=run.get("threshold"),
            threshold_factor=float(run.get("threshold_factor", 5.0)),
            epsilon=run.get("epsilon"),
            attack=attack,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def load_scenario(path: str | Path, seed: int | None = None) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_scenario(doc, seed)


def bundled_scenario(name: str, seed: int | None = None) -> ScenarioConfig:
    """Load one of the scenario files shipped with the package."""
    if name not in BUNDLED:
        raise ConfigError(f"unknown bundled scenario {name!r}; choose from {BUNDLED}")
    ref = resources.files("residue_lwe") / "scenarios" / f"{name}.toml"
    doc = tomli.loads(ref.read_text())
    return parse_scenario(doc, seed)


def params_to_toml(params: ScaledParams, ir: IntegerRealization | None = None) -> str:
    doc: dict[str, Any] = {"params": params.to_dict()}
    if ir is not None:
        doc["realization"] = {
            "T": ir.T.tolist(),
            "R": ir.R.tolist(),
            "F_int": ir.F_int.tolist(),
            "target": list(ir.target),
        }
    return tomli_w.dumps(doc)


def params_from_toml(text: str) -> tuple[ScaledParams, IntegerRealization | None]:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from exc
    params = ScaledParams.from_dict(_table(doc, "params"))
    ir = None
    if "realization" in doc:
        r = doc["realization"]
        ir = IntegerRealization(
            T=np.array(r["T"], dtype=float),
            R=np.array(r["R"], dtype=float),
            F_int=np.array(r["F_int"], dtype=np.int64),
            target=tuple(r["target"]),
        )
    return params, ir
