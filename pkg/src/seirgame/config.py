"""Scenario files: loading, calibration, validation and digests.

A scenario is a TOML (or JSON) document with the sections ``scenario``,
``regions``, ``travel``, ``epidemiology``, ``cost`` and optionally
``initial_state``. ``extends = "other.toml"`` merges another file underneath
(paths are relative to the extending file; bare names also resolve against
the shipped scenarios).

``epidemiology`` takes either calibration inputs (``R0``,
``infectious_days``, ``ifr``, ``latent_days``) or explicit rates (``beta``,
``lam``, ``kappa``, ``gamma``); ``beta_matrix`` may be given directly,
otherwise it is built from ``beta`` and the travel fractions. ``travel`` is
either ``matrix`` or ``stay_fraction``.

Resolving a scenario produces a plain JSON-able dict with every derived
value filled in; its digest is the SHA-256 of the canonical (key-sorted)
JSON encoding, so it does not depend on key order in the source file.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import model_core as mc

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
SHIPPED = ("ny-nj-pa", "ny-nj-pa-demo")


class ScenarioError(mc.ConfigError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


def shipped_scenario(name: str) -> Path:
    stem = name[:-5] if name.endswith(".toml") else name
    path = resources.files("seirgame") / "scenarios" / f"{stem}.toml"
    return Path(str(path))


def _read(path: Path) -> dict:
    text = path.read_text()
    if path.suffix == ".json":
        return json.loads(text)
    return tomllib.loads(text)


def _merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in top.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path) -> dict:
    """Read a scenario file, following ``extends`` chains."""
    path = Path(path)
    if not path.exists() and path.stem in SHIPPED and not path.parent.parts:
        path = shipped_scenario(path.stem)
    if not path.exists():
        raise ScenarioError(str(path), "file not found")
    doc = _read(path)
    parent = doc.pop("extends", None)
    if parent:
        candidate = path.parent / parent
        if not candidate.exists():
            candidate = shipped_scenario(Path(parent).name)
        doc = _merge(load_config(candidate), doc)
    return doc


def _get(doc: dict, dotted: str, default=...):
    node = doc
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is ...:
                raise ScenarioError(dotted, "required field is missing")
            return default
        node = node[part]
    return node


def _number(doc, dotted, default=...):
    val = _get(doc, dotted, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(dotted, f"expected a number, got {val!r}")
    return float(val)


def _vector(doc, dotted, n, default=...):
    val = _get(doc, dotted, default)
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ScenarioError(dotted, f"expected {n} values")
    return arr


def set_path(doc: dict, dotted: str, value) -> None:
    node = doc
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def resolve(doc: dict, overrides: dict | None = None) -> dict:
    """Fill in every derived quantity; raise :class:`ScenarioError` on bad input."""
    doc = copy.deepcopy(doc)
    for key, val in (overrides or {}).items():
        set_path(doc, key, val)

    names = [str(v) for v in _get(doc, "regions.names")]
    pops = _vector(doc, "regions.populations", len(names))
    n = len(names)
    if np.any(pops <= 0):
        raise ScenarioError("regions.populations", "populations must be positive")
    horizon = _number(doc, "scenario.horizon_days")

    allow_outside = bool(_get(doc, "travel.allow_outside", False))
    if "matrix" in doc.get("travel", {}):
        travel = np.asarray(_get(doc, "travel.matrix"), dtype=float)
    else:
        travel = mc.uniform_travel(n, _number(doc, "travel.stay_fraction"))
    try:
        travel = mc.validate_travel(travel, n, allow_outside=allow_outside)
    except mc.ConfigError as err:
        raise ScenarioError("travel.matrix", str(err)) from None

    epi = doc.get("epidemiology", {})
    derived = {}
    if "R0" in epi:
        try:
            cal = mc.calibrate(_number(doc, "epidemiology.R0"),
                               _number(doc, "epidemiology.infectious_days"),
                               _number(doc, "epidemiology.ifr"),
                               _number(doc, "epidemiology.latent_days"))
        except mc.ConfigError as err:
            raise ScenarioError("epidemiology", str(err)) from None
        rates = cal._asdict()
        derived.update(rates)
    else:
        rates = {k: _number(doc, f"epidemiology.{k}")
                 for k in ("beta", "lam", "kappa", "gamma")}
    if "beta_matrix" in epi:
        bm = np.asarray(epi["beta_matrix"], dtype=float)
        if bm.shape != (n, n):
            raise ScenarioError("epidemiology.beta_matrix", f"expected {n}x{n}")
    else:
        bm = mc.build_transmission_matrix(rates["beta"], travel, pops,
                                          allow_outside=allow_outside)
        derived["beta_matrix"] = bm.tolist()

    theta = _number(doc, "epidemiology.theta")
    if not 0 <= theta <= 1:
        raise ScenarioError("epidemiology.theta", "must lie in [0, 1]")

    resolved = {
        "schema_version": SCHEMA_VERSION,
        "scenario": {"name": str(_get(doc, "scenario.name", "unnamed")),
                     "horizon_days": horizon},
        "regions": {"names": names, "populations": pops.tolist()},
        "travel": {"matrix": travel.tolist(), "allow_outside": allow_outside},
        "epidemiology": {
            "beta": rates["beta"], "lam": rates["lam"], "kappa": rates["kappa"],
            "gamma": rates["gamma"], "beta_matrix": bm.tolist(), "theta": theta,
            "sigma_s": _vector(doc, "epidemiology.sigma_s", n).tolist(),
            "sigma_e": _vector(doc, "epidemiology.sigma_e", n).tolist(),
            "v": _number(doc, "epidemiology.v", 0.0),
        },
        "cost": {k: _number(doc, f"cost.{k}", d) for k, d in
                 (("w", ...), ("chi", ...), ("p", ...), ("c", ...), ("a", ...),
                  ("r", 0.0), ("eta", 0.0))},
        "derived": derived,
    }
    for key, val in resolved["cost"].items():
        if val < 0:
            raise ScenarioError(f"cost.{key}", "must be >= 0")
    if "initial_state" in doc:
        x0 = {blk: _vector(doc, f"initial_state.{blk}", n).tolist()
              for blk in ("s", "e", "i")}
        resolved["initial_state"] = x0
        issues = mc.check_state(initial_state(resolved), n)
        if issues:
            raise ScenarioError("initial_state", "; ".join(issues))
    if "solver" in doc:
        resolved["solver"] = dict(doc["solver"])
    try:
        build_params(resolved)
    except mc.ConfigError as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError("epidemiology", str(err)) from None
    return resolved


def build_params(resolved: dict) -> mc.ModelParams:
    ep, cp = resolved["epidemiology"], resolved["cost"]
    return mc.make_params(
        resolved["regions"]["populations"], ep["beta_matrix"],
        gamma=ep["gamma"], lam=ep["lam"], kappa=ep["kappa"], theta=ep["theta"],
        sigma_s=ep["sigma_s"], sigma_e=ep["sigma_e"], v=ep["v"],
        w=cp["w"], chi=cp["chi"], p=cp["p"], c=cp["c"], a=cp["a"], r=cp["r"],
        eta=cp["eta"], horizon=resolved["scenario"]["horizon_days"],
        names=resolved["regions"]["names"], beta=ep["beta"],
        travel=resolved["travel"]["matrix"])


def initial_state(resolved: dict) -> np.ndarray:
    if "initial_state" not in resolved:
        raise ScenarioError("initial_state", "required field is missing "
                            "(the initial state has no default)")
    x0 = resolved["initial_state"]
    return np.concatenate([np.asarray(x0[b], dtype=float) for b in ("s", "e", "i")])


def digest(resolved: dict) -> str:
    """SHA-256 of the model part of a resolved scenario.

    The optional ``solver`` table is left out: it changes how a profile is
    trained, not which game it belongs to.
    """
    model = {k: v for k, v in resolved.items() if k != "solver"}
    canon = json.dumps(model, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class Scenario:
    resolved: dict
    params: mc.ModelParams
    digest: str

    @property
    def x0(self) -> np.ndarray:
        return initial_state(self.resolved)

    @property
    def has_x0(self) -> bool:
        return "initial_state" in self.resolved


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    resolved = resolve(load_config(path), overrides)
    return Scenario(resolved, build_params(resolved), digest(resolved))
