"""Run configuration: YAML schema, validation, defaults and serialization.

A configuration file has the top-level keys

``task``
    one of :data:`TASKS`.
``seed``
    integer seed for every random draw of the run (default 0).
``output``
    path of the main CSV output (optional; stdout when absent).
``system``
    Hamiltonian source, see :class:`SystemSpec`.
``bath``
    Drude bath, see :class:`BathSpec`.
``propagation``
    HEOM settings, see :class:`PropagationSpec`.
``params``
    task-specific parameters; allowed keys and defaults are in :data:`TASKS`.

Energies are cm^-1, times fs, temperatures K (see :data:`UNITS`). Unknown
keys anywhere are rejected with a :class:`~.errors.ConfigError` naming the
dotted path of the offending key.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigError, InvalidBath
from .model import DrudeBath, SiteHamiltonian, dimer_correlation, dimer_hamiltonian, fmo_hamiltonian

UNITS = {
    "system.site_energies": "cm^-1", "system.couplings": "cm^-1", "system.site8_energy": "cm^-1",
    "system.delta_e": "cm^-1", "system.theta": "rad",
    "bath.reorganization_energy": "cm^-1", "bath.correlation_time": "fs", "bath.temperature": "K",
    "propagation.t_final": "fs", "propagation.dt": "fs",
    "params.time": "fs", "params.j": "cm^-1", "params.j0": "cm^-1", "params.chain_t_final": "fs",
    "params.chain_dt": "fs", "params.temperature": "K", "params.de_min": "cm^-1",
    "params.de_max": "cm^-1", "params.theta_min": "rad", "params.theta_max": "rad",
    "params.t_min": "fs", "params.uphill_rate": "fs^-1",
}

_CHAIN = {"j": 15.0, "j0": 1.0, "spatial_correlation": 0.0, "chain_t_final": 10000.0, "chain_dt": 0.5,
          "chain_save_every": 4, "chain_depth": 4, "chain_matsubara": 0}

TASKS: dict[str, dict[str, Any]] = {
    "icc": {"donor": [1, 2], "acceptor": [3, 4, 5, 6, 7]},
    "dimer-scan": {"theta_min": 0.0, "theta_max": math.pi / 2, "de_min": 0.0, "de_max": 500.0,
                   "steps": 20, "temperature": 300.0, "init": 1},
    "propagate": {"initial_site": 1, "coherences": [[1, 2]]},
    "verify-propagation": {"j0": 1.0, "t_min": 5.0},
    "ratchet-extract-rates": dict(_CHAIN, rate_file="rates.csv"),
    "ratchet-walk": {"rate_file": "rates.csv", "traj": 5000, "time": 1e6},
    "ratchet-asymptotics": {"rate_file": "rates.csv", "time": 1e6},
    "ratchet-scan": dict(_CHAIN, param="tc", values=[25.0, 50.0, 100.0]),
    "fmo-demo": {"depth": 4, "matsubara": 0, "t_final": 1000.0, "save_every": 2},
}


def _err(path, msg):
    return ConfigError(msg, path)


def _check_keys(data, allowed, path):
    if not isinstance(data, dict):
        raise _err(path or "<root>", f"expected a mapping, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            raise _err(f"{path}.{key}" if path else str(key), "unknown key")


def _number(value, path, minimum=None, exclusive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _err(path, f"expected a number, got {value!r}")
    if integer and (not float(value).is_integer()):
        raise _err(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise _err(path, "must be finite")
    if minimum is not None and (value < minimum or (exclusive and value == minimum)):
        raise _err(path, f"must be {'>' if exclusive else '>='} {minimum}, got {value}")
    return int(value) if integer else float(value)


@dataclass
class SystemSpec:
    """Hamiltonian source.

    ``source`` is ``fmo`` (built-in matrix; optional ``include_site8``,
    ``site8_energy`` and 1-based ``sites`` subset), ``inline``
    (``site_energies`` plus symmetric ``couplings`` matrix whose diagonal
    is ignored), ``file`` (``path`` to a YAML file with the inline keys) or
    ``dimer`` (``theta``, ``delta_e``).
    """

    source: str = "fmo"
    include_site8: bool = False
    site8_energy: Optional[float] = None
    sites: Optional[list] = None
    site_energies: Optional[list] = None
    couplings: Optional[list] = None
    path: Optional[str] = None
    theta: Optional[float] = None
    delta_e: Optional[float] = None

    def hamiltonian(self) -> SiteHamiltonian:
        if self.source == "fmo":
            h = fmo_hamiltonian(self.include_site8, self.site8_energy)
        elif self.source == "dimer":
            h = dimer_hamiltonian(self.theta, self.delta_e)
        else:
            energies, couplings = self.site_energies, self.couplings
            if self.source == "file":
                energies, couplings = _read_system_file(self.path)
            m = np.array(couplings, dtype=float)
            np.fill_diagonal(m, energies)
            h = SiteHamiltonian(m)
        if self.sites:
            h = h.subsystem([s - 1 for s in self.sites])
        return h


def _read_system_file(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(str(exc), "system.path") from exc
    _check_keys(data, {"site_energies", "couplings"}, f"{path}")
    if "site_energies" not in data or "couplings" not in data:
        raise ConfigError("file must define site_energies and couplings", "system.path")
    _validate_matrix(data["site_energies"], data["couplings"], f"{path}")
    return data["site_energies"], data["couplings"]


def _validate_matrix(energies, couplings, path):
    if not isinstance(energies, list) or not energies:
        raise _err(f"{path}.site_energies", "expected a nonempty list")
    for i, e in enumerate(energies):
        _number(e, f"{path}.site_energies[{i}]")
    n = len(energies)
    if not isinstance(couplings, list) or len(couplings) != n:
        raise _err(f"{path}.couplings", f"expected a {n}x{n} matrix")
    for i, row in enumerate(couplings):
        if not isinstance(row, list) or len(row) != n:
            raise _err(f"{path}.couplings[{i}]", f"expected {n} entries")
        for k, x in enumerate(row):
            _number(x, f"{path}.couplings[{i}][{k}]")
    m = np.array(couplings, dtype=float)
    if not np.allclose(m, m.T, atol=1e-12, rtol=0):
        raise _err(f"{path}.couplings", "matrix must be symmetric")


def _parse_system(data, path="system") -> SystemSpec:
    data = data or {}
    allowed = set(SystemSpec.__dataclass_fields__)
    _check_keys(data, allowed, path)
    spec = SystemSpec(**data)
    if spec.source not in ("fmo", "inline", "file", "dimer"):
        raise _err(f"{path}.source", f"unknown source {spec.source!r}")
    if not isinstance(spec.include_site8, bool):
        raise _err(f"{path}.include_site8", "expected true or false")
    n_sites = None
    if spec.source == "fmo":
        if spec.include_site8 and spec.site8_energy is None:
            raise _err(f"{path}.site8_energy", "required when include_site8 is true")
        if spec.site8_energy is not None:
            spec.site8_energy = _number(spec.site8_energy, f"{path}.site8_energy")
        n_sites = 8 if spec.include_site8 else 7
    elif spec.source == "inline":
        _validate_matrix(spec.site_energies, spec.couplings, path)
        n_sites = len(spec.site_energies)
    elif spec.source == "file":
        if not isinstance(spec.path, str):
            raise _err(f"{path}.path", "required for source 'file'")
    else:
        if spec.theta is None or spec.delta_e is None:
            raise _err(path, "source 'dimer' needs theta and delta_e")
        spec.theta = _number(spec.theta, f"{path}.theta")
        spec.delta_e = _number(spec.delta_e, f"{path}.delta_e", minimum=0)
        n_sites = 2
    if spec.sites is not None:
        if not isinstance(spec.sites, list) or not spec.sites:
            raise _err(f"{path}.sites", "expected a nonempty list of 1-based site numbers")
        for i, s in enumerate(spec.sites):
            s = _number(s, f"{path}.sites[{i}]", minimum=1, integer=True)
            if n_sites is not None and s > n_sites:
                raise _err(f"{path}.sites[{i}]", f"site {s} out of range 1..{n_sites}")
            spec.sites[i] = s
        if len(set(spec.sites)) != len(spec.sites):
            raise _err(f"{path}.sites", "repeated site")
    return spec


@dataclass
class BathSpec:
    """Drude bath on every site.

    ``spatial_correlation`` is ``null``, a scalar coefficient between the
    two sites of each consecutive pair (1-2, 3-4, ...), or a full matrix.
    """

    reorganization_energy: float = 35.0
    correlation_time: float = 50.0
    temperature: float = 300.0
    spatial_correlation: Any = None

    def drude_bath(self, n_sites: int) -> DrudeBath:
        c = self.spatial_correlation
        if c is None:
            corr = None
        elif isinstance(c, list):
            corr = np.array(c, dtype=float)
        else:
            if n_sites % 2:
                raise ConfigError("scalar correlation needs an even number of sites",
                                  "bath.spatial_correlation")
            corr = dimer_correlation(n_sites // 2, c) if c != 0 else None
        try:
            return DrudeBath(self.reorganization_energy, self.correlation_time, self.temperature, corr)
        except InvalidBath as exc:
            raise ConfigError(str(exc), "bath.spatial_correlation") from exc


def _parse_bath(data, path="bath") -> BathSpec:
    data = data or {}
    _check_keys(data, set(BathSpec.__dataclass_fields__), path)
    spec = BathSpec(**data)
    spec.reorganization_energy = _number(spec.reorganization_energy, f"{path}.reorganization_energy", 0)
    spec.correlation_time = _number(spec.correlation_time, f"{path}.correlation_time", 0, exclusive=True)
    spec.temperature = _number(spec.temperature, f"{path}.temperature", 0, exclusive=True)
    c = spec.spatial_correlation
    if c is not None:
        if isinstance(c, list):
            m = np.array(c, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise _err(f"{path}.spatial_correlation", "expected a square matrix")
            try:
                DrudeBath(site_correlation=m)
            except InvalidBath as exc:
                raise _err(f"{path}.spatial_correlation", str(exc)) from exc
        else:
            c = _number(c, f"{path}.spatial_correlation")
            if not -1 <= c <= 1:
                raise _err(f"{path}.spatial_correlation", "coefficient must lie in [-1, 1]")
            spec.spatial_correlation = c
    return spec


@dataclass
class PropagationSpec:
    t_final: float = 1000.0
    dt: float = 0.5
    depth: int = 8
    matsubara: int = 1
    save_every: int = 2


def _parse_propagation(data, path="propagation") -> PropagationSpec:
    data = data or {}
    _check_keys(data, set(PropagationSpec.__dataclass_fields__), path)
    spec = PropagationSpec(**data)
    spec.t_final = _number(spec.t_final, f"{path}.t_final", 0)
    spec.dt = _number(spec.dt, f"{path}.dt", 0, exclusive=True)
    spec.depth = _number(spec.depth, f"{path}.depth", 1, integer=True)
    spec.matsubara = _number(spec.matsubara, f"{path}.matsubara", 0, integer=True)
    spec.save_every = _number(spec.save_every, f"{path}.save_every", 1, integer=True)
    return spec


_POSITIVE = {"steps", "traj", "time", "chain_t_final", "chain_dt", "chain_save_every", "chain_depth",
             "temperature", "t_final", "depth", "save_every", "j0"}
_INTEGER = {"steps", "traj", "init", "initial_site", "chain_save_every", "chain_depth",
            "chain_matsubara", "depth", "matsubara", "save_every"}


def _parse_params(task, data, path="params") -> dict:
    defaults = TASKS[task]
    data = data or {}
    _check_keys(data, set(defaults), path)
    params = copy.deepcopy(defaults)
    params.update(copy.deepcopy(data))
    for key, value in params.items():
        p = f"{path}.{key}"
        default = defaults[key]
        if isinstance(default, str):
            if not isinstance(value, str):
                raise _err(p, f"expected a string, got {value!r}")
        elif isinstance(default, list):
            if not isinstance(value, list) or not value:
                raise _err(p, "expected a nonempty list")
        else:
            params[key] = _number(value, p, minimum=0 if key in _POSITIVE or key.endswith("matsubara") else None,
                                  exclusive=key in _POSITIVE, integer=key in _INTEGER)
    if task == "dimer-scan" and params["init"] not in (1, 2):
        raise _err(f"{path}.init", "must be 1 or 2")
    if task == "ratchet-scan":
        if params["param"] not in ("tc", "corr"):
            raise _err(f"{path}.param", "must be 'tc' or 'corr'")
        for i, v in enumerate(params["values"]):
            params["values"][i] = _number(v, f"{path}.values[{i}]")
    if "spatial_correlation" in params and not -1 <= params["spatial_correlation"] <= 1:
        raise _err(f"{path}.spatial_correlation", "coefficient must lie in [-1, 1]")
    return params


@dataclass
class RunConfig:
    task: str
    system: SystemSpec = field(default_factory=SystemSpec)
    bath: BathSpec = field(default_factory=BathSpec)
    propagation: PropagationSpec = field(default_factory=PropagationSpec)
    params: dict = field(default_factory=dict)
    output: Optional[str] = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def hamiltonian(self) -> SiteHamiltonian:
        return self.system.hamiltonian()

    def drude_bath(self, n_sites: Optional[int] = None) -> DrudeBath:
        if n_sites is None:
            n_sites = self.hamiltonian().n_sites
        return self.bath.drude_bath(n_sites)


def config_from_dict(data) -> RunConfig:
    if data is None:
        raise ConfigError("empty configuration")
    _check_keys(data, set(RunConfig.__dataclass_fields__), "")
    if "task" not in data:
        raise ConfigError("missing required key", "task")
    task = data["task"]
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {sorted(TASKS)}", "task")
    seed = _number(data.get("seed", 0), "seed", 0, integer=True)
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("expected a path string", "output")
    return RunConfig(task, _parse_system(copy.deepcopy(data.get("system"))),
                     _parse_bath(copy.deepcopy(data.get("bath"))),
                     _parse_propagation(copy.deepcopy(data.get("propagation"))),
                     _parse_params(task, data.get("params")), output, seed)


def parse_config(text: str) -> RunConfig:
    """Parse and validate YAML text; defaults are filled in."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    return config_from_dict(data)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from exc


def serialize_config(config: RunConfig) -> str:
    """YAML text that :func:`parse_config` maps back to an equal config."""
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)
