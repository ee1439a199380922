"""Run configuration: INI-style files, presets, overrides, resolution.

The format is plain ``key = value`` lines under bracketed section headers
([model], [run], optional [sweep]); unknown sections or keys are errors
so typos never pass silently. Times accept an 'fs' or 'au' suffix and are
stored in au.
"""

from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field, replace
from importlib import resources

from .errors import ConfigError
from .model import ModelSpec, bin_count_rule, time_to_au

MODEL_KEYS = {
    "omega0": None,
    "omega_nu": None,
    "s1": None,
    "s2": None,
    "v12": None,
    "omega_c": "resonant",  # default: omega0 + omega_nu
    "kappa": None,
    "coupling": None,
    "sigma": None,
    "delta2": "0.0",
}

RUN_KEYS = {
    "t_final": None,
    "n_bins": "auto",
    "n_vib": "60",
    "dt_record": "1.0",
    "tolerance": "1e-9",
    "initial_state": "photonic",
    "snapshot_stride": "1",
    "vib_energy_times": "",
}

SWEEP_KEYS = ("sigma", "coupling", "kappa", "delta2")

PRESET_NAMES = (
    "fig3a", "fig3c", "fig4a", "fig4c", "fig6",
    "figS1", "figS2", "figS3", "figS4",
)


def parse_time(token: str) -> float:
    """Parse '30 fs', '1240 au', or a bare number (au) into au."""
    parts = token.split()
    try:
        if len(parts) == 1:
            return time_to_au(float(parts[0]), "au")
        if len(parts) == 2:
            return time_to_au(float(parts[0]), parts[1])
    except ValueError as exc:
        raise ConfigError(f"cannot parse time {token!r}") from exc
    raise ConfigError(f"cannot parse time {token!r}")


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from exc


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from exc


@dataclass(frozen=True)
class ResolvedPoint:
    """One fully explicit run: every knob a number, grid snapped."""

    spec: ModelSpec
    n_bins: int
    n_vib: int
    t_final: float
    dt_record: float
    n_steps: int
    tolerance: float
    initial_state: str
    snapshot_stride: int
    vib_energy_times: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration, possibly carrying a sweep grid."""

    spec: ModelSpec
    t_final: float
    n_bins: int | None          # None means the bin-count rule decides
    n_vib: int
    dt_record: float
    tolerance: float
    initial_state: str
    snapshot_stride: int
    vib_energy_times: tuple[float, ...] = ()
    sweep: dict = field(default_factory=dict)

    def sweep_points(self) -> list[dict]:
        """Sorted cartesian product of the sweep lists; [{}] if no sweep."""
        if not self.sweep:
            return [{}]
        keys = [k for k in SWEEP_KEYS if k in self.sweep]
        product = itertools.product(*(sorted(self.sweep[k]) for k in keys))
        return [dict(zip(keys, values)) for values in product]

    def resolve_point(self, point: dict | None = None) -> ResolvedPoint:
        spec = replace(self.spec, **point) if point else self.spec
        if self.t_final <= 0:
            raise ConfigError("t_final must be > 0")
        n_bins = self.n_bins
        if n_bins is None:
            n_bins = bin_count_rule(spec.sigma, self.t_final)
        n_steps = max(1, round(self.t_final / self.dt_record))
        dt_record = self.t_final / n_steps
        return ResolvedPoint(
            spec=spec,
            n_bins=n_bins,
            n_vib=self.n_vib,
            t_final=self.t_final,
            dt_record=dt_record,
            n_steps=n_steps,
            tolerance=self.tolerance,
            initial_state=self.initial_state,
            snapshot_stride=self.snapshot_stride,
            vib_energy_times=self.vib_energy_times,
        )

    def manifest_text(self, version: str) -> str:
        """Round-trippable INI text of this configuration."""
        lines = [f"# polarbin {version}", "", "[model]"]
        s = self.spec
        for key in ("omega0", "omega_nu", "s1", "s2", "v12", "omega_c",
                    "kappa", "coupling", "sigma", "delta2"):
            lines.append(f"{key} = {getattr(s, key)!r}")
        lines += [
            "",
            "[run]",
            f"t_final = {self.t_final!r} au",
            f"n_bins = {'auto' if self.n_bins is None else self.n_bins}",
            f"n_vib = {self.n_vib}",
            f"dt_record = {self.resolve_point().dt_record!r}",
            f"tolerance = {self.tolerance!r}",
            f"initial_state = {self.initial_state}",
            f"snapshot_stride = {self.snapshot_stride}",
            f"vib_energy_times = {', '.join(f'{t!r} au' for t in self.vib_energy_times)}",
        ]
        if self.sweep:
            lines += ["", "[sweep]"]
            for key in SWEEP_KEYS:
                if key in self.sweep:
                    lines.append(
                        f"{key} = {', '.join(repr(v) for v in self.sweep[key])}"
                    )
        return "\n".join(lines) + "\n"


def _read_ini(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), inline_comment_prefixes=("#",)
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return parser


def load_config(
    text: str, overrides: list[str] | None = None
) -> RunConfig:
    """Parse config text, apply 'section.key=value' overrides, validate."""
    parser = _read_ini(text)
    for section in parser.sections():
        if section not in ("model", "run", "sweep"):
            raise ConfigError(f"unknown section [{section}]")

    values = {
        "model": dict(parser["model"]) if parser.has_section("model") else {},
        "run": dict(parser["run"]) if parser.has_section("run") else {},
        "sweep": dict(parser["sweep"]) if parser.has_section("sweep") else {},
    }
    for key in values["model"]:
        if key not in MODEL_KEYS:
            raise ConfigError(f"unknown key [model] {key}")
    for key in values["run"]:
        if key not in RUN_KEYS:
            raise ConfigError(f"unknown key [run] {key}")
    for key in values["sweep"]:
        if key not in SWEEP_KEYS:
            raise ConfigError(f"unknown key [sweep] {key}")

    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(
                f"override {item!r} must look like section.key=value"
            )
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        section, key = section.strip(), key.strip()
        known = {"model": MODEL_KEYS, "run": RUN_KEYS,
                 "sweep": dict.fromkeys(SWEEP_KEYS)}.get(section)
        if known is None:
            raise ConfigError(f"override targets unknown section [{section}]")
        if key not in known:
            raise ConfigError(f"override targets unknown key [{section}] {key}")
        values[section][key] = value.strip()

    model = dict(values["model"])
    for key, default in MODEL_KEYS.items():
        if key not in model:
            if default is None:
                raise ConfigError(f"missing required key [model] {key}")
            model[key] = default
    omega0 = _parse_float("model", "omega0", model["omega0"])
    omega_nu = _parse_float("model", "omega_nu", model["omega_nu"])
    omega_c = (
        omega0 + omega_nu
        if model["omega_c"] == "resonant"
        else _parse_float("model", "omega_c", model["omega_c"])
    )
    spec = ModelSpec(
        omega0=omega0,
        omega_nu=omega_nu,
        s1=_parse_float("model", "s1", model["s1"]),
        s2=_parse_float("model", "s2", model["s2"]),
        v12=_parse_float("model", "v12", model["v12"]),
        omega_c=omega_c,
        kappa=_parse_float("model", "kappa", model["kappa"]),
        coupling=_parse_float("model", "coupling", model["coupling"]),
        sigma=_parse_float("model", "sigma", model["sigma"]),
        delta2=_parse_float("model", "delta2", model["delta2"]),
    )

    run = dict(values["run"])
    for key, default in RUN_KEYS.items():
        if key not in run:
            if default is None:
                raise ConfigError(f"missing required key [run] {key}")
            run[key] = default
    n_bins_raw = run["n_bins"].strip()
    n_bins = None if n_bins_raw == "auto" else _parse_int("run", "n_bins", n_bins_raw)
    if n_bins is not None and n_bins < 1:
        raise ConfigError("n_bins must be >= 1 or 'auto'")
    initial_state = run["initial_state"].strip()
    if initial_state not in ("photonic", "bright", "upper_polariton",
                             "lower_polariton"):
        raise ConfigError(f"unknown initial_state {initial_state!r}")
    vib_times = tuple(
        parse_time(tok.strip())
        for tok in run["vib_energy_times"].split(",")
        if tok.strip()
    )

    sweep = {}
    for key, raw in values["sweep"].items():
        entries = [tok.strip() for tok in raw.split(",") if tok.strip()]
        if entries:
            sweep[key] = tuple(_parse_float("sweep", key, tok) for tok in entries)

    return RunConfig(
        spec=spec,
        t_final=parse_time(run["t_final"]),
        n_bins=n_bins,
        n_vib=_parse_int("run", "n_vib", run["n_vib"]),
        dt_record=_parse_float("run", "dt_record", run["dt_record"]),
        tolerance=_parse_float("run", "tolerance", run["tolerance"]),
        initial_state=initial_state,
        snapshot_stride=_parse_int("run", "snapshot_stride", run["snapshot_stride"]),
        vib_energy_times=vib_times,
        sweep=sweep,
    )


def load_config_file(path, overrides=None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return load_config(text, overrides)


def load_preset(name: str, overrides=None) -> RunConfig:
    if name not in PRESET_NAMES:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    text = (resources.files("polarbin") / "presets" / f"{name}.cfg").read_text()
    return load_config(text, overrides)
