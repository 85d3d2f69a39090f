"""Command-line front end: ``run``, ``sweep``, ``table`` and ``tomo``.

Settings come from an INI file (sections ``experiment``, ``sources``,
``detectors``, ``sweep``) with command-line flags taking precedence. Every
artifact carries the SHA-256 of the canonical config.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bsm import BELL_OUTCOMES, Outcome, default_table
from .protocol import (
    REPORTED_OUTCOMES,
    Scenario,
    ScenarioKind,
    TruncationBoundExceeded,
    run_teleportation_exact,
    run_teleportation_sampled,
    run_scenario,
)
from .sources import PROBE_STATES, SourceParams, g2_zero, heralded_g2, heralded_input_state
from .tomography import (
    BASES,
    PROCESS_METHOD,
    STATE_METHOD,
    CountRecord,
    MLEConvergenceError,
    chi_from_unitary,
    estimate_process,
    fit_state_mle,
    process_fidelity,
    pure_state_fidelity,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
OUTDIR_ENV = "BOOSTED_TELEPORT_OUTDIR"
FIDELITY_COLUMNS = ("scenario", "input_state", "bsm_outcome", "probability", "fidelity",
                    "fidelity_err", "p_a", "q")
SWEEP_COLUMNS = ("scenario", "lambda", "input_state", "f_psi_plus", "f_psi_minus", "mean_fidelity",
                 "p_a", "q", "g2_heralded", "g2_unheralded")
TOMO_COLUMNS = ("input_state", "basis", "n_plus", "n_minus")


class ConfigError(ValueError):
    pass


def _parse_fanout(value) -> int | None:
    if value is None or str(value).strip().lower() in ("pnr", "none", "inf"):
        return None
    return int(value)


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def parse_range(text: str) -> tuple:
    """``start:stop:n`` (optionally prefixed with ``lambda=``)."""
    if "=" in text:
        key, text = text.split("=", 1)
        if key.strip() != "lambda":
            raise ConfigError(f"only lambda sweeps are supported, got {key!r}")
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"sweep range must look like start:stop:n, got {text!r}")
    try:
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return start, stop, n


@dataclass
class ExperimentConfig:
    scenarios: tuple = ("BQT",)
    ideal: bool = False
    lam: float = 0.1
    bell_scale: float = 1.0
    input_scale: float = 1.0
    ancilla_scale: float = 1.0
    pair_cutoff: int = 4
    cutoff: int = 8
    fanout: int | None = 8
    efficiency: float = 1.0
    group_efficiency: dict = field(default_factory=dict)
    herald_efficiency: float = 1.0
    herald_fanout: int | None = 1
    max_truncation_weight: float = 0.05
    max_chi_projection: float = 0.01
    shots: int = 0
    seed: int = 0
    bootstrap: int = 250
    inputs: tuple = ("zero", "one", "plus", "plus_i")
    ambiguous_correction: str = "I"
    sweep: tuple | None = None
    output_dir: str = "results"
    record_timing: bool = True

    def validate(self) -> "ExperimentConfig":
        try:
            self.scenarios = tuple(ScenarioKind(_canonical_kind(s)).value for s in self.scenarios)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.scenarios:
            raise ConfigError("no scenario given")
        unknown = [i for i in self.inputs if i not in PROBE_STATES]
        if unknown or not self.inputs:
            raise ConfigError(f"unknown inputs {unknown}; choose from {sorted(PROBE_STATES)}")
        if self.shots < 0:
            raise ConfigError("shots must be >= 0")
        if self.bootstrap < 0:
            raise ConfigError("bootstrap must be >= 0")
        if self.max_chi_projection <= 0:
            raise ConfigError("max_chi_projection must be > 0")
        if self.ambiguous_correction not in ("I", "X", "Z", "XZ"):
            raise ConfigError(f"ambiguous_correction must be I, X, Z or XZ, got {self.ambiguous_correction!r}")
        if self.sweep is not None:
            start, stop, n = self.sweep
            if n < 1 or not 0 <= start <= stop < 1:
                raise ConfigError(f"bad sweep range {self.sweep}")
        try:
            for kind in self.scenarios:
                self.scenario(kind)
                if self.sweep is not None:
                    self.scenario(kind, self.sweep[1])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def scenario(self, kind, lam: float | None = None) -> Scenario:
        common = dict(ambiguous_correction=self.ambiguous_correction,
                      max_truncation_weight=self.max_truncation_weight)
        if self.ideal:
            return Scenario.ideal(kind, **common)
        lam = self.lam if lam is None else lam
        return Scenario.build(
            kind, lam, bell_scale=self.bell_scale, input_scale=self.input_scale,
            ancilla_scale=self.ancilla_scale, pair_cutoff=self.pair_cutoff,
            fanout=self.fanout, efficiency=self.efficiency, herald_efficiency=self.herald_efficiency,
            herald_fanout=self.herald_fanout, total_cutoff=self.cutoff,
            group_efficiency=tuple(self.group_efficiency.items()), **common,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenarios"] = list(self.scenarios)
        d["inputs"] = list(self.inputs)
        d["sweep"] = list(self.sweep) if self.sweep is not None else None
        d["group_efficiency"] = dict(sorted(self.group_efficiency.items()))
        return d

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        d = dict(d)
        for key in ("scenarios", "inputs", "sweep"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def _canonical_kind(name: str) -> str:
    lookup = {k.value.lower(): k.value for k in ScenarioKind}
    lookup["sqt_bg"] = ScenarioKind.SQT_BACKGROUND.value
    try:
        return lookup[name.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(lookup)}") from None


def _split_list(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def load_config(path) -> ExperimentConfig:
    """Read an INI file, or the config echo inside a previous run's manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            return ExperimentConfig.from_dict(json.loads(text)["config"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path} is not a run manifest: {exc}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig()
    try:
        _apply_ini(cfg, parser)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def _apply_ini(cfg: ExperimentConfig, parser: configparser.ConfigParser):
    allowed = {
        "experiment": {"scenario", "ideal", "shots", "seed", "bootstrap", "inputs",
                       "ambiguous_correction", "output_dir", "record_timing"},
        "sources": {"lambda", "bell_scale", "input_scale", "ancilla_scale", "pair_cutoff", "cutoff"},
        "detectors": {"fanout", "efficiency", "herald_efficiency", "herald_fanout",
                      "max_truncation_weight", "max_chi_projection"},
        "sweep": {"lambda"},
    }
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in allowed[section] and not (section == "detectors" and key.startswith("eta.")):
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    if parser.has_section("experiment"):
        s = parser["experiment"]
        if "scenario" in s:
            cfg.scenarios = _split_list(s["scenario"])
        if "inputs" in s:
            cfg.inputs = _split_list(s["inputs"])
        for key, conv in (("shots", int), ("seed", int), ("bootstrap", int),
                          ("ambiguous_correction", str), ("output_dir", str)):
            if key in s:
                setattr(cfg, key, conv(s[key]))
        for key in ("ideal", "record_timing"):
            if key in s:
                setattr(cfg, key, _parse_bool(s[key]))
    if parser.has_section("sources"):
        s = parser["sources"]
        if "lambda" in s:
            cfg.lam = float(s["lambda"])
        for key in ("bell_scale", "input_scale", "ancilla_scale"):
            if key in s:
                setattr(cfg, key, float(s[key]))
        for key in ("pair_cutoff", "cutoff"):
            if key in s:
                setattr(cfg, key, int(s[key]))
    if parser.has_section("detectors"):
        s = parser["detectors"]
        for key in ("fanout", "herald_fanout"):
            if key in s:
                setattr(cfg, key, _parse_fanout(s[key]))
        for key in ("efficiency", "herald_efficiency", "max_truncation_weight", "max_chi_projection"):
            if key in s:
                setattr(cfg, key, float(s[key]))
        cfg.group_efficiency = {k[4:]: float(v) for k, v in s.items() if k.startswith("eta.")}
    if parser.has_section("sweep") and "lambda" in parser["sweep"]:
        cfg.sweep = parse_range(parser["sweep"]["lambda"])


def _fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, str):
        return x
    return format(float(x), ".15g")


def _num(x):
    return None if x is None else float(format(float(x), ".15g"))


def _write_text(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, doc: dict):
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, columns, rows, config_hash: str):
    buf = io.StringIO()
    buf.write(f"# config_sha256: {config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    _write_text(path, buf.getvalue())


def _matrix_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex).copy()
    m.real[np.abs(m.real) < 1e-15] = 0.0
    m.imag[np.abs(m.imag) < 1e-15] = 0.0
    return {"real": [[_num(v) for v in row] for row in m.real],
            "imag": [[_num(v) for v in row] for row in m.imag]}


def fidelity_rows(scenario_report) -> list:
    """Per-input, per-outcome rows; undefined outcomes are marked ``ND``."""
    rows = []
    kind = scenario_report.scenario.kind.value
    defined = set(scenario_report.defined)
    for label, rep in scenario_report.reports.items():
        for o in REPORTED_OUTCOMES:
            r = rep.outcomes[o]
            if o is not Outcome.AMBIGUOUS and o not in defined:
                fid = err = "ND"
            else:
                fid = r.fidelity
                err = r.fidelity_err if r.fidelity is not None else None
            rows.append({
                "scenario": kind, "input_state": label, "bsm_outcome": o.value,
                "probability": rep.fraction(o), "fidelity": fid, "fidelity_err": err,
                "p_a": rep.p_a, "q": rep.q,
            })
    return rows


def _summary_entry(sr) -> dict:
    per_input = {
        label: {"p_a": _num(rep.p_a), "mean_fidelity": _num(rep.mean_fidelity), "q": _num(rep.q),
                "diagnostics": {k: _num(v) if not isinstance(v, bool) else v
                                for k, v in sorted(rep.diagnostics.items())}}
        for label, rep in sr.reports.items()
    }
    return {
        "p_a": _num(sr.p_a), "mean_fidelity": _num(sr.mean_fidelity), "q": _num(sr.q),
        "defined_outcomes": [o.value for o in sr.defined],
        "process_fidelity": {o.value: _num(v) for o, v in sr.process_fidelity.items()},
        "inputs": per_input,
        "ambiguous_correction": sr.scenario.ambiguous_correction,
        "table_hash": sr.scenario.table().convention_hash,
    }


def _resolve_outdir(flag: str | None, cfg: ExperimentConfig) -> Path:
    return Path(flag or os.environ.get(OUTDIR_ENV) or cfg.output_dir)


def _prepare_outdir(path: Path):
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {path} is not writable: {exc}") from None


def _scenario_dict(sc: Scenario) -> dict:
    d = asdict(sc)
    d["kind"] = sc.kind.value
    d["group_efficiency"] = dict(sc.group_efficiency)
    d["photon_total"] = sc.photon_total
    return d


def _manifest(cfg: ExperimentConfig, command: str, timings: dict, diagnostics: dict) -> dict:
    doc = {
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "config_sha256": cfg.config_hash(),
        "table_hashes": {k: cfg.scenario(k).table().convention_hash for k in cfg.scenarios},
        "resolved_scenarios": {k: _scenario_dict(cfg.scenario(k)) for k in cfg.scenarios},
        "methods": {"state_tomography": STATE_METHOD if cfg.shots else "exact conditional states",
                    "process_tomography": PROCESS_METHOD},
        "diagnostics": diagnostics,
    }
    if cfg.record_timing:
        doc["timing_seconds"] = {k: round(v, 6) for k, v in timings.items()}
    return doc


def chi_projection_bound(cfg: ExperimentConfig, sr, outcome) -> float:
    """Allowed chi projection distance: the configured bound plus shot noise.

    Reconstructed probe outputs from ``n`` events scatter by about 1/sqrt(n),
    which moves the linearly inverted chi off the physical set by the same order.
    """
    if not cfg.shots:
        return cfg.max_chi_projection
    n_min = min(rep.outcomes[outcome].counts or 0 for rep in sr.reports.values())
    return cfg.max_chi_projection + (3.0 / np.sqrt(n_min) if n_min else np.inf)


def execute_run(cfg: ExperimentConfig, outdir: Path) -> int:
    _prepare_outdir(outdir)
    h = cfg.config_hash()
    reports, timings = {}, {}
    inputs = [PROBE_STATES[i] for i in cfg.inputs]
    for k, kind in enumerate(cfg.scenarios):
        t0 = time.perf_counter()
        reports[kind] = run_scenario(cfg.scenario(kind), cfg.shots, [cfg.seed, k], inputs, cfg.bootstrap)
        timings[kind] = time.perf_counter() - t0
    diagnostics, status = {}, EXIT_OK
    chi_doc = {"config_sha256": h, "scenarios": {}}
    ideal = chi_from_unitary(np.eye(2))
    for kind, sr in reports.items():
        entries = {}
        # recompute the estimates so the raw-vs-projected distance is reported too
        for o in sr.chi:
            outputs = {label: rep.outcomes[o].rho for label, rep in sr.reports.items()}
            est = estimate_process(outputs)
            bound = chi_projection_bound(cfg, sr, o)
            entries[o.value] = {"chi": _matrix_json(est.chi),
                                "process_fidelity": _num(process_fidelity(est.chi, ideal)),
                                "projection_distance": _num(est.projection_distance),
                                "projection_bound": _num(bound)}
            if est.projection_distance > bound:
                diagnostics[f"{kind}:{o.value}:chi_projection_distance"] = _num(est.projection_distance)
                status = EXIT_NUMERICAL
        chi_doc["scenarios"][kind] = entries
    _write_json(outdir / "manifest.json", _manifest(cfg, "run", timings, diagnostics))
    rows = [row for sr in reports.values() for row in fidelity_rows(sr)]
    _write_csv(outdir / "fidelities.csv", FIDELITY_COLUMNS, rows, h)
    _write_json(outdir / "summary.json", {
        "config_sha256": h, "mode": "sampled" if cfg.shots else "exact",
        "scenarios": {k: _summary_entry(sr) for k, sr in reports.items()},
    })
    _write_json(outdir / "chi.json", chi_doc)
    for kind, sr in reports.items():
        print(f"{kind}: p_a={_fmt(sr.p_a)} mean_F={_fmt(sr.mean_fidelity)} q={_fmt(sr.q)}")
    return status


def sweep_rows(cfg: ExperimentConfig) -> list:
    start, stop, n = cfg.sweep
    rows = []
    for k, kind in enumerate(cfg.scenarios):
        for j, lam in enumerate(np.linspace(start, stop, n)):
            lam = float(lam)
            sc = cfg.scenario(kind, lam)
            src = heralded_input_state(PROBE_STATES["zero"], SourceParams(sc.input.lam, sc.input.cutoff))
            idler = [("idler", "H"), ("idler", "V")]
            signal = [("in", "H"), ("in", "V")]
            g2h = heralded_g2(src, idler, signal, sc.herald_efficiency) if sc.input.lam > 0 else None
            g2u = g2_zero(src, signal) if sc.input.lam > 0 else None
            for i, name in enumerate(cfg.inputs):
                q = PROBE_STATES[name]
                if cfg.shots:
                    _, rep = run_teleportation_sampled(q, sc, cfg.shots, [cfg.seed, k, j, i], None, cfg.bootstrap)
                else:
                    rep = run_teleportation_exact(q, sc)
                rows.append({
                    "scenario": kind, "lambda": lam, "input_state": name,
                    "f_psi_plus": rep.outcomes[Outcome.PSI_PLUS].fidelity,
                    "f_psi_minus": rep.outcomes[Outcome.PSI_MINUS].fidelity,
                    "mean_fidelity": rep.mean_fidelity, "p_a": rep.p_a, "q": rep.q,
                    "g2_heralded": g2h, "g2_unheralded": g2u,
                })
    return rows


def execute_sweep(cfg: ExperimentConfig, outdir: Path) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a lambda range (--sweep or [sweep] lambda)")
    if cfg.ideal:
        raise ConfigError("a lambda sweep is meaningless with the ideal preset")
    _prepare_outdir(outdir)
    t0 = time.perf_counter()
    rows = sweep_rows(cfg)
    timings = {"sweep": time.perf_counter() - t0}
    _write_json(outdir / "manifest.json", _manifest(cfg, "sweep", timings, {}))
    _write_csv(outdir / "sweep.csv", SWEEP_COLUMNS, rows, cfg.config_hash())
    print(f"wrote {len(rows)} rows to {outdir / 'sweep.csv'}")
    return EXIT_OK


def read_count_file(path) -> dict:
    """CSV with columns input_state, basis, n_plus, n_minus (``#`` lines ignored)."""
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    except OSError as exc:
        raise OSError(f"cannot read counts {path}: {exc}") from None
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or set(TOMO_COLUMNS) - set(reader.fieldnames):
        raise ConfigError(f"count file needs columns {TOMO_COLUMNS}, got {reader.fieldnames}")
    records = {}
    try:
        for row in reader:
            rec = CountRecord(row["basis"].strip(), int(row["n_plus"]), int(row["n_minus"]))
            records.setdefault(row["input_state"].strip(), []).append(rec)
    except ValueError as exc:
        raise ConfigError(f"bad count row: {exc}") from None
    return records


def execute_tomo(counts_path, outdir: Path) -> int:
    records = read_count_file(counts_path)
    _prepare_outdir(outdir)
    states = {}
    for label, recs in sorted(records.items()):
        present = {r.basis for r in recs if r.total > 0}
        if present != set(BASES):
            raise ConfigError(f"{label}: counts missing for bases {sorted(set(BASES) - present)}")
        fit = fit_state_mle(recs)
        if not fit.converged:
            raise MLEConvergenceError(f"{label}: MLE did not converge")
        entry = {"rho": _matrix_json(fit.rho), "log_likelihood": _num(fit.log_likelihood),
                 "iterations": fit.iterations}
        if label in PROBE_STATES:
            entry["fidelity"] = _num(pure_state_fidelity(fit.rho, PROBE_STATES[label].vector))
        states[label] = (fit.rho, entry)
    digest = hashlib.sha256(Path(counts_path).read_bytes()).hexdigest()
    doc = {"counts_sha256": digest, "states": {k: e for k, (_, e) in states.items()}}
    status = EXIT_OK
    if set(states) >= {"zero", "one", "plus", "plus_i"}:
        est = estimate_process({k: rho for k, (rho, _) in states.items()})
        doc["process"] = {"chi": _matrix_json(est.chi), "projection_distance": _num(est.projection_distance),
                          "process_fidelity": _num(process_fidelity(est.chi, chi_from_unitary(np.eye(2))))}
        if not est.consistent:
            status = EXIT_NUMERICAL
    _write_json(outdir / "tomo.json", doc)
    print(f"reconstructed {len(states)} states into {outdir / 'tomo.json'}")
    return status


def execute_table(kind: str, fanout, include_ancilla: bool, out: str | None) -> int:
    table = default_table(kind, fanout, include_ancilla)
    text = table.to_json()
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        _write_text(Path(out), text + "\n")
    else:
        print(text)
    bell = ", ".join(f"{o.value}->{table.corrections[o]}" for o in BELL_OUTCOMES if o in table.corrections)
    print(f"# {kind} fanout={fanout or 'pnr'}: {len(table.entries)} patterns, "
          f"success={table.success_probability:.12g}, corrections: {bell}", file=sys.stderr)
    return EXIT_OK


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI config or a previous manifest.json")
    p.add_argument("--scenario", help="sqt, bqt, sqt_background (comma-separated for several)")
    p.add_argument("--input", help="comma-separated probe inputs: zero, one, plus, plus_i")
    p.add_argument("--ideal", action="store_true", default=None,
                   help="single-pair sources and lossless number-resolving detectors")
    p.add_argument("--exact", action="store_true", help="exact mode (shots = 0)")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--fanout", help="threshold detectors per group, or 'pnr'")
    p.add_argument("--efficiency", type=float)
    p.add_argument("--herald-efficiency", type=float)
    p.add_argument("--cutoff", type=int, help="total photon cutoff")
    p.add_argument("--pair-cutoff", type=int)
    p.add_argument("--ambiguous-correction", choices=("I", "X", "Z", "XZ"))
    p.add_argument("--bootstrap", type=int)
    p.add_argument("--sweep", help="lambda=start:stop:n")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock timing from the manifest")
    p.add_argument("--out", help=f"output directory (overrides ${OUTDIR_ENV} and the config)")


def build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.scenario:
        cfg.scenarios = _split_list(args.scenario)
    if args.input:
        cfg.inputs = _split_list(args.input)
    if args.ideal:
        cfg.ideal = True
    if args.shots is not None:
        cfg.shots = args.shots
    if args.exact:
        if args.shots:
            raise ConfigError("--exact conflicts with --shots")
        cfg.shots = 0
    for key in ("seed", "lam", "efficiency", "herald_efficiency", "cutoff", "pair_cutoff",
                "ambiguous_correction", "bootstrap"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if args.fanout is not None:
        try:
            cfg.fanout = _parse_fanout(args.fanout)
        except ValueError:
            raise ConfigError(f"bad fanout {args.fanout!r}") from None
    if args.sweep:
        cfg.sweep = parse_range(args.sweep)
    if args.no_timing:
        cfg.record_timing = False
    return cfg.validate()


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boosted-teleport", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_experiment_flags(sub.add_parser("run", help="run scenarios (or a sweep with --sweep)"))
    _add_experiment_flags(sub.add_parser("sweep", help="lambda sweep of fidelity and g2"))
    t = sub.add_parser("table", help="export a classification table as JSON")
    t.add_argument("--kind", default="Boosted", type=str.capitalize, choices=("Standard", "Boosted"))
    t.add_argument("--fanout", default="pnr", help="threshold detectors per group, or 'pnr'")
    t.add_argument("--no-ancilla", action="store_true", help="boosted circuit with the ancilla port empty")
    t.add_argument("--out", help="write to this file instead of stdout")
    m = sub.add_parser("tomo", help="reconstruct states (and chi) from a count file")
    m.add_argument("counts", help="CSV with columns input_state, basis, n_plus, n_minus")
    m.add_argument("--out", help=f"output directory (overrides ${OUTDIR_ENV})")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            if args.command == "table":
                try:
                    fanout = _parse_fanout(args.fanout)
                except ValueError:
                    raise ConfigError(f"bad fanout {args.fanout!r}") from None
                return execute_table(args.kind, fanout, not args.no_ancilla, args.out)
            if args.command == "tomo":
                return execute_tomo(args.counts, Path(args.out or os.environ.get(OUTDIR_ENV) or "results"))
            cfg = build_config(args)
            outdir = _resolve_outdir(args.out, cfg)
            if args.command == "sweep" or cfg.sweep is not None:
                return execute_sweep(cfg, outdir)
            return execute_run(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationBoundExceeded, MLEConvergenceError) as exc:
        print(f"numerical diagnostic: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
