"""Config-driven experiment runner.

An experiment file is an INI document with an ``[experiment]`` section and an
optional ``[sweep]`` section::

    [experiment]
    name = fig_1Dcos
    phantom = F1
    n = 257
    modes = 257
    seed = 0
    methods = IR, EA
    m = 1
    rho = 1
    eps = 1.9

    [sweep]
    lam = 0.01, 0.1, 1, 10, 100

Every combination of the sweep values becomes one run.  Keys of
:class:`ReconstructionConfig` are passed through; the remaining keys are
listed in ``_EXPERIMENT_KEYS``.  Instead of a phantom, ``data = file.csv``
reconstructs user-supplied Fourier samples (see :mod:`nufrecon.io`).

Each run writes into its own directory:

``results.csv``
    experiment, method, parameters, relative_error, jump_window_error
    (deterministic for a given config and seed).
``timings.csv``
    experiment, method, parameters, seconds, stages (wall clock).
``<method>_image.csv/.pgm``, ``<method>_error.csv``, ``<method>_error_log10.pgm``
    reconstruction and pointwise error.
``ea_edges.csv/.pgm``, ``ea_edges.pbm``, ``ea_mask_<axis>.pbm``
    edge map, binary edge map and masks of the edge-adaptive run.
``manifest.json``
    the resolved config, all derived seeds and library versions.

Exit codes: 0 ok, 1 an experiment failed, 2 bad config or unknown preset.
"""
from __future__ import annotations

import argparse
import configparser
import itertools
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import io as nio
from .errors import NumericFailure
from .fourier_model import ForwardOperator, SpatialGrid
from .masking import ideal_edge_map_1d
from .metrics import error_report
from .phantoms import continuous_fourier_samples, get_phantom, rasterize
from .reconstruction import ReconstructionConfig, edge_adaptive_l2, hotv_l1, ir_l1
from .sampling import NO_NOISE, add_noise, jittered_frequencies_1d, jittered_frequencies_2d, subsample

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "expand",
    "stream_seed",
    "prepare_data",
    "run_experiment",
    "run_suite",
    "list_presets",
    "main",
]

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2
METHODS = ("HOTV", "IR", "EA")
RESULT_FIELDS = ("experiment", "method", "parameters", "relative_error", "jump_window_error")
TIMING_FIELDS = ("experiment", "method", "parameters", "seconds", "stages")
SUMMARY_FIELDS = ("preset", "run", "status") + RESULT_FIELDS[1:] + ("seconds",)

_RECON_KEYS = {f.name: f.type for f in fields(ReconstructionConfig)}
_EXPERIMENT_KEYS = ("name", "phantom", "data", "n", "modes", "seed", "snr_db", "keep", "methods", "out", "product")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully specified run.

    ``modes`` is the number of frequencies per axis (``2M+1``); ``keep`` the
    number of samples retained by random subsampling (``None`` keeps all);
    ``snr_db`` is ``inf`` for noise-free data.
    """

    name: str = "experiment"
    phantom: str | None = "F1"
    data: str | None = None
    n: int = 257
    modes: int = 257
    seed: int = 0
    snr_db: float = NO_NOISE
    keep: int | None = None
    methods: tuple = ("IR", "EA")
    product: bool = False
    recon: ReconstructionConfig = field(default_factory=ReconstructionConfig)
    out: str = "out"
    sweep: tuple = ()

    def __post_init__(self):
        if (self.phantom is None) == (self.data is None):
            raise ConfigError("give exactly one of 'phantom' and 'data'")
        if self.phantom is not None:
            try:
                get_phantom(self.phantom)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.n < 3 or self.n % 2 == 0:
            raise ConfigError(f"n must be odd and >= 3, got {self.n}")
        if self.modes < 3 or self.modes % 2 == 0:
            raise ConfigError(f"modes must be odd and >= 3, got {self.modes}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        if self.keep is not None and self.keep < 1:
            raise ConfigError(f"keep must be positive, got {self.keep}")
        if not (np.isposinf(self.snr_db) or np.isfinite(self.snr_db)):
            raise ConfigError(f"snr_db must be finite or inf, got {self.snr_db}")

    @property
    def dims(self) -> int:
        if self.phantom is None:
            return 0
        return get_phantom(self.phantom).dims

    def label(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.sweep) if self.sweep else "base"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recon"] = asdict(self.recon)
        d["snr_db"] = None if np.isposinf(self.snr_db) else self.snr_db
        d["methods"] = list(self.methods)
        d["sweep"] = [list(s) for s in self.sweep]
        return d


def _parse_value(key, raw):
    raw = raw.strip()
    low = raw.lower()
    if key in ("phantom", "data", "keep", "snr_db") and low in ("none", ""):
        return None
    if key == "snr_db" and low in ("inf", "noiseless"):
        return None
    try:
        if key in ("n", "modes", "seed", "keep"):
            return int(raw)
        if key == "snr_db":
            return float(raw)
        if key == "methods":
            return tuple(s.strip().upper() for s in raw.split(",") if s.strip())
        if key == "product":
            return low in ("1", "true", "yes", "on")
        if key in ("name", "phantom", "data", "out"):
            return raw
        if key not in _RECON_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        typ = _RECON_KEYS[key]
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            if "/" in raw:
                a, b = raw.split("/")
                return float(a) / float(b)
            return float(raw)
        if typ in (bool, "bool"):
            return low in ("1", "true", "yes", "on")
        return raw
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def _split_keys(values: dict):
    exp, rec = {}, {}
    for k, v in values.items():
        if k in _EXPERIMENT_KEYS:
            exp[k] = v
        elif k in _RECON_KEYS:
            rec[k] = v
        else:
            raise ConfigError(f"unknown key {k!r}")
    if "snr_db" in exp and exp["snr_db"] is None:
        exp["snr_db"] = NO_NOISE
    if exp.get("data") is not None and "phantom" not in exp:
        exp["phantom"] = None
    return exp, rec


def _build(exp, rec, sweep=()):
    try:
        return ExperimentConfig(recon=ReconstructionConfig(**rec), sweep=tuple(sweep), **exp)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(text_or_path) -> tuple:
    """Parse an experiment file; returns ``(base, sweep)``.

    ``sweep`` maps keys to lists of parsed values.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        p = Path(text_or_path)
        if "\n" not in str(text_or_path) and p.exists():
            cp.read_string(p.read_text(), source=str(p))
        else:
            cp.read_string(str(text_or_path))
    except (configparser.Error, OSError) as exc:
        raise ConfigError(str(exc)) from None
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    values = {k: _parse_value(k, v) for k, v in cp.items("experiment")}
    sweep = {}
    if cp.has_section("sweep"):
        for k, v in cp.items("sweep"):
            if k not in _EXPERIMENT_KEYS and k not in _RECON_KEYS:
                raise ConfigError(f"unknown sweep key {k!r}")
            sweep[k] = [_parse_value(k, s) for s in v.split(",") if s.strip()]
            if not sweep[k]:
                raise ConfigError(f"empty sweep for {k!r}")
    exp, rec = _split_keys(values)
    base = _build(exp, rec)
    return base, sweep


def expand(base: ExperimentConfig, sweep: dict) -> list:
    """All runs of a config: one per combination of sweep values."""
    if not sweep:
        return [base]
    keys = sorted(sweep)
    out = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        exp = {f.name: getattr(base, f.name) for f in fields(base) if f.name not in ("recon", "sweep")}
        rec = asdict(base.recon)
        for k, v in zip(keys, combo):
            (exp if k in _EXPERIMENT_KEYS else rec)[k] = NO_NOISE if (k == "snr_db" and v is None) else v
        out.append(_build(exp, rec, tuple(zip(keys, combo))))
    return out


def stream_seed(seed: int, stream: int) -> int:
    """Independent integer seed for one random stream of an experiment.

    Stream 0 (the jitter) uses ``seed`` itself; noise (1) and subsampling
    (2) draw from ``SeedSequence([seed, stream])``.
    """
    if stream == 0:
        return int(seed)
    return int(np.random.SeedSequence([int(seed), int(stream)]).generate_state(1)[0])


def prepare_data(cfg: ExperimentConfig):
    """``(freqs, data, grid, truth, jump_indices, seeds)`` for a config."""
    seeds = {"jitter": stream_seed(cfg.seed, 0)}
    if cfg.data is not None:
        data = nio.read_fourier_csv(cfg.data)
        freqs = data.freqs
        grid = SpatialGrid.from_size(cfg.n, freqs.dims)
        truth, jumps = None, None
    else:
        ph = get_phantom(cfg.phantom)
        M = (cfg.modes - 1) // 2
        if ph.dims == 1:
            freqs = jittered_frequencies_1d(M, seeds["jitter"])
        else:
            freqs = jittered_frequencies_2d(M, seeds["jitter"], product=cfg.product)
        data = continuous_fourier_samples(ph, freqs)
        grid = SpatialGrid.from_size(cfg.n, ph.dims)
        truth = rasterize(ph, grid)
        jumps = None
        if ph.dims == 1:
            jumps = np.flatnonzero(ideal_edge_map_1d([x for x, _ in ph.jumps()], grid).indicator)
    if not np.isposinf(cfg.snr_db):
        seeds["noise"] = stream_seed(cfg.seed, 1)
        data = add_noise(data, cfg.snr_db, seeds["noise"])
    if cfg.keep is not None and cfg.keep < len(freqs):
        seeds["subsample"] = stream_seed(cfg.seed, 2)
        freqs, data = subsample(freqs, data, cfg.keep, seeds["subsample"])
    return freqs, data, grid, truth, jumps, seeds


_DRIVERS = {"HOTV": hotv_l1, "IR": ir_l1, "EA": edge_adaptive_l2}


def _write_images(out: Path, stem: str, image, truth):
    nio.write_matrix_csv(out / f"{stem}_image.csv", image)
    nio.write_pgm(out / f"{stem}_image.pgm", image)
    if truth is not None:
        err = np.abs(image - truth)
        nio.write_matrix_csv(out / f"{stem}_error.csv", err)
        nio.write_pgm(out / f"{stem}_error_log10.pgm", np.log10(np.maximum(err, 1e-16)), lo=-16.0, hi=0.0)


def _write_edges(out: Path, res):
    from .reconstruction import combined_edge_map
    e = combined_edge_map(res)
    nio.write_matrix_csv(out / "ea_edges.csv", e.values)
    nio.write_pgm(out / "ea_edges.pgm", np.abs(e.values))
    b = res.binary_edges
    bits = np.maximum(*(x.indicator for x in b)) if isinstance(b, tuple) else b.indicator
    nio.write_pbm(out / "ea_edges.pbm", bits)
    masks = res.mask if isinstance(res.mask, tuple) else (res.mask,)
    for axis, mk in zip("xy", masks):
        nio.write_pbm(out / f"ea_mask_{axis}.pbm", 1 - mk.values)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run every method of ``cfg``, write the outputs and return a summary.

    Returns ``{"status": "ok", "rows": [...], "timings": [...]}``; failures
    of individual methods raise.
    """
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    freqs, data, grid, truth, jumps, seeds = prepare_data(cfg)
    op = ForwardOperator(grid, freqs, accel_tolerance=cfg.recon.accel_tolerance)
    params = cfg.label()
    rows, timings = [], []
    for method in cfg.methods:
        res = _DRIVERS[method](data, freqs, grid, cfg.recon, op)
        stem = method.lower()
        _write_images(out, stem, res.image, truth)
        if method == "EA":
            _write_edges(out, res)
        if truth is not None:
            rep = error_report(res.image, truth, jumps, res.total_time)
            row = rep.csv_row(cfg.name, method, params)
            rows.append({k: row[k] for k in RESULT_FIELDS})
        timings.append({"experiment": cfg.name, "method": method, "parameters": params,
                        "seconds": res.total_time,
                        "stages": ";".join(f"{k}={v:.4f}" for k, v in res.stage_times.items())})
    nio.write_rows_csv(out / "results.csv", rows, RESULT_FIELDS)
    nio.write_rows_csv(out / "timings.csv", timings, TIMING_FIELDS)
    manifest = {"config": cfg.to_dict(), "seeds": seeds, "samples": len(freqs),
                "versions": {"nufrecon": __version__, "numpy": np.__version__, "scipy": scipy.__version__}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return {"status": "ok", "rows": rows, "timings": timings}


def list_presets() -> list:
    root = resources.files("nufrecon") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_preset(name: str):
    path = resources.files("nufrecon") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return load_config(path.read_text())


def _run_one(args):
    preset, cfg, out = args
    try:
        res = run_experiment(cfg, out)
        seconds = {t["method"]: t["seconds"] for t in res["timings"]}
        rows = [dict(r, preset=preset, run=cfg.label(), status="ok", seconds=seconds[r["method"]])
                for r in res["rows"]]
        if not rows:
            rows = [{"preset": preset, "run": cfg.label(), "status": "ok"}]
        return rows, False
    except (ArithmeticError, ValueError, OSError, NumericFailure) as exc:
        msg = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
        traceback.print_exc(file=sys.stderr)
        return [{"preset": preset, "run": cfg.label(), "status": msg}], True


def run_suite(presets, out_dir, seed: int | None = None, threads: int = 1):
    """Run presets into ``out_dir/<preset>/<run>`` and write ``summary.csv``.

    Individual failures are recorded in the summary and do not stop the
    suite.  Returns ``(rows, any_failed)``.
    """
    out = Path(out_dir)
    jobs = []
    for name in presets:
        base, sweep = load_preset(name)
        if seed is not None:
            base = replace(base, seed=seed)
        runs = expand(base, sweep)
        for i, cfg in enumerate(runs):
            sub = out / name / (f"run{i:02d}" if len(runs) > 1 else "base")
            jobs.append((name, cfg, sub))
    out.mkdir(parents=True, exist_ok=True)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    rows = [r for rs, _ in results for r in rs]
    failed = any(f for _, f in results)
    nio.write_rows_csv(out / "summary.csv", rows, SUMMARY_FIELDS)
    return rows, failed


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the base seed")
    common.add_argument("--threads", type=int, default=1, help="concurrent runs in a suite")
    p = argparse.ArgumentParser(prog="nufrecon", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one experiment file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (default: 'out' key)")
    s = sub.add_parser("suite", parents=[common], help="run shipped presets")
    s.add_argument("--presets", default="", help="comma-separated preset names, or 'all'")
    s.add_argument("--out", required=True)
    sub.add_parser("presets", help="list shipped presets")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "presets":
            print("\n".join(list_presets()))
            return EXIT_OK
        if args.command == "suite":
            names = [s.strip() for s in args.presets.split(",") if s.strip()]
            if names == ["all"]:
                names = list_presets()
            for n in names:
                load_preset(n)
            rows, failed = run_suite(names, args.out, args.seed, max(1, args.threads))
            for r in rows:
                print(",".join(str(r.get(k, "")) for k in SUMMARY_FIELDS))
            return EXIT_FAILURE if failed else EXIT_OK
        base, sweep = load_config(args.config)
        if args.seed is not None:
            base = replace(base, seed=args.seed)
        runs = expand(base, sweep)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    root = Path(args.out if args.out is not None else base.out)
    failed = False
    for i, cfg in enumerate(runs):
        sub = root / (f"run{i:02d}" if len(runs) > 1 else "")
        rows, bad = _run_one((base.name, cfg, sub))
        failed |= bad
        for r in rows:
            print(",".join(str(r.get(k, "")) for k in SUMMARY_FIELDS))
    return EXIT_FAILURE if failed else EXIT_OK


if __name__ == "__main__":
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    sys.exit(main())
