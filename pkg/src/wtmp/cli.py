"""Command-line harness.

Subcommands ``synth``, ``estimate``, ``transform``, ``predict``,
``evaluate`` and ``figure`` read one JSON run configuration (version 1),
optionally layered on a named preset, and write CSV/JSON/binary outputs
plus a manifest into ``--out``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

import argparse
import dataclasses
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as wio
from .channel import (ArrayGeometry, ScenarioConfig, generate_scenario,
                      observe_record, synthesize_record)
from .estimation import build_dictionary, default_grid, omp_estimate
from .evaluation import (BASELINES, SEExperiment, antenna_sweep, distance_sweep,
                         prediction_error, prediction_error_db, run_trials,
                         transform_nmse)
from .numerics import NumericalError
from .predictor import PencilConfig, run_pipeline
from .tfproj import TFDictionary
from .transform import build_transform

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
CONFIG_VERSION = 1
FIGURES = (2, 3, 4, 5, 6, 7)


class ConfigError(ValueError):
    pass


@dataclass
class GeometrySection:
    n_h: int = 1
    n_v: int = 64
    f_c: float = 39e9
    spacing: float = 0.5  # in wavelengths


@dataclass
class ScenarioSection:
    delta_f: float = 30e3
    n_f: int = 12
    T: float = 0.5e-3
    n_s: int = 16
    f_1: float = None
    noise_snr_db: float = None
    n_ports: int = 2


@dataclass
class GeneratorSection:
    n_clusters: int = 2
    rays_per_cluster: int = 2
    distance_range: list = field(default_factory=lambda: [10.0, 40.0])
    angular_spreads: dict = None
    speed: float = 1.5
    distance_spread: float = 0.0


@dataclass
class AlgorithmSection:
    grid_counts: list = field(default_factory=lambda: [30, 90, 36])
    gamma1: float = 0.99
    pencil_size: int = None
    variant: str = "standard"
    n_predict: int = 8
    max_paths: int = 8
    residual_tol: float = 0.05
    use_transform: bool = True
    model_order: int = None
    dictionary_cap_bytes: int = 1 << 30


@dataclass
class ExperimentSection:
    n_seeds: int = 20
    se: dict = field(default_factory=dict)  # SEExperiment overrides
    n_t_values: list = field(default_factory=lambda: [32, 64, 128, 256])
    distances: list = field(default_factory=lambda: [30.0, 60.0, 120.0, 240.0])


@dataclass
class RunConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    algorithm: AlgorithmSection = field(default_factory=AlgorithmSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    paths: list = None
    seed: int = 0

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["version"] = CONFIG_VERSION
        return d


_SECTIONS = {"geometry": GeometrySection, "scenario": ScenarioSection,
             "generator": GeneratorSection, "algorithm": AlgorithmSection,
             "experiment": ExperimentSection}

PRESETS = {
    "desk": {},
    "paper": {
        "geometry": {"n_h": 2, "n_v": 256},
        "scenario": {"n_s": 25},
        "generator": {"n_clusters": 9, "rays_per_cluster": 20,
                      "distance_range": [10.0, 40.0]},
        "algorithm": {"grid_counts": [30, 900, 360], "n_predict": 32},
        "experiment": {"se": {"n_h": 2, "n_v": 256, "n_ue": 16, "n_clusters": 9,
                              "rays_per_cluster": 20,
                              "grid_counts": [30, 900, 360]}},
    },
}


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "se":
            out[k] = _merge(out[k], v)
        elif k == "se" and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def parse_config(doc):
    """Validate a config mapping and build a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    doc = dict(doc)
    version = doc.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    allowed = set(_SECTIONS) | {"paths", "seed"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        sec = doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"section {name!r} must be an object")
        names = {f.name for f in dataclasses.fields(cls)}
        bad = set(sec) - names
        if bad:
            raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
        kwargs[name] = cls(**sec)
    se_fields = {f.name for f in dataclasses.fields(SEExperiment)}
    bad = set(kwargs["experiment"].se) - se_fields
    if bad:
        raise ConfigError(f"unknown keys in experiment.se: {sorted(bad)}")
    rc = RunConfig(**kwargs, paths=doc.get("paths"), seed=int(doc.get("seed", 0)))
    _validate(rc)
    return rc


def _validate(rc):
    g, s, a = rc.geometry, rc.scenario, rc.algorithm
    checks = [
        (g.n_h >= 1 and g.n_v >= 1, "array dimensions must be positive"),
        (g.spacing > 0 and g.f_c > 0, "spacing and carrier must be positive"),
        (s.n_f >= 1 and s.n_s >= 3 and s.T > 0 and s.delta_f > 0, "invalid sampling"),
        (s.n_ports in (1, 2), "n_ports must be 1 or 2"),
        (0 < a.gamma1 <= 1, "gamma1 must lie in (0, 1]"),
        (a.variant in ("standard", "difference"), "variant must be standard or difference"),
        (a.n_predict >= 0, "n_predict must be >= 0"),
        (len(a.grid_counts) == 3 and min(a.grid_counts) >= 1, "grid_counts needs 3 counts"),
        (len(rc.generator.distance_range) == 2
         and 0 < rc.generator.distance_range[0] <= rc.generator.distance_range[1],
         "distance_range must be [min, max] with 0 < min <= max"),
        (rc.experiment.n_seeds >= 1, "n_seeds must be >= 1"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    for n in (g.n_h, g.n_v):
        if n > 1 and n % 2:
            raise ConfigError("array dimensions must be 1 or even")


def load_config(path=None, preset="desk", overrides=None):
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    doc = _merge({}, PRESETS[preset])
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("configuration must be a JSON object")
        doc = _merge(doc, user)
    if overrides:
        doc = _merge(doc, overrides)
    return parse_config(doc)


# -- scenario plumbing ---------------------------------------------------

def build_geometry(rc):
    g = rc.geometry
    lam = 299_792_458.0 / g.f_c
    return ArrayGeometry(g.n_h, g.n_v, g.spacing * lam, g.spacing * lam, lam)


def build_scenario(rc):
    s = rc.scenario
    cfg = ScenarioConfig(rc.geometry.f_c, s.delta_f, s.n_f, s.T, s.n_s, f_1=s.f_1,
                         noise_snr_db=s.noise_snr_db, seed=rc.seed)
    geom = build_geometry(rc)
    if rc.paths is not None:
        try:
            paths = [wio.path_from_dict(d) for d in rc.paths]
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"invalid path entry: {exc}") from exc
    else:
        gen = rc.generator
        paths = generate_scenario(rc.seed, gen.n_clusters, gen.rays_per_cluster,
                                  tuple(gen.distance_range), gen.angular_spreads,
                                  gen.speed, wavelength=geom.wavelength,
                                  n_ports=s.n_ports, distance_spread=gen.distance_spread)
    return geom, cfg, paths


def _horizon(rc):
    return rc.scenario.n_s + rc.algorithm.n_predict


def synth_records(rc, geom, cfg, paths):
    times = np.arange(1, _horizon(rc) + 1) * cfg.T
    n_ports = min(rc.scenario.n_ports, len(paths[0].gains))
    return [synthesize_record(geom, cfg, paths, times, v) for v in range(n_ports)]


def _pencil(rc):
    a = rc.algorithm
    return PencilConfig(a.pencil_size, a.n_predict, a.variant, a.gamma1, a.model_order)


def _dictionary(rc, geom):
    grid = default_grid(geom, tuple(rc.generator.distance_range),
                        counts=tuple(rc.algorithm.grid_counts))
    return build_dictionary(geom, grid, rc.algorithm.dictionary_cap_bytes)


def _observed(rc, rec):
    rng = np.random.default_rng([rc.seed, 99])
    return observe_record(rec[:rc.scenario.n_s], rc.scenario.noise_snr_db, rng)


# -- commands ------------------------------------------------------------

def cmd_synth(rc, out):
    geom, cfg, paths = build_scenario(rc)
    recs = synth_records(rc, geom, cfg, paths)
    files = []
    for v, rec in enumerate(recs):
        f = out / f"channel_port{v}.bin"
        wio.write_channel_dump(f, rec)
        files.append(f.name)
    wio.save_scenario(out / "scenario.json", geom, cfg, paths)
    wio.write_manifest(out / "manifest.json", rc.to_dict(), [rc.seed], command="synth",
                       files=files, n_paths=len(paths),
                       dims=list(recs[0].shape))
    print(f"wrote {len(files)} channel dumps, {len(paths)} paths, dims {recs[0].shape}")


def _estimate(rc, geom, rec):
    a = rc.algorithm
    return omp_estimate(_observed(rc, rec)[-1][:, 0], _dictionary(rc, geom),
                        a.max_paths, a.residual_tol)


def cmd_estimate(rc, out):
    geom, cfg, paths = build_scenario(rc)
    rec = synth_records(rc, geom, cfg, paths)[0]
    est = _estimate(rc, geom, rec)
    wio.write_csv(out / "estimates.csv", ["order", "theta_rad", "phi_rad", "r_m"],
                  est.records())
    wio.write_manifest(out / "manifest.json", rc.to_dict(), [rc.seed],
                       command="estimate", p_hat=est.p_hat)
    print(f"p_hat={est.p_hat} residual={est.residual_norm:.3e}")


def cmd_transform(rc, out):
    geom, cfg, paths = build_scenario(rc)
    rec = synth_records(rc, geom, cfg, paths)[0]
    est = _estimate(rc, geom, rec)
    bn = build_transform(est, geom)
    wio.write_csv(out / "transform.csv", ["index", "phase_rad"], bn.phases())
    t = [rc.scenario.n_s * cfg.T]
    h = synthesize_record(geom, cfg, paths, t)
    hp = synthesize_record(geom, cfg, paths, t, model="plane")
    w, wo = transform_nmse(h, hp, bn)
    summary = {"p_hat": est.p_hat, "nmse_with": w, "nmse_without": wo}
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    wio.write_manifest(out / "manifest.json", rc.to_dict(), [rc.seed],
                       command="transform")
    print(json.dumps(summary))


def cmd_predict(rc, out, input_path=None):
    geom, cfg, paths = build_scenario(rc)
    if input_path is not None:
        rec = wio.read_channel_dump(input_path)
        if rec.shape[1:] != (geom.n_t, cfg.n_f) or rec.shape[0] < rc.scenario.n_s:
            raise ConfigError(f"dump dims {rec.shape} do not match the configuration")
    else:
        rec = synth_records(rc, geom, cfg, paths)[0]
    a = rc.algorithm
    obs = _observed(rc, rec)
    snap, est = run_pipeline(obs, geom, TFDictionary(cfg), _pencil(rc),
                             _dictionary(rc, geom), use_transform=a.use_transform,
                             max_paths=a.max_paths, residual_tol=a.residual_tol)
    target = rc.scenario.n_s + a.n_predict - 1
    summary = {"variant": a.variant, "p_hat": est.p_hat, "t": snap.t,
               "flags": list(snap.flags)}
    rows = []
    if target < rec.shape[0]:
        truth = rec[target]
        summary["error"] = prediction_error(snap.H, truth)
        summary["error_db"] = prediction_error_db(snap.H, truth)
        rows += [("truth", snap.t, k, n, truth[n, k].real, truth[n, k].imag)
                 for k in range(cfg.n_f) for n in range(geom.n_t)]
    rows += [("prediction", snap.t, k, n, snap.H[n, k].real, snap.H[n, k].imag)
             for k in range(cfg.n_f) for n in range(geom.n_t)]
    wio.write_csv(out / "prediction.csv",
                  ["series", "t", "n_f", "antenna", "re", "im"], rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    wio.write_manifest(out / "manifest.json", rc.to_dict(), [rc.seed],
                       command="predict", input=str(input_path) if input_path else None)
    print(json.dumps(summary))


def _se_experiment(rc, **extra):
    kw = dict(rc.experiment.se)
    kw.setdefault("variant", rc.algorithm.variant)
    kw.update(extra)
    for k in ("distance_range", "snr_db", "grid_counts"):
        if k in kw:
            kw[k] = tuple(kw[k])
    return SEExperiment(**kw)


def _seeds(rc):
    return list(range(rc.seed, rc.seed + rc.experiment.n_seeds))


def _write_se(out, res, name):
    rows = [(k, a, m, e, n) for k, r in res.items() for a, m, e, n in r.rows()]
    wio.write_csv(out / name, ["baseline", "snr_db", "mean_se", "stderr", "n"], rows)
    return rows


def cmd_evaluate(rc, out):
    exp = _se_experiment(rc)
    seeds = _seeds(rc)
    res, err = run_trials(exp, seeds, BASELINES, workers=_workers())
    _write_se(out, res, "se.csv")
    wio.write_csv(out / "prediction_error.csv", ["baseline", "mean_error", "n"],
                  [(k, float(np.mean(v)), len(v)) for k, v in err.items()])
    wio.write_manifest(out / "manifest.json", rc.to_dict(), seeds, command="evaluate",
                       experiment=exp.to_dict())
    print(f"wrote se.csv for {len(seeds)} seeds")


# Figure ids map to desk-scale sweeps: 2 = SE vs SNR, 3 = error vs array
# size, 4 = SE vs SNR with noisy observations, 5 = SE vs SNR at close range,
# 6 = transform NMSE vs distance, 7 = SE vs SNR with the difference pencil.
_SE_FIGURES = {2: {}, 4: {"obs_snr_db": 20.0},
               5: {"distance_range": (4.0, 8.0)}, 7: {"variant": "difference"}}


def cmd_figure(rc, out, fig_id):
    seeds = _seeds(rc)
    name = f"figure{fig_id}.csv"
    if fig_id in _SE_FIGURES:
        exp = _se_experiment(rc, **_SE_FIGURES[fig_id])
        res, _ = run_trials(exp, seeds, BASELINES, workers=_workers())
        _write_se(out, res, name)
        extra = {"experiment": exp.to_dict()}
    elif fig_id == 3:
        r = antenna_sweep(rc.experiment.n_t_values, seeds)
        wio.write_csv(out / name, ["n_t", "mean_error", "stderr", "n"], r.rows())
        extra = {}
    elif fig_id == 6:
        w, wo = distance_sweep(rc.experiment.distances, seeds)
        rows = [(s, a, m, e, n) for s, r in (("with", w), ("without", wo))
                for a, m, e, n in r.rows()]
        wio.write_csv(out / name, ["series", "r_m", "mean_nmse", "stderr", "n"], rows)
        extra = {}
    else:
        raise ConfigError(f"figure id must be one of {FIGURES}")
    wio.write_manifest(out / "manifest.json", rc.to_dict(), seeds,
                       command="figure", figure=fig_id, **extra)
    print(f"wrote {name}")


def _workers():
    try:
        return max(1, int(os.environ.get("WTMP_THREADS", "1")))
    except ValueError:
        return 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, default=Path("wtmp_out"))
    common.add_argument("--variant", choices=("standard", "difference"))
    p = argparse.ArgumentParser(prog="wtmp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("synth", "estimate", "transform", "evaluate"):
        sub.add_parser(name, parents=[common])
    pr = sub.add_parser("predict", parents=[common])
    pr.add_argument("--input", type=Path, help="channel dump to predict from")
    fg = sub.add_parser("figure", parents=[common])
    fg.add_argument("--id", type=int, required=True, choices=FIGURES, dest="fig_id")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.variant is not None:
            over["algorithm"] = {"variant": args.variant}
        rc = load_config(args.config, args.preset, over)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "predict":
            if args.input is not None and not args.input.exists():
                raise FileNotFoundError(f"input file {args.input} does not exist")
            cmd_predict(rc, args.out, args.input)
        elif args.command == "figure":
            cmd_figure(rc, args.out, args.fig_id)
        else:
            {"synth": cmd_synth, "estimate": cmd_estimate, "transform": cmd_transform,
             "evaluate": cmd_evaluate}[args.command](rc, args.out)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, MemoryError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
