"""Command-line orchestration: run the standard studies from TOML configs
or built-in presets, writing deterministic CSV/JSON tables and a JSON
experiment record that can be replayed bit-for-bit.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(including a replay mismatch).
"""

import argparse
import importlib.resources
import json
import math
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__
from ._kernels import active_path
from .analytics import (
    NO_NOISE,
    Convention,
    NoiseSpec,
    OUParams,
    fisher_r_scan,
    fisher_with_floor,
    floor_half_max_eps,
    ou_noise_floor,
    p_bessel,
    p_gaussian,
    ramsey_family,
    readout_resolution_threshold,
)
from .errors import ScanFailedError, ValidationError
from .estimation import mle_1d_study, multiparam_study
from .fisherinfo import superres_criterion
from .memoryqubit import (
    build_phase_state,
    correlation_fisher,
    correlation_mc_probability,
    correlation_probability,
    dft_spectrum,
    mean_nonharmonic_probability,
    nonharmonic_probability,
    qft_fisher,
    qft_nonharmonic_mean,
    spectrum_table,
)
from .montecarlo import (
    RunSeed,
    draw_quadratures,
    ou_transition_counts,
    simulate_batch,
    simulate_ou_batch,
)
from .signal import GaussianIID, PulsePlan, TwoToneSignal, plan_for_detuning_product

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Bad or missing configuration value; the message names the field."""


# ---------------------------------------------------------------- config I/O

def parse_config(text):
    """Parse a flat TOML config into a dict."""
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: unparsable TOML ({exc})") from None
    for key, value in cfg.items():
        if isinstance(value, dict):
            raise ConfigError(f"config field {key!r}: nested tables are not supported")
    return cfg


def serialize_config(cfg):
    """Write a flat config dict back to TOML (sorted keys, round-trip exact)."""
    lines = []
    for key in sorted(cfg):
        lines.append(f"{key} = {_toml_value(cfg[key], key)}")
    return "\n".join(lines) + "\n"


def _toml_value(v, key):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return repr(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x, key) for x in v) + "]"
    raise ConfigError(f"config field {key!r}: unsupported type {type(v).__name__}")


def load_preset(name):
    path = importlib.resources.files("superres").joinpath("presets", f"{name}.toml")
    try:
        return parse_config(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"preset: unknown preset {name!r}") from None


def parse_grid(spec, key, log=False):
    """Inclusive grid from 'start:stop:count'; log=True spaces geometrically."""
    try:
        start_s, stop_s, count_s = str(spec).split(":")
        start, stop, count = float(start_s), float(stop_s), int(count_s)
    except ValueError:
        raise ConfigError(f"config field {key!r}: expected start:stop:count") from None
    if count < 2 or stop <= start:
        raise ConfigError(f"config field {key!r}: need stop > start and count >= 2")
    if log:
        if start <= 0:
            raise ConfigError(f"config field {key!r}: log grid needs start > 0")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _get(cfg, key, kind, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"config field {key!r}: required")
        return default
    v = cfg[key]
    try:
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"config field {key!r}: cannot read {v!r}") from None


def _convention(cfg):
    name = _get(cfg, "convention", str, "physical").lower()
    try:
        return Convention(name)
    except ValueError:
        raise ConfigError(
            f"config field 'convention': {name!r} is not 'physical' or 'effective'"
        ) from None


# ------------------------------------------------------------- table output

def format_float(x):
    return f"{x:.17g}"


def write_table(path, fmt, columns, rows, summary=None):
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(
                format_float(v) if isinstance(v, float) else str(v) for v in row
            ))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        payload = {"columns": list(columns), "rows": [list(r) for r in rows]}
        if summary is not None:
            payload["summary"] = summary
        with open(path, "w", newline="") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


def write_record(path, subcommand, cfg, seed, results, wall_clock):
    record = {
        "subcommand": subcommand,
        "config": cfg,
        "master_seed": seed,
        "software_version": __version__,
        "kernel_path": active_path(),
        "wall_clock_s": wall_clock,
        "results": results,
    }
    with open(path, "w", newline="") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------- subcommands

def _signal_and_plan(cfg, omega_r_t_key="omega_r_t"):
    t = _get(cfg, "t", float, 1.0)
    omega_s_t = _get(cfg, "omega_s_t", float, 1000.0 * math.pi)
    omega_r_t = _get(cfg, omega_r_t_key, float)
    sigma_t = _get(cfg, "sigma_t", float)
    delta_s_t = _get(cfg, "delta_s_t", float, TWO_PI)
    signal = TwoToneSignal(
        omega_s=omega_s_t / t, omega_r=omega_r_t / t, amp_model=GaussianIID(sigma_t / t)
    )
    plan = plan_for_detuning_product(signal.omega_s, delta_s_t, t)
    return signal, plan, sigma_t


def run_prob_scan(cfg, seed, threads):
    model = _get(cfg, "model", str, "gaussian")
    sigma_t = _get(cfg, "sigma_t", float, 1.0)
    omega_r_t = _get(cfg, "omega_r_t", float, 0.01)
    grid = parse_grid(_get(cfg, "delta_grid", str), "delta_grid")
    rows = []
    for dst in grid:
        d1, d2 = dst - omega_r_t, dst + omega_r_t
        if model == "gaussian":
            p = p_gaussian(d1, d2, sigma_t)
        elif model == "bessel":
            p = p_bessel(d1, d2, _get(cfg, "omega_amp_t", float, sigma_t))
        else:
            raise ConfigError(f"config field 'model': unknown model {model!r}")
        rows.append((float(dst), float(p)))
    return ("delta_s_t", "p"), rows, {"model": model}, None


def run_fisher_scan(cfg, seed, threads):
    sigma_t = _get(cfg, "sigma_t", float)
    omega_r_t = _get(cfg, "omega_r_t", float)
    grid = parse_grid(_get(cfg, "delta_grid", str), "delta_grid")
    conv = _convention(cfg)
    fi = fisher_r_scan(grid, sigma_t, omega_r_t, t=_get(cfg, "t", float, 1.0),
                       convention=conv)
    rows = [(float(d), float(v)) for d, v in zip(grid, fi)]
    peak = rows[int(np.argmax(fi))]
    summary = {"peak_delta_s_t": peak[0], "peak_fisher": peak[1]}
    return ("delta_s_t", "fisher_r"), rows, summary, None


def run_criterion(cfg, seed, threads):
    family_name = _get(cfg, "family", str, "ramsey")
    if family_name != "ramsey":
        raise ConfigError(f"config field 'family': unknown family {family_name!r}")
    sigma_t = _get(cfg, "sigma_t", float, 1.0)
    delta_s_t = _get(cfg, "delta_s_t", float, TWO_PI)
    conv = _convention(cfg)
    grid = parse_grid(_get(cfg, "grid", str, "1e-4:1e-2:9"), "grid", log=True)
    family = ramsey_family(sigma_t, delta_s_t, convention=conv)
    res = superres_criterion(family, 0, grid)
    summary = {
        "exponent_k": res.exponent_k,
        "limit_fi": res.limit_fi,
        "verdict": bool(res.verdict),
        "exponent_defined": bool(res.exponent_defined),
    }
    rows = [(float(s),) for s in grid]
    return ("separation",), rows, summary, None


def run_mle(cfg, seed, threads):
    t = _get(cfg, "t", float, 1.0)
    n_shots = _get(cfg, "n_shots", int)
    replicates = _get(cfg, "replicates", int)
    conv = _convention(cfg)
    bound_hi = _get(cfg, "omega_r_bound", float, 1.0)
    regimes = {
        "resonant": _get(cfg, "delta_s_t_resonant", float, TWO_PI),
        "off_resonant": _get(cfg, "delta_s_t_off", float, 1.8 * math.pi),
    }
    which = _get(cfg, "regime", str, "both")
    if which != "both":
        if which not in regimes:
            raise ConfigError("config field 'regime': use resonant, off_resonant, or both")
        regimes = {which: regimes[which]}

    rows, summary, counts = [], {}, {}
    for j, (name, dst) in enumerate(sorted(regimes.items())):
        signal, plan, sigma_t = _signal_and_plan({**cfg, "delta_s_t": dst})
        study = mle_1d_study(
            signal, plan, n_shots, replicates,
            RunSeed(seed, stream_index=j * replicates), (0.0, bound_hi / t),
            convention=conv, threads=threads,
        )
        for r, est in enumerate(study.samples["omega_r"]):
            rows.append((name, r, float(est * t)))
        summary[name] = {
            "rmse_omega_r_t": study.rmse["omega_r"] * t,
            "mean_omega_r_t": study.estimates["omega_r"] * t,
        }
        counts[name] = [
            simulate_batch(signal, plan, NO_NOISE, n_shots,
                           RunSeed(seed, stream_index=j * replicates + r),
                           conv, threads).n_ones
            for r in range(min(replicates, 16))
        ]
    return ("regime", "replicate", "omega_r_t_hat"), rows, summary, {"counts": counts}


def run_multiparam(cfg, seed, threads):
    t = _get(cfg, "t", float, 1.0)
    omega_s_t = _get(cfg, "omega_s_t", float, 1000.0 * math.pi)
    sigma_t = _get(cfg, "sigma_t", float)
    omega_r_t = _get(cfg, "omega_r_t", float)
    n_per = _get(cfg, "n_per_detuning", int)
    replicates = _get(cfg, "replicates", int)
    conv = _convention(cfg)
    study = multiparam_study(
        omega_s_t / t, omega_r_t / t, sigma_t / t, n_per, replicates,
        RunSeed(seed), t_target=t, convention=conv, threads=threads,
    )
    rows = []
    for r in range(replicates):
        rows.append((
            r,
            float(study.samples["omega_r"][r] * t),
            float(study.samples["omega_s"][r] * t),
            float(study.samples["sigma"][r] * t),
        ))
    summary = {
        "rmse": {k: v * t for k, v in study.rmse.items()},
        "predicted_delta_omega_r_t": study.predicted_delta_omega_r * t,
        "detunings_t": list(study.detunings_t),
    }
    results = {"rmse_omega_r_t": study.rmse["omega_r"] * t}
    return (
        ("replicate", "omega_r_t_hat", "omega_s_t_hat", "sigma_t_hat"),
        rows, summary, results,
    )


def run_noise_sweep(cfg, seed, threads):
    kind = _get(cfg, "kind", str)
    sigma_t = _get(cfg, "sigma_t", float, 1.0)
    t = _get(cfg, "t", float, 1.0)
    if kind == "floor":
        omega_r_t = _get(cfg, "omega_r_t", float)
        grid = parse_grid(_get(cfg, "eps_grid", str), "eps_grid", log=True)
        conv = Convention(_get(cfg, "convention", str, "effective"))
        rows = [
            (float(e), float(fisher_with_floor(sigma_t, omega_r_t, e, t, conv)))
            for e in grid
        ]
        summary = {"half_max_eps": floor_half_max_eps(sigma_t, omega_r_t, conv)}
        return ("eps", "fisher_r"), rows, summary, None
    if kind == "readout":
        eps_prime = _get(cfg, "readout_eps", float)
        grid = parse_grid(_get(cfg, "omega_r_grid", str), "omega_r_grid", log=True)
        conv = Convention(_get(cfg, "convention", str, "effective"))
        rows = [
            (float(w), float(fisher_with_floor(sigma_t, w, eps_prime, t, conv)))
            for w in grid
        ]
        summary = {"threshold_omega_r_t": readout_resolution_threshold(eps_prime, sigma_t)}
        return ("omega_r_t", "fisher_r"), rows, summary, None
    if kind == "ou":
        gamma_t = _get(cfg, "gamma_t", float, 0.01)
        sigma_n = _get(cfg, "sigma_n", float)
        n_shots = _get(cfg, "n_shots", int, 10**5)
        grid = parse_grid(_get(cfg, "omega_r_grid", str), "omega_r_grid")
        omega_s_t = _get(cfg, "omega_s_t", float, TWO_PI)
        noise = NoiseSpec(ou=OUParams(gamma=gamma_t / t, sigma_n=sigma_n))
        rows, counts = [], []
        for i, wrt in enumerate(grid):
            sig = TwoToneSignal(
                omega_s=omega_s_t / t, omega_r=max(wrt, 1e-12) / t,
                amp_model=GaussianIID(1.0),
            )
            plan = PulsePlan(tau=t, n_pulses=1)
            phases = simulate_ou_batch(sig, plan, noise, n_shots,
                                       RunSeed(seed, stream_index=i), threads=threads)
            p_hat = float(np.mean(np.sin(phases) ** 2))
            n_ones = ou_transition_counts(phases, NO_NOISE, t, RunSeed(seed, stream_index=i))
            rows.append((float(wrt), p_hat, n_ones))
            counts.append(n_ones)
        summary = {"floor_formula": ou_noise_floor(sigma_n, gamma_t / t, t)}
        return ("omega_r_t", "p_hat", "n_ones"), rows, summary, {"counts": counts}
    raise ConfigError(f"config field 'kind': unknown sweep {kind!r}")


def run_qft(cfg, seed, threads):
    n = _get(cfg, "n", int, 8)
    m = _get(cfg, "m", int, 32)
    sigma_tau = _get(cfg, "sigma_tau", float, 1.0)
    omega_s = TWO_PI
    tau = TWO_PI / (n * omega_s)
    total_t = m * TWO_PI / omega_s
    sigma = sigma_tau / tau
    if _get(cfg, "mode", str, "sweep") == "spectrum":
        # single-draw Fourier spectrum: (index, index mod m, probability)
        wrT = _get(cfg, "omega_r_T", float, 0.05)
        sig = TwoToneSignal(omega_s=omega_s, omega_r=wrT / total_t,
                            amp_model=GaussianIID(sigma))
        q = draw_quadratures(sig.amp_model, RunSeed(seed).generator())
        spectrum = dft_spectrum(build_phase_state(q, sig, n, m))
        rows = spectrum_table(spectrum, n, m)
        summary = {"nonharmonic": nonharmonic_probability(spectrum, n, m)}
        return ("index", "index_mod_m", "probability"), rows, summary, None
    draws = _get(cfg, "draws", int, 10**5)
    grid = parse_grid(_get(cfg, "omega_r_T_grid", str, "0.001:0.05:3"), "omega_r_T_grid")
    rows, means = [], []
    for i, wrT in enumerate(grid):
        sig = TwoToneSignal(omega_s=omega_s, omega_r=wrT / total_t,
                            amp_model=GaussianIID(sigma))
        mean = mean_nonharmonic_probability(sig, n, m, draws, RunSeed(seed, stream_index=i))
        rows.append((float(wrT), float(mean),
                     float(qft_nonharmonic_mean(sigma, tau, total_t, wrT / total_t))))
        means.append(float(mean))
    summary = {"fisher_qft": qft_fisher(sigma, tau, total_t)}
    return ("omega_r_T", "mean_nonharmonic", "formula"), rows, summary, {"means": means}


def run_correlation(cfg, seed, threads):
    omega_s_t = _get(cfg, "omega_s_t", float, 40.0 * math.pi)
    total_t = _get(cfg, "T", float, 1.0)
    tau = _get(cfg, "tau", float, 0.3 / (omega_s_t / total_t))
    sigma_tau = _get(cfg, "sigma_tau", float, 1.0)
    draws = _get(cfg, "draws", int, 10**5)
    grid = parse_grid(_get(cfg, "omega_r_T_grid", str, "0.001:0.05:3"), "omega_r_T_grid")
    omega_s = omega_s_t / total_t
    sigma = sigma_tau / tau
    rows, means = [], []
    for i, wrT in enumerate(grid):
        sig = TwoToneSignal(omega_s=omega_s, omega_r=wrT / total_t,
                            amp_model=GaussianIID(sigma))
        p_mc = correlation_mc_probability(sig, tau, total_t, draws,
                                          RunSeed(seed, stream_index=i))
        p_cl = correlation_probability(sigma, tau, total_t, wrT / total_t, omega_s)
        rows.append((float(wrT), float(p_mc), float(p_cl)))
        means.append(float(p_mc))
    summary = {"fisher_correlation": correlation_fisher(sigma, tau, total_t, omega_s)}
    return ("omega_r_T", "p_mc", "p_closed"), rows, summary, {"means": means}


RUNNERS = {
    "prob-scan": run_prob_scan,
    "fisher-scan": run_fisher_scan,
    "mle": run_mle,
    "multiparam": run_multiparam,
    "noise-sweep": run_noise_sweep,
    "qft": run_qft,
    "correlation": run_correlation,
    "criterion": run_criterion,
}

DEFAULT_OUT = {
    "prob-scan": "prob_scan",
    "fisher-scan": "fisher_scan",
    "mle": "mle_study",
    "multiparam": "multiparam_study",
    "noise-sweep": "noise_sweep",
    "qft": "qft_study",
    "correlation": "correlation_study",
    "criterion": "criterion",
}

# CLI flags copied verbatim into the config when given
_FLAG_FIELDS = [
    ("sigma-t", "sigma_t", float),
    ("omega-r-t", "omega_r_t", float),
    ("omega-s-t", "omega_s_t", float),
    ("delta-s-t", "delta_s_t", float),
    ("delta-grid", "delta_grid", str),
    ("grid", "grid", str),
    ("n-shots", "n_shots", int),
    ("replicates", "replicates", int),
    ("family", "family", str),
    ("model", "model", str),
    ("kind", "kind", str),
    ("mode", "mode", str),
    ("convention", "convention", str),
    ("regime", "regime", str),
]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="superres",
        description="Quantum spectral superresolution studies",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--preset", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=1)
        for flag, _, kind in _FLAG_FIELDS:
            p.add_argument(f"--{flag}", type=kind, default=None)
    rec = sub.add_parser("record")
    rec_sub = rec.add_subparsers(dest="action", required=True)
    replay = rec_sub.add_parser("replay")
    replay.add_argument("--in", dest="record_path", required=True)
    replay.add_argument("--threads", type=int, default=1)
    return parser


def assemble_config(args):
    cfg = {}
    if args.preset:
        cfg.update(load_preset(args.preset))
    if args.config:
        try:
            with open(args.config) as fh:
                cfg.update(parse_config(fh.read()))
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config} ({exc})") from None
    for flag, key, _ in _FLAG_FIELDS:
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            cfg[key] = value
    return cfg


def resolve_seed(args, cfg):
    if args.seed is not None:
        return int(args.seed)
    if "seed" in cfg:
        return int(cfg["seed"])
    raise ConfigError(
        "config field 'seed': required (pass --seed or set it in the config; "
        "wall-clock seeding is refused for reproducibility)"
    )


def run_subcommand(name, cfg, seed, threads, out_base, fmt):
    start = time.monotonic()
    columns, rows, summary, results = RUNNERS[name](cfg, seed, threads)
    wall = time.monotonic() - start
    table_path = f"{out_base}.{fmt}"
    write_table(table_path, fmt, columns, rows, summary)
    paths = [table_path]
    if summary is not None and fmt == "csv":
        with open(f"{out_base}.summary.json", "w", newline="") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
        paths.append(f"{out_base}.summary.json")
    if results is not None:
        record_path = f"{out_base}.record.json"
        record_cfg = {**cfg, "seed": seed}
        write_record(record_path, name, record_cfg, seed, results, wall)
        paths.append(record_path)
    return paths


def replay_record(path, threads):
    with open(path) as fh:
        record = json.load(fh)
    name = record["subcommand"]
    if name not in RUNNERS:
        raise ConfigError(f"record: unknown subcommand {name!r}")
    cfg = record["config"]
    seed = record["master_seed"]
    _, _, _, results = RUNNERS[name](cfg, seed, threads)
    stored = json.dumps(record["results"], sort_keys=True)
    fresh = json.dumps(results, sort_keys=True)
    if stored != fresh:
        raise RuntimeError(
            f"replay mismatch for {path}: stored and recomputed results differ"
        )
    return name


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "record":
            name = replay_record(args.record_path, args.threads)
            print(f"replay ok: {name} record reproduced exactly")
            return 0
        cfg = assemble_config(args)
        seed = resolve_seed(args, cfg)
        out_base = args.out or DEFAULT_OUT[args.subcommand]
        if out_base.endswith(".csv") or out_base.endswith(".json"):
            out_base = out_base.rsplit(".", 1)[0]
        paths = run_subcommand(
            args.subcommand, cfg, seed, args.threads, out_base, args.format
        )
        print("wrote " + ", ".join(paths))
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ScanFailedError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
