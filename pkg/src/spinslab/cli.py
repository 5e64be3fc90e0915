"""Command-line entry point.

Subcommands: sample, spectrum, dynamics, sense, image, ingest, run.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 malformed or unusable data.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import (
    AnalysisError,
    ConfigurationError,
    ConversionError,
    DomainError,
    FitError,
    InputError,
    NormalizationError,
    NumericalError,
    ParseError,
    ResolutionError,
)
from .profiles import metrics_to_json, parse_profile_file, peak_metrics
from .pulses import PulseSchedule, average_hamiltonian, frequency_comb
from .sampler import InitializationModel, MeanFieldHistogram, SlabEnsemble, mean_field_histogram
from .scenarios import SCENARIOS, _axis, _merge, _synth, emit_report, run_scenario
from .sensing import SensitivityBudget, convention_report, droid_condition
from .spectrum import BroadeningModel, asymmetry_beta, fit_lorentzian

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DATA = 4

_CONFIG_ERRORS = (ConfigurationError, ConversionError, NormalizationError)
_NUMERICAL_ERRORS = (NumericalError, FitError, ResolutionError)
_DATA_ERRORS = (ParseError, InputError, AnalysisError, DomainError)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError("config root must be a JSON object")
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)


SAMPLE_DEFAULTS = {
    "axis": "111",
    "thickness_nm": 17.0,
    "density_ppm_nm": 2.0,
    "lateral_nm": [400.0, 400.0],
    "n_samples": 10_000,
    "density_factor": 1.0,
    "flipped_fraction": 0.0,
    "polarity": "bright",
    "n_bins": 400,
    "clip_mhz": 2.0,
}


def cmd_sample(args) -> int:
    cfg = _merge(SAMPLE_DEFAULTS, _load_config(args.config))
    out = _out_dir(args)
    ensemble = SlabEnsemble(
        axis=_axis(cfg["axis"]),
        lateral_nm=tuple(cfg["lateral_nm"]),
        thickness_nm=cfg["thickness_nm"],
        areal_density_ppm_nm=cfg["density_ppm_nm"],
        rng_seed=args.seed,
        init=InitializationModel(
            flipped_fraction=cfg["flipped_fraction"], polarity=cfg["polarity"]
        ),
    )
    hist = mean_field_histogram(
        ensemble,
        cfg["n_samples"],
        cfg["density_factor"],
        clip_rad_s=2 * np.pi * cfg["clip_mhz"] * 1e6,
        n_bins=cfg["n_bins"],
        jobs=args.jobs,
    )
    hist.to_csv(out / "histogram.csv")
    hist.to_json(out / "histogram.json")
    print(f"sampled {cfg['n_samples']} configurations "
          f"({hist.metadata['spin_count']} spins each, {hist.n_clipped} clipped)")
    print(f"wrote {out / 'histogram.csv'} and {out / 'histogram.json'}")
    return EXIT_OK


SPECTRUM_DEFAULTS = {
    "probe_rabi_khz": 0.97,
    "alpha": 1.0,
    "flipped_fraction": 0.0,
    "polarity": "bright",
    "tau_p_ns": None,  # when set, the decoupled-probe detuning axis is used
}


def cmd_spectrum(args) -> int:
    cfg = _merge(SPECTRUM_DEFAULTS, _load_config(args.config))
    out = _out_dir(args)
    try:
        hist = MeanFieldHistogram.from_json(args.histogram)
    except FileNotFoundError:
        raise InputError(f"histogram file not found: {args.histogram}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"histogram is not valid JSON: {exc}") from None
    model = BroadeningModel(
        probe_rabi_rad_s=2 * np.pi * cfg["probe_rabi_khz"] * 1e3,
        alpha=cfg["alpha"],
        initialization=InitializationModel(
            flipped_fraction=cfg["flipped_fraction"], polarity=cfg["polarity"]
        ),
    )
    schedule = None
    if cfg["tau_p_ns"] is not None:
        schedule = PulseSchedule.from_probe(
            cfg["tau_p_ns"] * 1e-9, model.probe_rabi_rad_s
        )
    spec = _synth(hist, model, schedule=schedule)
    spec.to_csv(out / "spectrum.csv")
    spec.to_json(out / "spectrum.json")
    fit = fit_lorentzian(spec)
    summary = {
        "beta": asymmetry_beta(spec),
        "fit_center_khz": fit.center_khz,
        "fit_fwhm_khz": fit.fwhm_khz,
        "warnings": list(spec.warnings),
    }
    _dump(out / "spectrum_summary.json", summary)
    print(f"beta = {summary['beta']:.4f}, fwhm = {fit.fwhm_khz:.4g} kHz")
    print(f"wrote spectrum files to {out}")
    return EXIT_OK


DYNAMICS_DEFAULTS = {
    "tau_p_ns": 540.0,
    "n_reps": 24,
    "n_teeth": 5,
}


def cmd_dynamics(args) -> int:
    cfg = _merge(DYNAMICS_DEFAULTS, _load_config(args.config))
    out = _out_dir(args)
    schedule = PulseSchedule.matched(cfg["tau_p_ns"] * 1e-9, cfg["n_reps"])
    disorder_avg, interaction_avg = average_hamiltonian(
        schedule, omega_disorder=1.0, omega_nv=1.0
    )
    comb = frequency_comb(schedule, n_teeth=cfg["n_teeth"])
    payload = {
        "tau_p_ns": cfg["tau_p_ns"],
        "n_reps": cfg["n_reps"],
        "probe_rabi_khz": schedule.omega_probe_rad_s / (2 * np.pi * 1e3),
        "comb_spacing_khz": schedule.comb_spacing_hz() / 1e3,
        "comb_offset_khz": schedule.comb_offset_hz() / 1e3,
        "disorder_average_per_unit": disorder_avg,
        "interaction_average_per_unit": interaction_avg,
        "teeth": [
            {
                "index": tooth.index,
                "offset_khz": tooth.offset_hz / 1e3,
                "amplitude": tooth.amplitude,
            }
            for tooth in comb.teeth
        ],
    }
    _dump(out / "dynamics.json", payload)
    print(f"comb spacing {payload['comb_spacing_khz']:.4g} kHz, "
          f"offset {payload['comb_offset_khz']:.4g} kHz")
    print(f"wrote {out / 'dynamics.json'}")
    return EXIT_OK


SENSE_DEFAULTS = {
    "t2_us": 48.0,
    "tau_us": 24.0,
    "t_m_us": 20.4,
    "c_eff": 0.0062,
    "n_spins": 135,
    "stretch_p": 2.0 / 3.0,
    "rho_3d_ppm": None,
    "volume_um3": None,
    "t2_droid_us": None,  # when set, the interaction-decoupling margin is reported
}


def cmd_sense(args) -> int:
    cfg = _merge(SENSE_DEFAULTS, _load_config(args.config))
    out = _out_dir(args)
    budget = SensitivityBudget(
        t2_s=cfg["t2_us"] * 1e-6,
        tau_s=cfg["tau_us"] * 1e-6,
        t_m_s=cfg["t_m_us"] * 1e-6,
        c_eff=cfg["c_eff"],
        n_spins=cfg["n_spins"],
        stretch_p=cfg["stretch_p"],
        rho_3d_ppm=cfg["rho_3d_ppm"],
        volume_um3=cfg["volume_um3"],
    )
    report = convention_report(budget)
    if cfg["t2_droid_us"] is not None:
        cond = droid_condition(budget.t2_s, cfg["t2_droid_us"] * 1e-6)
        report["droid"] = {"favorable": cond.favorable, "margin": cond.margin}
    _dump(out / "sensitivity.json", report)
    print(f"eta (sqrt N) = {report['eta_sqrtN_t_hz']:.4g} T/sqrt(Hz)")
    print(f"wrote {out / 'sensitivity.json'}")
    return EXIT_OK


def cmd_image(args) -> int:
    cfg = _load_config(args.config)
    bundle = run_scenario("si-fig5-imaging", cfg, seed=args.seed,
                          out_dir=args.out, jobs=args.jobs)
    text, _ = emit_report(bundle)
    print(text)
    return EXIT_OK


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    try:
        profile = parse_profile_file(args.file)
    except FileNotFoundError:
        raise InputError(f"profile file not found: {args.file}") from None
    window = tuple(args.window) if args.window else None
    metrics = peak_metrics(profile, window_nm=window)
    metrics_to_json(metrics, out / "peak_metrics.json")
    print(f"peak at {metrics.center_nm:.3g} nm, fwhm {metrics.fwhm_nm:.3g} nm, "
          f"areal density {metrics.areal_density_ppm_nm:.4g} ppm nm")
    print(f"wrote {out / 'peak_metrics.json'}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    bundle = run_scenario(args.scenario, cfg, seed=args.seed,
                          out_dir=args.out, jobs=args.jobs)
    text, machine = emit_report(bundle)
    print(text)
    return EXIT_OK if machine["complete"] else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinslab",
        description="Dipolar spin-ensemble simulation and analysis toolkit.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("sample", help="Monte Carlo mean-field histogram")
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("spectrum", help="synthesize a lineshape from a histogram")
    common(p)
    p.add_argument("histogram", help="histogram JSON produced by 'sample'")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("dynamics", help="decoupling sequence comb and averages")
    common(p)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("sense", help="sensitivity budget report")
    common(p)
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("image", help="dipole field map and contours")
    common(p)
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("ingest", help="depth-profile peak metrics")
    common(p)
    p.add_argument("file", help="delimited depth-profile file")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"),
                   help="depth window in nm")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="execute a named pipeline")
    common(p)
    p.add_argument("scenario", choices=sorted(SCENARIOS))
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
