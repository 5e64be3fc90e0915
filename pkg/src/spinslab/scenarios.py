"""Named, seeded analysis pipelines and their result bundles.

Every scenario takes a configuration dict (validated against per-scenario
defaults), runs the relevant modules, writes plot-ready CSV/JSON files plus
a manifest, and returns a result bundle.  Identical configuration and seed
give byte-identical numeric outputs at any parallelism level.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from ._version import __version__
from .dipolar import MAGIC_001, NORMAL_111, SpinAxis
from .errors import ConfigurationError, ResolutionError
from .imaging import (
    MagneticDipole,
    SensorPlane,
    contours_to_json,
    extract_contours,
    field_map,
    particle_moment,
    quench_mask,
)
from .profiles import TrendDataset, weighted_linreg
from .pulses import PulseSchedule
from .sampler import (
    InitializationModel,
    SlabEnsemble,
    asymmetry_about_zero,
    bootstrap_se,
    histogram_sign_fraction,
    mean_field_histogram,
    mean_field_samples,
)
from .sensing import SensitivityBudget, convention_report
from .spectrum import (
    RAD_S_TO_KHZ,
    BroadeningModel,
    asymmetry_beta,
    fit_lorentzian,
    synthesize_spectrum,
)

_AXES = {"111": NORMAL_111, "001": MAGIC_001}


def _axis(name) -> SpinAxis:
    if isinstance(name, (list, tuple)):
        return SpinAxis.from_direction(name)
    try:
        return _AXES[str(name)]
    except KeyError:
        raise ConfigurationError(
            f"axis must be '111', '001', or a 3-vector; got {name!r}"
        ) from None


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = dict(defaults)
    for key, value in (override or {}).items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigurationError(f"unknown config field: {where}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)


# Published per-sample defaults: slab thicknesses, spin densities (areal,
# ppm nm, already the post-processing values), and sequence parameters.
SAMPLE_C = {
    "axis": "111",
    "thickness_nm": 17.0,
    "density_ppm_nm": 8.0,
    "tau_p_ns": 540.0,
    "probe_rabi_khz": 0.97,
}
SAMPLE_D = {
    "axis": "001",
    "thickness_nm": 8.8,
    "density_ppm_nm": 19.0,
    "tau_p_ns": 1032.0,
    "probe_rabi_khz": 0.75,
}


def _ensemble(block: dict, seed: int, polarity="bright", flipped=0.0) -> SlabEnsemble:
    return SlabEnsemble(
        axis=_axis(block["axis"]),
        lateral_nm=tuple(block["lateral_nm"]),
        thickness_nm=block["thickness_nm"],
        areal_density_ppm_nm=block["density_ppm_nm"],
        rng_seed=seed,
        init=InitializationModel(flipped_fraction=flipped, polarity=polarity),
    )


FIG1F_DEFAULTS = {
    "n_samples": 100_000,
    "density_factor": 1.0,
    "n_bins": 400,
    "clip_mhz": 2.0,
    "ensembles": {
        "111": {"axis": "111", "thickness_nm": 17.0, "density_ppm_nm": 2.0,
                 "lateral_nm": [400.0, 400.0]},
        # The magic-angle layer is taken at zero thickness: in-plane the
        # angular factor is sin(2 phi), exactly symmetric, so the histogram
        # asymmetry is a pure Monte Carlo statistic.
        "001": {"axis": "001", "thickness_nm": 0.0, "density_ppm_nm": 2.0,
                 "lateral_nm": [400.0, 400.0]},
    },
}


def run_fig1f(config: dict, seed: int, out: Path, jobs: int = 1) -> dict:
    cfg = _merge(FIG1F_DEFAULTS, config)
    clip = 2 * np.pi * cfg["clip_mhz"] * 1e6
    results = {}
    for label, block in cfg["ensembles"].items():
        ens = _ensemble(block, seed)
        hist = mean_field_histogram(
            ens, cfg["n_samples"], cfg["density_factor"], clip_rad_s=clip,
            n_bins=cfg["n_bins"], jobs=jobs,
        )
        hist.to_csv(out / f"hist_{label}.csv")
        hist.to_json(out / f"hist_{label}.json")
        values = mean_field_samples(ens, cfg["n_samples"], cfg["density_factor"],
                                    jobs=jobs)
        beta = asymmetry_about_zero(values)
        results[label] = {
            "sign_fractions": histogram_sign_fraction(values),
            "asymmetry_about_zero": beta,
            "asymmetry_bootstrap_se": bootstrap_se(values, asymmetry_about_zero),
            "median_khz": float(np.median(values)) / (2 * np.pi * 1e3),
            "n_clipped": hist.n_clipped,
        }
    _write_json(out / "summary.json", results)
    return {"summary": results, "files": sorted(p.name for p in out.iterdir())}


def _synth(hist, model: BroadeningModel, schedule=None):
    """Synthesize with a grid wide enough for the histogram support and fine
    enough (step <= fwhm/5) for the Lorentzian kernel."""
    support = hist.metadata["clip_rad_s"] * RAD_S_TO_KHZ
    if schedule is not None:
        support *= 0.5
    fwhm = model.fwhm_khz
    half_span = max(25 * fwhm, 1.1 * support + 5 * fwhm)
    n_points = max(1001, int(np.ceil(2 * half_span / (fwhm / 5))) + 1)
    if n_points > 500_000:
        raise ResolutionError(
            f"probe linewidth {fwhm:.4g} kHz needs {n_points} grid points over "
            f"the {2 * half_span:.4g} kHz histogram support; narrow the "
            "histogram clip or use a wider probe"
        )
    return synthesize_spectrum(
        hist, model, schedule=schedule, n_points=n_points, half_span_khz=half_span
    )


FIG4_DEFAULTS = {
    "n_samples": 100_000,
    "density_factor": 0.70,
    "n_bins": 400,
    "clip_mhz": 2.0,
    "alpha": 1.1,
    "flipped_fraction": 0.33,
    "samples": {
        "C": {**SAMPLE_C, "lateral_nm": [400.0, 400.0]},
        "D": {**SAMPLE_D, "lateral_nm": [400.0, 400.0]},
    },
}


def run_fig4_spectra(config: dict, seed: int, out: Path, jobs: int = 1) -> dict:
    cfg = _merge(FIG4_DEFAULTS, config)
    clip = 2 * np.pi * cfg["clip_mhz"] * 1e6
    betas = {}
    for label, block in cfg["samples"].items():
        ens = _ensemble(block, seed)
        hist = mean_field_histogram(
            ens, cfg["n_samples"], cfg["density_factor"], clip_rad_s=clip,
            n_bins=cfg["n_bins"], jobs=jobs,
        )
        schedule = PulseSchedule.from_probe(
            block["tau_p_ns"] * 1e-9, 2 * np.pi * block["probe_rabi_khz"] * 1e3
        )
        for polarity in ("bright", "dark"):
            model = BroadeningModel(
                probe_rabi_rad_s=2 * np.pi * block["probe_rabi_khz"] * 1e3,
                alpha=cfg["alpha"],
                initialization=InitializationModel(
                    flipped_fraction=cfg["flipped_fraction"], polarity=polarity
                ),
            )
            spec = _synth(hist, model, schedule=schedule)
            spec.to_csv(out / f"spectrum_{label}_{polarity}.csv")
            betas[f"{label}_{polarity}"] = asymmetry_beta(spec)
    _write_json(out / "betas.json", betas)
    return {"betas": betas, "files": sorted(p.name for p in out.iterdir())}


FIG6_DEFAULTS = {
    "n_samples": 20_000,
    "density_factor": 0.70,
    "n_bins": 400,
    # Tight clip: only the line core matters for the width-vs-drive trend,
    # and it keeps the convolution grid (step <= fwhm/5) small.
    "clip_mhz": 0.1,
    "alpha": 1.0,
    "flipped_fraction": 0.33,
    "sample": {**SAMPLE_D, "lateral_nm": [400.0, 400.0]},
    "rabi_khz": [0.2, 0.35, 0.6, 1.0, 1.8, 3.2, 5.6, 10.0],
}


def run_fig6_linewidth(config: dict, seed: int, out: Path, jobs: int = 1) -> dict:
    cfg = _merge(FIG6_DEFAULTS, config)
    clip = 2 * np.pi * cfg["clip_mhz"] * 1e6
    block = cfg["sample"]
    ens = _ensemble(block, seed)
    hist = mean_field_histogram(
        ens, cfg["n_samples"], cfg["density_factor"], clip_rad_s=clip,
        n_bins=cfg["n_bins"], jobs=jobs,
    )
    rows = []
    for rabi_khz in cfg["rabi_khz"]:
        model = BroadeningModel(
            probe_rabi_rad_s=2 * np.pi * rabi_khz * 1e3,
            alpha=cfg["alpha"],
            initialization=InitializationModel(
                flipped_fraction=cfg["flipped_fraction"]
            ),
        )
        spec = _synth(hist, model)
        fit = fit_lorentzian(spec)
        rows.append({"rabi_khz": rabi_khz, "fwhm_khz": fit.fwhm_khz})
    with open(out / "linewidth_vs_rabi.csv", "w") as fh:
        fh.write("rabi_khz,fwhm_khz\n")
        for row in rows:
            fh.write(f"{row['rabi_khz']:.12g},{row['fwhm_khz']:.12g}\n")
    _write_json(out / "linewidth_vs_rabi.json", {"rows": rows})
    return {"rows": rows, "files": sorted(p.name for p in out.iterdir())}


TABLE1_DEFAULTS = {
    "budgets": {
        "sample_A_as_grown": {
            "t2_us": 2.7, "tau_us": 1.35, "t_m_us": 20.4, "c_eff": 0.017,
            "n_spins": 20, "rho_3d_ppm": 0.75, "volume_um3": 0.0015,
            "stretch_p": 0.6666666666666666, "published_nt_um32": 5.85,
        },
        "sample_A_irradiated": {
            "t2_us": 48.0, "tau_us": 24.0, "t_m_us": 20.4, "c_eff": 0.0062,
            "n_spins": 135, "rho_3d_ppm": 0.83, "volume_um3": 0.0015,
            "stretch_p": 0.6666666666666666, "published_nt_um32": 9.83,
        },
        "sample_B_as_grown": {
            "t2_us": 4.9, "tau_us": 2.5, "t_m_us": 20.4, "c_eff": 0.0079,
            "n_spins": 2, "rho_3d_ppm": 0.1, "volume_um3": 0.0015,
            "stretch_p": 0.6666666666666666, "published_nt_um32": 19.5,
        },
        "sample_B_irradiated": {
            "t2_us": 65.0, "tau_us": 32.5, "t_m_us": 20.4, "c_eff": 0.00098,
            "n_spins": 10, "rho_3d_ppm": 0.5, "volume_um3": 0.0015,
            "stretch_p": 0.6666666666666666, "published_nt_um32": 0.81,
        },
        "sample_B_projected": {
            "t2_us": 65.0, "tau_us": 32.5, "t_m_us": 4.4, "c_eff": 0.043,
            "n_spins": 1, "rho_3d_ppm": 0.5, "volume_um3": 0.0015,
            "stretch_p": 0.6666666666666666, "published_nt_um32": 0.153,
        },
    },
}


def run_table1_sensitivity(config: dict, seed: int, out: Path, jobs: int = 1) -> dict:
    cfg = _merge(TABLE1_DEFAULTS, config)
    report = {}
    for label, row in cfg["budgets"].items():
        budget = SensitivityBudget(
            t2_s=row["t2_us"] * 1e-6,
            tau_s=row["tau_us"] * 1e-6,
            t_m_s=row["t_m_us"] * 1e-6,
            c_eff=row["c_eff"],
            n_spins=row["n_spins"],
            stretch_p=row["stretch_p"],
            rho_3d_ppm=row["rho_3d_ppm"],
            volume_um3=row["volume_um3"],
        )
        entry = convention_report(budget)
        entry["published_nt_um32"] = row["published_nt_um32"]
        # Convenience: every volume-normalized value also in nT um^{3/2}.
        for key in list(entry):
            if key.endswith("_t_um32"):
                entry[key.replace("_t_um32", "_nt_um32")] = entry[key] * 1e9
        report[label] = entry
    _write_json(out / "sensitivity_conventions.json", report)
    return {"report": report, "files": sorted(p.name for p in out.iterdir())}


FIG5_DEFAULTS = {
    "particle_radius_um": 1.0,
    "moment_per_atom_mu_b": 2.216,
    "theta_deg": 162.0,
    "phi_deg": 164.0,
    "standoff_nm": 120.0,
    "plane": {"nx": 100, "ny": 100, "lx_um": 10.0, "ly_um": 10.0},
    "contour_levels_mt": [-0.1, 0.1],
    "quench_radius_um": 1.5,
}


def run_fig5_imaging(config: dict, seed: int, out: Path, jobs: int = 1) -> dict:
    cfg = _merge(FIG5_DEFAULTS, config)
    moment = particle_moment(cfg["particle_radius_um"], cfg["moment_per_atom_mu_b"])
    z = cfg["standoff_nm"] * 1e-3 + cfg["particle_radius_um"]
    dipole = MagneticDipole(
        moment_am2=moment,
        theta_deg=cfg["theta_deg"],
        phi_deg=cfg["phi_deg"],
        position_um=(0.0, 0.0, z),
    )
    plane = SensorPlane(**cfg["plane"])
    fmap = field_map(dipole, plane)
    fmap = quench_mask(fmap, (0.0, 0.0), cfg["quench_radius_um"])
    fmap.to_csv(out / "field_map.csv")
    fmap.to_json(out / "field_map.json")
    contours = extract_contours(fmap, cfg["contour_levels_mt"])
    contours_to_json(contours, out / "contours.json")
    summary = {
        "moment_am2": moment,
        "dipole_z_um": z,
        "contour_counts": {str(k): len(v) for k, v in contours.items()},
        "field_range_mt": [
            float(np.nanmin(fmap.masked_values())),
            float(np.nanmax(fmap.masked_values())),
        ],
    }
    _write_json(out / "summary.json", summary)
    return {"summary": summary, "files": sorted(p.name for p in out.iterdir())}


FIG2A_DEFAULTS = {
    # Representative growth-rate trend inputs: miscut angle (degrees) vs
    # epilayer growth rate (nm/min) with per-point uncertainties.
    "data": {
        "x": [0.5, 0.96, 1.3, 1.6, 2.1, 2.6, 3.0],
        "y": [18.0, 24.0, 29.0, 33.5, 41.0, 48.0, 54.0],
        "y_sigma": [2.0, 2.0, 2.5, 2.5, 3.0, 3.0, 3.5],
    },
}


def run_fig2a_regression(config: dict, seed: int, out: Path, jobs: int = 1) -> dict:
    cfg = _merge(FIG2A_DEFAULTS, config)
    data = TrendDataset(
        np.asarray(cfg["data"]["x"]),
        np.asarray(cfg["data"]["y"]),
        np.asarray(cfg["data"]["y_sigma"]) if cfg["data"].get("y_sigma") else None,
    )
    fit = weighted_linreg(data)
    result = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "slope_stderr": fit.slope_stderr,
        "intercept_stderr": fit.intercept_stderr,
        "nonzero_intercept": abs(fit.intercept) > 2 * fit.intercept_stderr,
    }
    _write_json(out / "regression.json", result)
    return {"fit": result, "files": sorted(p.name for p in out.iterdir())}


SCENARIOS = {
    "fig1f": run_fig1f,
    "fig4-spectra": run_fig4_spectra,
    "si-fig6-linewidth": run_fig6_linewidth,
    "table1-sensitivity": run_table1_sensitivity,
    "si-fig5-imaging": run_fig5_imaging,
    "fig2a-regression": run_fig2a_regression,
}


def run_scenario(
    name: str, config: dict | None = None, seed: int = 0,
    out_dir="out", jobs: int = 1,
) -> dict:
    """Execute a named pipeline; writes outputs plus a manifest."""
    if name not in SCENARIOS:
        raise ConfigurationError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}"
        )
    config = config or {}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = SCENARIOS[name](config, seed, out, jobs)
    manifest = {
        "scenario": name,
        "seed": seed,
        "config_hash": _config_hash(config),
        "config": config,
        "version": __version__,
        "files": bundle.get("files", []),
    }
    _write_json(out / "manifest.json", manifest)
    bundle["manifest"] = manifest
    return bundle


def emit_report(bundle: dict) -> tuple[str, dict]:
    """Human-readable summary plus the machine payload for a result bundle.

    Missing sections are flagged; the caller decides the exit status from
    the returned ``complete`` flag.
    """
    machine = {"complete": bool(bundle), "bundle": bundle}
    lines = []
    if not bundle:
        lines.append("EMPTY result bundle")
        machine["complete"] = False
        return "\n".join(lines), machine
    manifest = bundle.get("manifest", {})
    lines.append(f"scenario: {manifest.get('scenario', '?')}")
    lines.append(f"seed: {manifest.get('seed', '?')}")
    for key, value in bundle.items():
        if key in ("manifest", "files"):
            continue
        lines.append(f"[{key}]")
        lines.append(json.dumps(value, indent=2, sort_keys=True, default=str))
    if "files" in bundle:
        lines.append("files: " + ", ".join(bundle["files"]))
    return "\n".join(lines), machine
