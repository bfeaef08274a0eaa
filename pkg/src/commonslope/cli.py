"""Batch front end: simulate, fit, synth, and metrics subcommands.

Every subcommand is deterministic given its config and seed: rerunning with
identical inputs produces byte-identical output files.  The operational
entry points (``run_simulate`` etc.) are plain functions so they can be
driven programmatically as well.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .decay import build_kernels, cluster_decay_times, fit_edf_decays
from .errors import ConfigError
from .io import (
    dataset_path,
    position_seed,
    read_json,
    read_wav,
    validate_simulation_config,
    write_csv,
    write_json,
    write_wav,
)
from .metrics import c50, c50_error, envelope_rmse
from .signal import (
    DEFAULT_BAND_CENTERS,
    BandedEnvelope,
    default_window_len,
    extract_banded_envelope,
    octave_filterbank,
    rms_envelope,
    schroeder_edf,
)
from .slopes import FADE_IN, POS_ONLY, default_skip_head, fit_dataset
from .statsim import RoomChain, chain_response, three_room_preset
from .synth import synth_band, synth_broadband


def run_simulate(config: dict, out_dir) -> dict:
    """Simulate a dataset of room-chain responses; returns the manifest.

    Writes one WAV file per position plus ``manifest.json`` carrying the
    ground-truth decay rates and the derived per-position seeds.
    """
    config = validate_simulation_config(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    positions = []
    for i, pos in enumerate(config["positions"]):
        seed = position_seed(config["seed"], i)
        chain = RoomChain(
            decay_rates=tuple(pos["decay_rates"]),
            length=config["length"],
            sample_rate=config["sample_rate"],
            seed=seed,
            position_id=pos["id"],
        )
        write_wav(dataset_path(out_dir, pos["id"]), chain_response(chain))
        positions.append(
            {
                "id": pos["id"],
                "decay_rates": list(pos["decay_rates"]),
                "seed": seed,
                "file": f"{pos['id']}.wav",
            }
        )

    manifest = {
        "sample_rate": config["sample_rate"],
        "length": config["length"],
        "seed": config["seed"],
        "tool_version": __version__,
        "positions": positions,
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest


def _load_dataset(dataset_dir) -> list:
    """Read all dataset RIRs, enforcing a single sample rate and length."""
    dataset_dir = Path(dataset_dir)
    manifest_path = dataset_dir / "manifest.json"
    if manifest_path.exists():
        manifest = read_json(manifest_path)
        entries = [(p["id"], dataset_dir / p["file"]) for p in manifest["positions"]]
    else:
        entries = [(p.stem, p) for p in sorted(dataset_dir.glob("*.wav"))]

    rirs = [read_wav(path, position_id=pid) for pid, path in entries]
    if rirs:
        rates = {r.sample_rate for r in rirs}
        if len(rates) > 1:
            offenders = ", ".join(
                f"{r.position_id}={r.sample_rate}" for r in rirs
            )
            raise ValueError(f"dataset mixes sample rates: {offenders}")
        lengths = {len(r.samples) for r in rirs}
        if len(lengths) > 1:
            offenders = ", ".join(f"{r.position_id}={len(r.samples)}" for r in rirs)
            raise ValueError(f"dataset mixes lengths: {offenders}")
    return rirs


def run_fit(
    dataset_dir,
    params_path,
    report_path=None,
    band_centers=None,
    k_per_band: int = 3,
    mode: str = FADE_IN,
    skip_ms: float = 8.0,
    seed: int = 0,
    window_len: int | None = None,
    times_from=None,
) -> dict:
    """Full analysis pipeline: bands, envelopes, decay times, slope fits.

    Writes the parameter file and a per-position per-band residual report;
    returns the parameter document.  With ``times_from`` (a path to an
    existing parameter file) the common decay times are taken from that file
    and the estimation/clustering stages are skipped, which makes refits
    live in the same kernel basis.
    """
    rirs = _load_dataset(dataset_dir)
    if not rirs:
        raise ValueError(f"no RIRs found in {dataset_dir}")
    if times_from is not None:
        reference = read_json(times_from)
        band_centers = [b["center_hz"] for b in reference["bands"]]
        if window_len is None:
            window_len = reference["window_len"]
    if band_centers is None:
        band_centers = DEFAULT_BAND_CENTERS
    fs = rirs[0].sample_rate
    n = len(rirs[0].samples)
    if window_len is None:
        window_len = default_window_len(n)

    banded = {
        rir.position_id: octave_filterbank(rir, band_centers) for rir in rirs
    }
    if times_from is not None:
        common_times = {
            b["center_hz"]: b["decay_times_s"] for b in reference["bands"]
        }
    else:
        # Per-(position, band) decay estimates from the EDFs, pooled per band.
        estimates = []
        for rir in rirs:
            for band_rir in banded[rir.position_id]:
                est = fit_edf_decays(schroeder_edf(band_rir, normalize=True), fs)
                est.band_center = band_rir.band
                est.position_id = rir.position_id
                estimates.append(est)
        common_times = cluster_decay_times(estimates, k_per_band, seed=seed)
    envelope_len = n // window_len
    kernels = build_kernels(common_times, envelope_len, window_len, fs)

    envelopes = []
    for rir in rirs:
        values = np.stack(
            [rms_envelope(b, window_len) for b in banded[rir.position_id]]
        )
        envelopes.append(
            BandedEnvelope(
                values,
                tuple(float(c) for c in band_centers),
                window_len=window_len,
                sample_rate=fs,
                position_id=rir.position_id,
            )
        )

    skip_head = default_skip_head(fs, window_len, skip_ms)
    fits = fit_dataset(envelopes, kernels, mode=mode, skip_head=skip_head)

    bands_doc = []
    for b, center in enumerate(kernels.band_centers):
        bands_doc.append(
            {
                "center_hz": float(center),
                "decay_times_s": [float(t) for t in kernels.common_times[b]],
                "positions": [
                    {
                        "id": fit.position_id,
                        "amplitudes": [float(a) for a in fit.amplitudes[b]],
                        "noise": float(fit.noise[b]),
                    }
                    for fit in fits
                ],
            }
        )
    params = {
        "sample_rate": fs,
        "window_len": window_len,
        "envelope_len": envelope_len,
        "bands": bands_doc,
        "mode": mode,
        "tool_version": __version__,
        "seed": seed,
    }
    write_json(params_path, params)

    if report_path is None:
        report_path = Path(str(params_path) + ".report.csv")
    rows = []
    for fit in fits:
        for b, center in enumerate(fit.band_centers):
            rows.append(
                (
                    fit.position_id,
                    float(center),
                    float(fit.objective_value[b]),
                    int(fit.iterations[b]),
                    bool(fit.converged[b]),
                    bool(fit.feasible[b]),
                )
            )
    write_csv(
        report_path,
        ("position_id", "band_hz", "objective", "iterations", "converged", "feasible"),
        rows,
    )
    return params


def _params_kernels(params: dict):
    """Rebuild the kernel set stored in a parameter document."""
    common = {b["center_hz"]: b["decay_times_s"] for b in params["bands"]}
    return build_kernels(
        common,
        envelope_len=params["envelope_len"],
        window_len=params["window_len"],
        sample_rate=params["sample_rate"],
    )


def _position_thetas(params: dict) -> dict:
    """``{position_id: (amplitudes (B, K), noise (B,))}`` from a document."""
    ids = [p["id"] for p in params["bands"][0]["positions"]]
    out = {}
    for i, pid in enumerate(ids):
        amps, noise = [], []
        for band in params["bands"]:
            pos = band["positions"][i]
            if pos["id"] != pid:
                raise ValueError("parameter file bands disagree on position order")
            amps.append(pos["amplitudes"])
            noise.append(pos["noise"])
        out[pid] = (np.asarray(amps, dtype=np.float64), np.asarray(noise))
    return out


def _model_band_envelopes(params: dict, kernels, pid: str, thetas) -> np.ndarray:
    """Nonnegative per-band model envelopes of one position (for synthesis)."""
    amps, noise = thetas[pid]
    values = np.empty((kernels.n_bands, kernels.envelope_len))
    for b in range(kernels.n_bands):
        theta = np.concatenate([[noise[b]], amps[b]])
        values[b] = kernels.kernel_matrix[b] @ theta
    return np.maximum(values, 0.0)


def run_synth(params_path, out_dir, position_ids=None, seed: int = 0) -> dict:
    """Synthesize broadband RIRs for the requested positions.

    Per-band noise seeds derive from ``seed`` and the position's index in
    the parameter file, so a position synthesizes identically whether or not
    others are requested.  Returns the synthesis manifest.
    """
    params = read_json(params_path)
    kernels = _params_kernels(params)
    thetas = _position_thetas(params)
    all_ids = list(thetas.keys())
    if position_ids is None:
        position_ids = all_ids
    unknown = [pid for pid in position_ids if pid not in thetas]
    if unknown:
        raise KeyError(f"unknown position ids: {', '.join(unknown)}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for pid in position_ids:
        rir = _synthesize_position(params, kernels, thetas, pid, seed)
        write_wav(out_dir / f"{pid}_synth.wav", rir)
        entries.append({"id": pid, "file": f"{pid}_synth.wav"})

    manifest = {
        "source_params": str(Path(params_path).name),
        "sample_rate": params["sample_rate"],
        "seed": seed,
        "tool_version": __version__,
        "positions": entries,
    }
    write_json(out_dir / "synth_manifest.json", manifest)
    return manifest


def _synthesize_position(params, kernels, thetas, pid: str, seed: int):
    """Broadband synthesis of one position from its fitted parameters."""
    pos_index = list(thetas.keys()).index(pid)
    envelopes = _model_band_envelopes(params, kernels, pid, thetas)
    band_rirs = []
    for b, center in enumerate(kernels.band_centers):
        band_seed = np.random.SeedSequence(seed, spawn_key=(pos_index, b))
        band_rirs.append(
            synth_band(
                envelopes[b],
                float(center),
                kernels.window_len,
                kernels.sample_rate,
                band_seed,
            )
        )
    rir = synth_broadband(band_rirs)
    rir.position_id = pid
    return rir


def run_metrics(
    params_path,
    dataset_dir,
    out_path,
    position_ids=None,
    skip_ms: float = 8.0,
    seed: int = 0,
    curves_dir=None,
) -> list:
    """Envelope RMSE and C50 comparison between dataset and fitted model.

    Emits one CSV row per (position, band) with the per-band envelope RMSE,
    the position's summed RMSE over bands, and the broadband C50 of the
    reference and of the model-synthesized RIR.  With ``curves_dir`` the
    reference and model envelope curves are written per position as
    plot-ready CSV files.
    """
    params = read_json(params_path)
    kernels = _params_kernels(params)
    thetas = _position_thetas(params)
    rirs = {r.position_id: r for r in _load_dataset(dataset_dir)}

    if position_ids is None:
        position_ids = list(thetas.keys())
    missing = [pid for pid in position_ids if pid not in thetas or pid not in rirs]
    if missing:
        raise ValueError(
            f"position ids not present in both inputs: {', '.join(missing)}"
        )

    fs = params["sample_rate"]
    window_len = params["window_len"]
    skip_head = default_skip_head(fs, window_len, skip_ms)
    centers = [b["center_hz"] for b in params["bands"]]

    if curves_dir is not None:
        Path(curves_dir).mkdir(parents=True, exist_ok=True)
        _write_amplitude_table(Path(curves_dir) / "amplitudes.csv", params, position_ids)

    rows = []
    for pid in position_ids:
        reference = extract_banded_envelope(
            rirs[pid], band_centers=centers, window_len=window_len
        )
        model = _model_band_envelopes(params, kernels, pid, thetas)
        rmse_bands = [
            envelope_rmse(model[b], reference.values[b], skip_head=skip_head)
            for b in range(len(centers))
        ]
        rmse_sum = float(np.sum(rmse_bands))
        synth = _synthesize_position(params, kernels, thetas, pid, seed)
        c50_ref = c50(rirs[pid])
        c50_model = c50(synth)
        err = c50_error(rirs[pid], synth)
        for b, center in enumerate(centers):
            rows.append(
                (pid, float(center), rmse_bands[b], rmse_sum, c50_ref, c50_model, err)
            )
        if curves_dir is not None:
            _write_curves(Path(curves_dir), pid, reference, model, rirs[pid], kernels)

    write_csv(
        out_path,
        (
            "position_id",
            "band_hz",
            "rmse",
            "rmse_sum",
            "c50_reference_db",
            "c50_model_db",
            "c50_error_db",
        ),
        rows,
    )
    return rows


def _write_amplitude_table(path, params: dict, position_ids):
    """Plot-ready amplitude-vs-position table (one row per slope)."""
    wanted = set(position_ids)
    rows = []
    for band in params["bands"]:
        for pos in band["positions"]:
            if pos["id"] not in wanted:
                continue
            for k, (t, a) in enumerate(zip(band["decay_times_s"], pos["amplitudes"])):
                rows.append((pos["id"], band["center_hz"], k, t, a, pos["noise"]))
    write_csv(
        path,
        ("position_id", "band_hz", "slope", "decay_time_s", "amplitude", "noise"),
        rows,
    )


def _write_curves(curves_dir, pid, reference, model, rir, kernels):
    """Plot-ready per-position envelope and EDC curves."""
    times = kernels.times()
    header = ["time_s"]
    cols = [times]
    for b, center in enumerate(kernels.band_centers):
        header += [f"ref_{center:g}hz", f"model_{center:g}hz"]
        cols += [reference.values[b], model[b]]
    rows = list(zip(*cols))
    write_csv(curves_dir / f"{pid}_envelopes.csv", header, rows)

    edf = schroeder_edf(rir, normalize=True)
    stride = max(1, len(edf.values) // 2000)
    idx = np.arange(0, len(edf.values), stride)
    write_csv(
        curves_dir / f"{pid}_edc.csv",
        ("time_s", "edc"),
        list(zip(idx / rir.sample_rate, edf.values[idx])),
    )


def _parse_bands(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_positions(text: str | None):
    if text is None:
        return None
    return [tok for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commonslope",
        description="Fit, simulate, and resynthesize common-slope reverberation "
        "models with fade-in support.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic RIR dataset")
    p.add_argument("out_dir")
    p.add_argument("--config", help="simulation config JSON")
    p.add_argument("--preset", choices=["three-room"], help="built-in scenario")
    p.add_argument("--positions", type=int, default=10, help="preset position count")
    p.add_argument("--length", type=int, default=96000)
    p.add_argument("--sample-rate", type=int, default=48000)
    p.add_argument("--seed", type=int, default=2024)

    p = sub.add_parser("fit", help="fit the slope model to a dataset")
    p.add_argument("dataset_dir")
    p.add_argument("--out", required=True, help="parameter file to write")
    p.add_argument("--report", help="residual report CSV (default: <out>.report.csv)")
    p.add_argument(
        "--bands",
        default=",".join(str(c) for c in DEFAULT_BAND_CENTERS),
        help="comma-separated octave band centers in Hz",
    )
    p.add_argument("--k-per-band", type=int, default=3)
    p.add_argument("--mode", choices=[FADE_IN, POS_ONLY], default=FADE_IN)
    p.add_argument("--skip-ms", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window-len", type=int, help="envelope window in samples")
    p.add_argument(
        "--times-from",
        help="reuse the common decay times of an existing parameter file "
        "instead of estimating them",
    )

    p = sub.add_parser("synth", help="synthesize RIRs from a parameter file")
    p.add_argument("params")
    p.add_argument("out_dir")
    p.add_argument("--positions", help="comma-separated position ids (default all)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("metrics", help="compare a fitted model against a dataset")
    p.add_argument("params")
    p.add_argument("dataset_dir")
    p.add_argument("--out", required=True, help="metrics CSV to write")
    p.add_argument("--positions", help="comma-separated position ids (default all)")
    p.add_argument("--skip-ms", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curves-dir", help="also emit plot-ready envelope/EDC CSVs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            if args.config:
                config = read_json(args.config)
            elif args.preset == "three-room":
                config = three_room_preset(
                    n_positions=args.positions,
                    length=args.length,
                    sample_rate=args.sample_rate,
                    seed=args.seed,
                )
            else:
                raise ConfigError("$: either --config or --preset is required")
            manifest = run_simulate(config, args.out_dir)
            print(f"wrote {len(manifest['positions'])} responses to {args.out_dir}")
        elif args.command == "fit":
            params = run_fit(
                args.dataset_dir,
                args.out,
                report_path=args.report,
                band_centers=_parse_bands(args.bands),
                k_per_band=args.k_per_band,
                mode=args.mode,
                skip_ms=args.skip_ms,
                seed=args.seed,
                window_len=args.window_len,
                times_from=args.times_from,
            )
            n_pos = len(params["bands"][0]["positions"])
            print(f"fitted {n_pos} positions x {len(params['bands'])} bands -> {args.out}")
        elif args.command == "synth":
            manifest = run_synth(
                args.params,
                args.out_dir,
                position_ids=_parse_positions(args.positions),
                seed=args.seed,
            )
            print(f"synthesized {len(manifest['positions'])} responses to {args.out_dir}")
        elif args.command == "metrics":
            rows = run_metrics(
                args.params,
                args.dataset_dir,
                args.out,
                position_ids=_parse_positions(args.positions),
                skip_ms=args.skip_ms,
                seed=args.seed,
                curves_dir=args.curves_dir,
            )
            print(f"wrote {len(rows)} metric rows -> {args.out}")
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
