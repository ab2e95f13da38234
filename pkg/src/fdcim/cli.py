"""Batch experiment driver.

YAML configs in, deterministic CSV artifacts, rendered figures, and a run
manifest out.  Subcommands: transform, crossbar, adc, asymsearch, cost,
dnl-inl, all.  Exit codes: 0 success, 2 config error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .adc import (
    AdcConfig,
    AdcMode,
    CapDac,
    HybridNetwork,
    MemoryAdc,
    balanced_tree,
    build_asymmetric_tree,
    dnl_inl,
    expected_comparisons,
    expected_comparisons_exact,
    hybrid_timeline,
    mav_pmf,
    midcell_sweep,
    transfer_curve,
)
from .cost import (
    PUBLISHED_NETWORK_PARAM_REDUCTION_PCT,
    ArchCost,
    CostTable,
    LayerKind,
    LayerShape,
    comparator_count,
    interleaved_pair_rate,
    latency_model,
    layer_macs,
    layer_params,
    ratio_report,
)
from .crossbar import TerminationMode, bitplane_transform, program
from .errors import ConfigError, FdcimError
from .quant import Signedness, quantize, to_bitplanes
from .reports import (
    SCHEMA_VERSION,
    config_hash,
    dnl_inl_figure,
    latency_figure,
    pmf_figure,
    staircase_figure,
    timeline_figure,
    transform_cost_figure,
    workload_figure,
    write_csv,
    write_manifest,
)
from .wht import Direction, bwht_apply, bwht_plan, walsh

OUTPUT_DIR_ENV = "FDCIM_OUT"

_DEFAULTS: dict[str, dict] = {
    "transform": {
        "sizes": [8, 96, 100, 257],
        "value_range": 100,
    },
    "crossbar": {
        "order_log2": 5,
        "input_bits": 4,
        "n_vectors": 200,
        "thresholds": [0.0, 0.5, 1.0, 2.0],
        "mav_noise_sigma": 0.0,
    },
    "adc": {
        "mode": "sar",
        "bits": 5,
        "flash_bits": 2,
        "n_units": 32,
        "mismatch_sigma": 0.0,
        "comparator_offset": 0.0,
        "sweep_points": 1024,
        "vdd": 1.0,
    },
    "asymsearch": {
        "n_cols": 32,
        "bits": 5,
        "algebra": "unipolar",
    },
    "cost": {
        "table": {},
        "bits_sweep": [3, 4, 5, 6, 7, 8],
        "flash_bits": 2,
        "asym_n_cols": 32,
        "layers": [{"c_in": 64, "c_out": 128}],
    },
    "dnl_inl": {
        "bits": 5,
        "n_units": 32,
        "mismatch_sigma": 0.05,
        "sweep_per_code": 64,
        "vdd": 1.0,
    },
}

_TOP_KEYS = {"experiment", "seed", "output_dir"} | set(_DEFAULTS)
_TABLE_ARCHS = {"sar", "flash", "in_memory"}
_TABLE_FIELDS = {"tech_nm", "area_um2", "energy_pj"}
SUBCOMMANDS = ("transform", "crossbar", "adc", "asymsearch", "cost", "dnl-inl", "all")


def _section_name(sub: str) -> str:
    return sub.replace("-", "_")


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return raw


def _check_scalar(section: str, key: str, value, default) -> None:
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, (int, float)):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"config key '{section}.{key}' has the wrong type")


def _validate_section(section: str, user: dict, defaults: dict) -> dict:
    if not isinstance(user, dict):
        raise ConfigError(f"config section '{section}' must be a mapping")
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key '{section}.{key}'")
        default = defaults[key]
        if isinstance(default, list):
            if not isinstance(value, list):
                raise ConfigError(f"config key '{section}.{key}' must be a list")
        elif isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{section}.{key}' must be a mapping")
        else:
            _check_scalar(section, key, value, default)
        merged[key] = value
    return merged


def _validate_cost_extras(cfg: dict) -> None:
    for arch, fields in cfg["table"].items():
        if arch not in _TABLE_ARCHS:
            raise ConfigError(f"unknown config key 'cost.table.{arch}'")
        if not isinstance(fields, dict):
            raise ConfigError(f"config key 'cost.table.{arch}' must be a mapping")
        for field in fields:
            if field not in _TABLE_FIELDS:
                raise ConfigError(f"unknown config key 'cost.table.{arch}.{field}'")
    for i, layer in enumerate(cfg["layers"]):
        if not isinstance(layer, dict):
            raise ConfigError(f"config key 'cost.layers[{i}]' must be a mapping")
        for key in layer:
            if key not in {"c_in", "c_out"}:
                raise ConfigError(f"unknown config key 'cost.layers[{i}].{key}'")
        if "c_in" not in layer or "c_out" not in layer:
            raise ConfigError(f"config key 'cost.layers[{i}]' needs c_in and c_out")


def effective_config(raw: dict, seed_override: int | None,
                     experiment_override: str | None) -> dict:
    """Merge defaults, file values, and flag overrides; reject unknown keys."""
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("config key 'seed' must be a non-negative integer")
    if seed_override is not None:
        seed = seed_override
    experiment = raw.get("experiment")
    if experiment is not None and not isinstance(experiment, str):
        raise ConfigError("config key 'experiment' must be a string")
    if experiment_override is not None:
        experiment = experiment_override
    cfg: dict = {"seed": seed, "experiment": experiment}
    for section, defaults in _DEFAULTS.items():
        cfg[section] = _validate_section(section, raw.get(section, {}), defaults)
    _validate_cost_extras(cfg["cost"])
    return cfg


# ---------------------------------------------------------------------------
# Experiment runners.  Each returns (artifact paths, manifest extras).


def run_transform(cfg: dict, seed: int, outdir: Path, experiment: str):
    p = cfg["transform"]
    rows = []
    cost_pts = []
    for m in sorted(set(int(s) for s in p["sizes"])):
        plan = bwht_plan(m)
        rng = np.random.default_rng([seed, m])
        x = rng.integers(-int(p["value_range"]), int(p["value_range"]) + 1, size=m)
        fwd = bwht_apply(plan, x, Direction.FORWARD)
        inv = bwht_apply(plan, fwd, Direction.INVERSE)
        roundtrip = bool(np.all(inv == x))
        matches = _blocks_match_matrix(plan, x, fwd)
        adds = sum(2 * n * (n.bit_length() - 1) for n in plan.block_sizes)
        dense = m * m
        rows.append((experiment, f"m{m:04d}", m, len(plan.block_sizes),
                     ";".join(str(s) for s in plan.block_sizes),
                     plan.padded_len, plan.total_pad, adds, dense,
                     roundtrip, matches))
        cost_pts.append((m, adds, dense))
    csv_path = write_csv(
        outdir / "transform.csv",
        ["experiment", "case", "input_len", "n_blocks", "block_sizes",
         "padded_len", "total_pad", "transform_adds", "dense_macs",
         "roundtrip_exact", "matches_matrix"],
        rows)
    fig = transform_cost_figure(outdir / "transform_macs.png", cost_pts)
    return [csv_path, fig], {}


def _blocks_match_matrix(plan, x, fwd) -> bool:
    in_pos = 0
    out_pos = 0
    for size, pad in zip(plan.block_sizes, plan.pad_map):
        take = size - pad
        seg = np.concatenate([np.asarray(x[in_pos:in_pos + take], dtype=np.int64),
                              np.zeros(pad, dtype=np.int64)])
        matrix = walsh(size.bit_length() - 1).rows.astype(np.int64)
        if not np.array_equal(fwd[out_pos:out_pos + size], matrix @ seg):
            return False
        in_pos += take
        out_pos += size
    return True


def run_crossbar(cfg: dict, seed: int, outdir: Path, experiment: str):
    p = cfg["crossbar"]
    k = int(p["order_log2"])
    bits = int(p["input_bits"])
    n_vectors = int(p["n_vectors"])
    sigma = float(p["mav_noise_sigma"])
    matrix = walsh(k).rows
    n_cols = 1 << k
    rng = np.random.default_rng([seed, 7])
    inputs = rng.uniform(-1.0, 1.0, (n_vectors, n_cols))
    tensors = [to_bitplanes(quantize(x, bits, (-1.0, 1.0),
                                     Signedness.TWOS_COMPLEMENT))
               for x in inputs]
    modes = (TerminationMode.FULL, TerminationMode.SOUND, TerminationMode.HEURISTIC)
    rows = []
    workload_pts = []
    for t_val in sorted(float(t) for t in p["thresholds"]):
        arrays = {mode: program(matrix, mav_noise_sigma=sigma, rng_seed=seed)
                  for mode in modes}
        stats = {mode: {"planes": 0, "cycles": 0, "ops": 0, "zero": 0}
                 for mode in modes}
        sound_matches = True
        agree = 0
        total_rows = 0
        for tensor in tensors:
            results = {mode: bitplane_transform(arrays[mode], tensor, mode, t_val)
                       for mode in modes}
            for mode in modes:
                res = results[mode]
                stats[mode]["planes"] += int(res.planes_processed.sum())
                stats[mode]["cycles"] += res.cycle_count
                stats[mode]["ops"] += res.comparator_ops
                stats[mode]["zero"] += int(np.count_nonzero(res.output.values == 0))
            full_vals = results[TerminationMode.FULL].output.values
            rule = np.where(np.abs(full_vals * float(tensor.scale)) <= t_val,
                            0, full_vals)
            sound_vals = results[TerminationMode.SOUND].output.values
            sound_matches &= bool(np.array_equal(sound_vals, rule))
            agree += int(np.count_nonzero(
                results[TerminationMode.HEURISTIC].output.values == sound_vals))
            total_rows += matrix.shape[0]
        for mode in modes:
            s = stats[mode]
            mean_planes = s["planes"] / total_rows
            rows.append((experiment, f"T{t_val:g}-{mode.value}", t_val, mode.value,
                         mean_planes, s["cycles"] / n_vectors, s["ops"],
                         s["zero"] / total_rows, sound_matches,
                         agree / total_rows))
            workload_pts.append((t_val, mode.value, mean_planes))
    rows.sort(key=lambda r: r[1])
    csv_path = write_csv(
        outdir / "crossbar.csv",
        ["experiment", "case", "threshold", "mode", "mean_planes_processed",
         "mean_cycles", "comparator_ops", "zero_fraction",
         "sound_matches_zero_rule", "heuristic_agreement_rate"],
        rows)
    fig = workload_figure(outdir / "crossbar_workload.png", workload_pts)
    return [csv_path, fig], {}


def _build_adc(p: dict, seed: int) -> MemoryAdc:
    bits = int(p["bits"])
    n_units = int(p["n_units"])
    vdd = float(p["vdd"])
    sigma = float(p["mismatch_sigma"])
    offset = float(p["comparator_offset"])
    mode = AdcMode(p["mode"])

    def make_dac(index: int) -> CapDac:
        if sigma == 0:
            return CapDac.ideal(n_units, vdd)
        return CapDac.with_mismatch(n_units, sigma,
                                    np.random.default_rng([seed, index + 1]), vdd)

    if mode is AdcMode.SAR:
        return MemoryAdc(make_dac(0), AdcConfig(bits=bits, comparator_offset=offset,
                                                mode=mode))
    if mode is AdcMode.FLASH:
        dacs = tuple(make_dac(i) for i in range((1 << bits) - 1))
        return MemoryAdc(dacs[0], AdcConfig(bits=bits, comparator_offset=offset,
                                            mode=mode),
                         network=HybridNetwork(dacs))
    if mode is AdcMode.HYBRID:
        flash_bits = int(p["flash_bits"])
        dacs = tuple(make_dac(i) for i in range((1 << flash_bits) - 1))
        return MemoryAdc(dacs[0],
                         AdcConfig(bits=bits, comparator_offset=offset, mode=mode,
                                   flash_bits=flash_bits),
                         network=HybridNetwork(dacs))
    raise ConfigError(f"adc experiment does not drive mode '{p['mode']}'")


def run_adc(cfg: dict, seed: int, outdir: Path, experiment: str):
    p = cfg["adc"]
    adc = _build_adc(p, seed)
    sweep = midcell_sweep(int(p["sweep_points"]), float(p["vdd"]))
    rows = []
    total_cycles = 0
    for i, vin in enumerate(sweep):
        trace = adc.convert(float(vin))
        total_cycles += trace.comparisons
        rows.append((experiment, f"v{i:05d}", float(vin), trace.code,
                     trace.comparisons, trace.comparator_ops,
                     trace.saturated))
    artifacts = [write_csv(
        outdir / "adc_staircase.csv",
        ["experiment", "case", "vin", "code", "cycles", "comparator_ops",
         "saturated"],
        rows)]
    curve = [(r[2], r[3]) for r in rows]
    artifacts.append(staircase_figure(outdir / "adc_staircase.png", curve,
                                      int(p["bits"]), float(p["vdd"])))
    extras = {"mean_cycles_per_conversion": total_cycles / len(sweep)}
    if adc.config.mode is AdcMode.HYBRID:
        entries = hybrid_timeline(adc.network, adc.config)
        timeline_rows = [(experiment, e.cycle, e.array, e.state) for e in entries]
        artifacts.append(write_csv(
            outdir / "adc_timeline.csv",
            ["experiment", "cycle", "array", "state"],
            timeline_rows))
        artifacts.append(timeline_figure(outdir / "adc_timeline.png", entries))
    return artifacts, extras


def run_asymsearch(cfg: dict, seed: int, outdir: Path, experiment: str):
    p = cfg["asymsearch"]
    bits = int(p["bits"])
    pmf = mav_pmf(int(p["n_cols"]), bits, str(p["algebra"]))
    optimal = build_asymmetric_tree(pmf)
    balanced = balanced_tree(bits)
    d_opt = optimal.depths()
    d_bal = balanced.depths()
    probs = pmf.as_floats()
    rows = [(experiment, f"c{code:03d}", code, probs[code],
             int(d_opt[code]), int(d_bal[code]))
            for code in range(len(pmf))]
    artifacts = [write_csv(
        outdir / "asymsearch.csv",
        ["experiment", "case", "code", "probability", "depth_asymmetric",
         "depth_balanced"],
        rows)]
    e_opt = expected_comparisons(optimal, pmf)
    e_bal = expected_comparisons(balanced, pmf)
    exact = expected_comparisons_exact(optimal, pmf)
    artifacts.append(write_csv(
        outdir / "asymsearch_summary.csv",
        ["experiment", "n_cols", "bits", "algebra", "expected_asymmetric",
         "expected_balanced", "expected_asymmetric_exact", "tree"],
        [(experiment, int(p["n_cols"]), bits, p["algebra"], e_opt, e_bal,
          f"{exact.numerator}/{exact.denominator}", optimal.to_paren())]))
    artifacts.append(pmf_figure(outdir / "asymsearch_pmf.png", probs, d_opt, d_bal))
    extras = {"expected_comparisons": e_opt,
              "expected_comparisons_exact": f"{exact.numerator}/{exact.denominator}"}
    return artifacts, extras


def _cost_table(p: dict) -> CostTable:
    base = CostTable.defaults()
    merged = {}
    for arch in _TABLE_ARCHS:
        entry = getattr(base, arch)
        override = p["table"].get(arch, {})
        merged[arch] = ArchCost(
            tech_nm=float(override.get("tech_nm", entry.tech_nm)),
            area_um2=Fraction(str(override.get("area_um2", entry.area_um2))),
            energy_pj=Fraction(str(override.get("energy_pj", entry.energy_pj))),
        )
    return CostTable(**merged)


def run_cost(cfg: dict, seed: int, outdir: Path, experiment: str):
    p = cfg["cost"]
    table = _cost_table(p)
    report = ratio_report(table)
    ratio_rows = [(experiment,) + row for row in report.rows()]
    artifacts = [write_csv(
        outdir / "cost_ratios.csv",
        ["experiment", "metric", "pair", "ratio", "ratio_rounded"],
        ratio_rows)]

    flash_bits = int(p["flash_bits"])
    latency_rows = []
    fig_rows = []
    for bits in sorted(set(int(b) for b in p["bits_sweep"])):
        styles: list[tuple[AdcMode, dict]] = [
            (AdcMode.SAR, {}), (AdcMode.FLASH, {})]
        if flash_bits < bits:
            styles.append((AdcMode.HYBRID, {"flash_bits": flash_bits}))
        pmf = mav_pmf(int(p["asym_n_cols"]), bits)
        depth = expected_comparisons(build_asymmetric_tree(pmf), pmf)
        styles.append((AdcMode.ASYMMETRIC, {"expected_asym_depth": depth}))
        for style, kw in styles:
            cycles = latency_model(style, bits, **kw)
            comps = comparator_count(style, bits, kw.get("flash_bits"))
            latency_rows.append((experiment, style.value, bits, cycles, comps))
            fig_rows.append((style.value, bits, cycles))
    latency_rows.sort(key=lambda r: (r[1], r[2]))
    artifacts.append(write_csv(
        outdir / "cost_latency.csv",
        ["experiment", "style", "bits", "cycles", "comparators"],
        latency_rows))

    layer_rows = []
    for i, layer in enumerate(p["layers"]):
        c_in, c_out = int(layer["c_in"]), int(layer["c_out"])
        conv = LayerShape(c_in, c_out, LayerKind.CONV1X1)
        bwht = LayerShape(c_in, c_out, LayerKind.BWHT)
        n = max(c_in, c_out)
        conv_macs = layer_macs(conv, n)
        bwht_macs = layer_macs(bwht, n)
        p_conv = layer_params(conv)
        p_bwht = layer_params(bwht)
        layer_rows.append((experiment, f"layer{i:02d}", c_in, c_out,
                           p_conv, p_bwht, 100.0 * (1 - p_bwht / p_conv),
                           conv_macs.multiplies, conv_macs.additions,
                           bwht_macs.multiplies, bwht_macs.additions))
    artifacts.append(write_csv(
        outdir / "cost_layers.csv",
        ["experiment", "case", "c_in", "c_out", "params_conv1x1", "params_bwht",
         "param_reduction_pct", "conv_multiplies", "conv_additions",
         "bwht_multiplies", "bwht_additions"],
        layer_rows))

    text = report.to_text(table)
    text += (
        "\n"
        f"interleaved pair throughput: {interleaved_pair_rate(1.0):.1f}x one "
        "array's compute rate\n"
        "published MobileNetV2 network-level parameter reduction: "
        f"{PUBLISHED_NETWORK_PARAM_REDUCTION_PCT:.0f}% (reported, not recomputed)\n")
    report_path = outdir / "cost_report.txt"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(text)
    artifacts.append(report_path)
    artifacts.append(latency_figure(outdir / "cost_latency.png", fig_rows))
    return artifacts, {"ratios_rounded": report.rounded()}


def run_dnl_inl(cfg: dict, seed: int, outdir: Path, experiment: str):
    p = cfg["dnl_inl"]
    bits = int(p["bits"])
    n_codes = 1 << bits
    sigma = float(p["mismatch_sigma"])
    rng = np.random.default_rng([seed, 1])
    dac = (CapDac.ideal(int(p["n_units"]), float(p["vdd"])) if sigma == 0
           else CapDac.with_mismatch(int(p["n_units"]), sigma, rng, float(p["vdd"])))
    adc = MemoryAdc(dac, AdcConfig(bits=bits, mode=AdcMode.SAR))
    sweep = midcell_sweep(n_codes * int(p["sweep_per_code"]), float(p["vdd"]))
    curve = transfer_curve(adc, sweep)
    result = dnl_inl(curve, n_codes)
    counts = np.bincount([c for _, c in curve], minlength=n_codes)
    rows = [(experiment, f"c{code:03d}", code, int(counts[code]),
             float(result.dnl[code]), float(result.inl[code]),
             code in result.missing_codes)
            for code in range(n_codes)]
    artifacts = [write_csv(
        outdir / "dnl_inl.csv",
        ["experiment", "case", "code", "count", "dnl", "inl", "missing"],
        rows)]
    artifacts.append(dnl_inl_figure(outdir / "dnl_inl.png", result.dnl, result.inl))
    extras = {"missing_codes": list(result.missing_codes),
              "max_abs_dnl": float(np.max(np.abs(result.dnl))),
              "max_abs_inl": float(np.max(np.abs(result.inl)))}
    return artifacts, extras


_RUNNERS = {
    "transform": run_transform,
    "crossbar": run_crossbar,
    "adc": run_adc,
    "asymsearch": run_asymsearch,
    "cost": run_cost,
    "dnl-inl": run_dnl_inl,
}


def run(subcommand: str, cfg: dict, outdir: Path) -> Path:
    """Run one subcommand (or all) and write the manifest; returns its path."""
    experiment = cfg["experiment"] or subcommand
    seed = cfg["seed"]
    rundir = outdir / experiment
    subs = list(_RUNNERS) if subcommand == "all" else [subcommand]
    artifacts: list[Path] = []
    extras: dict = {}
    for sub in subs:
        paths, extra = _RUNNERS[sub](cfg, seed, rundir, experiment)
        artifacts.extend(paths)
        if extra:
            extras[_section_name(sub)] = extra
    hashed = {k: v for k, v in cfg.items() if k != "experiment"}
    hashed["experiment"] = experiment
    manifest = {
        "experiment": experiment,
        "subcommand": subcommand,
        "seed": seed,
        "package_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config": hashed,
        "config_sha256": config_hash(hashed),
        "artifacts": sorted(p.name for p in artifacts),
        "extras": extras,
    }
    return write_manifest(rundir / f"manifest_{_section_name(subcommand)}.json",
                          manifest)


def _parse_args(argv) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="fdcim",
        description="Frequency-domain compute-in-memory experiment driver")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="YAML experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory "
                        f"(default: config, then ${OUTPUT_DIR_ENV}, then ./fdcim-out)")
    parser.add_argument("--experiment", help="experiment name (output subdirectory)")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        raw = _load_config_file(args.config) if args.config else {}
        cfg = effective_config(raw, args.seed, args.experiment)
        out = (args.out or raw.get("output_dir")
               or os.environ.get(OUTPUT_DIR_ENV) or "fdcim-out")
        if not isinstance(out, str):
            raise ConfigError("config key 'output_dir' must be a string")
        manifest = run(args.subcommand, cfg, Path(out))
        print(f"[{args.subcommand}] wrote {manifest.parent}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FdcimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
