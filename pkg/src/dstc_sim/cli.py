"""Command-line front end: key=value configs in, long-format CSV out.

Example::

    dstc-sim --mode ber-snr-sweep --code 3d --constellation qpsk --snr 0:2:20 --out runs/3d
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import capacity as cap
from . import detect
from .channel import NoiseSpec, ScenarioGeometry
from .constellation import get_constellation
from .sim import BerExperiment, required_snr, run_imbalance_sweep, run_snr_sweep
from .stc import CODES, effective_real_channel, get_code, realvec

MODES = ("capacity-sweep", "ber-snr-sweep", "ber-imbalance-sweep", "validate")
DEFAULT_SEED = 42

CAPACITY_COLUMNS = [
    "position_km", "scenario", "capacity_bps_hz", "std_err",
    "seed", "realizations", "noise_variance", "pathloss_exponent",
    "separation_km", "total_power_w", "min_distance_km",
]
BER_COLUMNS = [
    "code", "constellation", "snr_db", "imbalance_db", "bits", "errors", "ber",
    "seed", "max_codewords", "min_bit_errors", "batch_size", "codewords", "sphere_fallbacks",
]
VALIDATE_COLUMNS = ["check", "passed", "detail"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    code: str | None = None
    constellation: str = "qpsk"
    snr: list[float] = field(default_factory=list)
    imbalance: list[float] = field(default_factory=lambda: [0.0])
    positions: list[float] = field(default_factory=lambda: _parse_grid("0:0.5:10"))
    scenarios: list[str] = field(default_factory=lambda: [s.value for s in cap.Scenario])
    seed: int = DEFAULT_SEED
    out: str = "results"
    workers: int | None = None
    max_codewords: int = 10**7
    min_bit_errors: int = 400
    batch_size: int = 256
    realizations: int = 20_000
    noise_variance: float | None = None
    target_capacity: float = 1.5
    target_ber: float = 1e-3
    pathloss_exponent: float = 3.5
    separation_km: float = 10.0
    total_power_w: float = 10e3
    min_distance_km: float = 0.1
    validate_instances: int = 200


def _parse_grid(text: str) -> list[float]:
    """``a:b:c`` (start:step:stop, stop inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f"range step must be positive, got {step}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [float(round(start + i * step, 12)) for i in range(max(n, 0))]
    return [float(p) for p in text.split(",") if p.strip()]


def _int(text: str) -> int:
    return int(text, 0)


_CONVERTERS = {
    "mode": str, "code": str, "constellation": str, "out": str,
    "snr": _parse_grid, "imbalance": _parse_grid, "positions": _parse_grid,
    "scenarios": lambda t: [s.strip() for s in t.split(",") if s.strip()],
    "seed": _int, "workers": _int, "max_codewords": _int, "min_bit_errors": _int, "batch_size": _int,
    "realizations": _int, "validate_instances": _int,
    "noise_variance": float, "target_capacity": float, "target_ber": float,
    "pathloss_exponent": float, "separation_km": float, "total_power_w": float, "min_distance_km": float,
}


def parse_config(text: str = "", overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Build a config from ``key=value`` lines; ``overrides`` win over the file.

    Blank lines and ``#`` comments are ignored. Unknown keys, unparsable
    values and unknown code/constellation tokens raise :class:`ConfigError`
    naming the offending key and line.
    """
    raw: dict[str, tuple[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        raw[key] = (value, f"line {lineno}")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = (str(value), "command line")

    values = {}
    for key, (value, where) in raw.items():
        if key not in _CONVERTERS:
            raise ConfigError(f"{where}: unknown key {key!r}; valid keys: {', '.join(sorted(_CONVERTERS))}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{where}: cannot parse {key}={value!r}: {exc}") from None

    if "mode" not in values:
        raise ConfigError("missing required key 'mode'")
    cfg = ExperimentConfig(**values)
    _validate(cfg, raw)
    return cfg


def _validate(cfg: ExperimentConfig, raw) -> None:
    def where(key):
        return raw[key][1] if key in raw else "default"

    if cfg.mode not in MODES:
        raise ConfigError(f"{where('mode')}: unknown mode {cfg.mode!r}; valid: {', '.join(MODES)}")
    if cfg.code is not None and cfg.code not in CODES:
        raise ConfigError(f"{where('code')}: unknown code {cfg.code!r}; valid tokens: {', '.join(CODES)}")
    try:
        get_constellation(cfg.constellation)
    except ValueError as exc:
        raise ConfigError(f"{where('constellation')}: {exc}") from None
    for key in ("snr", "imbalance", "positions"):
        grid = getattr(cfg, key)
        if list(grid) != sorted(grid):
            raise ConfigError(f"{where(key)}: grid {key} must be sorted ascending")
    for s in cfg.scenarios:
        if s not in {x.value for x in cap.Scenario}:
            raise ConfigError(f"{where('scenarios')}: unknown scenario {s!r}")
    if cfg.mode.startswith("ber-"):
        if cfg.code is None:
            raise ConfigError(f"mode {cfg.mode} needs key 'code'")
        if not cfg.snr:
            raise ConfigError(f"mode {cfg.mode} needs key 'snr'")
    if cfg.mode == "capacity-sweep" and not cfg.positions:
        raise ConfigError("mode capacity-sweep needs key 'positions'")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _geometry(cfg: ExperimentConfig) -> ScenarioGeometry:
    return ScenarioGeometry(
        (0.0, cfg.separation_km), 0.0, cfg.pathloss_exponent, cfg.total_power_w, cfg.min_distance_km
    )


def run_capacity(cfg: ExperimentConfig) -> list[dict]:
    geo = _geometry(cfg)
    ccfg = cap.CapacityConfig(cfg.realizations)
    var = cfg.noise_variance
    if var is None:
        var = cap.calibrate_noise_variance(geo, ccfg, cfg.target_capacity, seed=cfg.seed)
        print(f"calibrated noise variance: {var:.6g} W (SFN midpoint = {cfg.target_capacity} bits/s/Hz)")
    rows = []
    for scenario in cfg.scenarios:
        for rec in cap.coverage_sweep(geo, scenario, NoiseSpec(var), ccfg, cfg.positions, seed=cfg.seed):
            rows.append({
                "position_km": rec.rx_position, "scenario": rec.scenario.value,
                "capacity_bps_hz": rec.capacity, "std_err": rec.std_error,
                "seed": cfg.seed, "realizations": cfg.realizations, "noise_variance": var,
                "pathloss_exponent": cfg.pathloss_exponent, "separation_km": cfg.separation_km,
                "total_power_w": cfg.total_power_w, "min_distance_km": cfg.min_distance_km,
            })
    return rows


def _experiment(cfg: ExperimentConfig) -> BerExperiment:
    return BerExperiment(
        cfg.code, cfg.constellation, tuple(cfg.snr), tuple(cfg.imbalance),
        cfg.max_codewords, cfg.min_bit_errors, cfg.seed, cfg.batch_size,
    )


def _ber_rows(cfg: ExperimentConfig, records) -> list[dict]:
    return [{
        "code": r.code, "constellation": r.constellation, "snr_db": r.snr_db,
        "imbalance_db": r.imbalance_db, "bits": r.bits_simulated, "errors": r.bit_errors,
        "ber": r.ber, "seed": cfg.seed, "max_codewords": cfg.max_codewords,
        "min_bit_errors": cfg.min_bit_errors, "batch_size": cfg.batch_size, "codewords": r.codewords,
        "sphere_fallbacks": r.sphere_fallbacks,
    } for r in records]


def run_ber(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """BER rows plus, for multi-SNR imbalance sweeps, required-SNR rows."""
    exp = _experiment(cfg)
    if cfg.mode == "ber-snr-sweep":
        records = []
        for imb in cfg.imbalance:
            records += run_snr_sweep(exp, cfg.workers, imbalance_db=imb)
        return _ber_rows(cfg, records), []
    if len(cfg.snr) == 1:
        return _ber_rows(cfg, run_imbalance_sweep(exp, cfg.snr[0], cfg.workers)), []
    records, req = [], []
    for imb in cfg.imbalance:
        recs = run_snr_sweep(exp, cfg.workers, imbalance_db=imb)
        records += recs
        req.append({"code": cfg.code, "constellation": cfg.constellation, "imbalance_db": imb,
                    "target_ber": cfg.target_ber, "required_snr_db": required_snr(recs, cfg.target_ber)})
    return _ber_rows(cfg, records), req


def run_validation(cfg: ExperimentConfig) -> list[dict]:
    """Oracle checks: sphere decoder vs brute force, capacity identities."""
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for name, code in CODES.items():
        for con_name in ("qpsk", "16qam"):
            con = get_constellation(con_name)
            if con.size**code.n_symbols > 2**16:
                continue
            mismatches = 0
            for i in range(cfg.validate_instances):
                snr = (0.0, 10.0, 20.0)[i % 3]
                h = (rng.standard_normal((code.n_rx, code.n_tx)) + 1j * rng.standard_normal((code.n_rx, code.n_tx))) / np.sqrt(2)
                s = con.points[rng.integers(con.size, size=code.n_symbols)]
                w = (rng.standard_normal((code.n_rx, code.n_slots)) + 1j * rng.standard_normal((code.n_rx, code.n_slots)))
                y = h @ code.encode(s) + w * np.sqrt(10 ** (-snr / 10) / 2)
                p = detect.DetectionProblem(effective_real_channel(code, h), realvec(y), con, code.n_symbols)
                if not np.array_equal(detect.sphere_decode(p), detect.ml_exhaustive(p)):
                    mismatches += 1
            rows.append({"check": f"sphere-vs-exhaustive/{name}/{con_name}", "passed": mismatches == 0,
                         "detail": f"{mismatches} mismatches in {cfg.validate_instances}"})

    ccfg = cap.CapacityConfig(cfg.realizations)
    rho = 4.0
    a = cap.capacity_mimo(1, 1, rho, ccfg, rng)
    b = cap.capacity_sfn(1.0, 0.0, rho, cap.CapacityConfig(cfg.realizations, power_split=(1.0, 0.0)), rng)
    gap = abs(a.mean - b.mean) / np.hypot(a.std_error, b.std_error)
    rows.append({"check": "capacity/mimo-1x1-vs-sfn", "passed": gap <= 3, "detail": f"{gap:.3f} standard errors"})
    a = cap.capacity_distributed(2, 2, 0.8, 0.0, rho, ccfg, rng)
    b = cap.capacity_mimo(2, 2, rho * 0.8 / 2, ccfg, rng)
    gap = abs(a.mean - b.mean) / np.hypot(a.std_error, b.std_error)
    rows.append({"check": "capacity/distributed-single-site", "passed": gap <= 3, "detail": f"{gap:.3f} standard errors"})
    ident = cap.capacity_mimo(2, 2, 2.0, channels=np.eye(2)).mean
    rows.append({"check": "capacity/identity-channel", "passed": abs(ident - 2.0) < 1e-12, "detail": f"{ident:.17g}"})
    return rows


def run(cfg: ExperimentConfig) -> int:
    """Run one configured experiment, write ``<out>/results.csv``, return an exit code."""
    out = Path(cfg.out)
    extra = []
    if cfg.mode == "capacity-sweep":
        columns, rows = CAPACITY_COLUMNS, run_capacity(cfg)
    elif cfg.mode == "validate":
        columns, rows = VALIDATE_COLUMNS, run_validation(cfg)
    else:
        rows, extra = run_ber(cfg)
        columns = BER_COLUMNS
    write_csv(out / "results.csv", columns, rows)
    if extra:
        write_csv(out / "required_snr.csv", list(extra[0]), extra)
    _print_table(columns[:7] if cfg.mode != "capacity-sweep" else columns[:4], rows)
    if cfg.mode == "validate":
        failed = [r["check"] for r in rows if not r["passed"]]
        print(f"validation: {len(rows) - len(failed)} passed, {len(failed)} failed")
        return 1 if failed else 0
    return 0


def _print_table(columns, rows) -> None:
    cells = [[_short(r[c]) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    print("  ".join(c.rjust(w) for c, w in zip(columns, widths)))
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))


def _short(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dstc-sim", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="key=value configuration file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--code", help=f"one of: {', '.join(CODES)}")
    p.add_argument("--constellation", help="qpsk or 16qam")
    p.add_argument("--snr", help="SNR grid in dB, start:step:stop or comma list")
    p.add_argument("--imbalance", help="site power ratio grid in dB")
    p.add_argument("--positions", help="receiver positions in km")
    p.add_argument("--seed", help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--out", help="output directory (default ./results)")
    p.add_argument("--workers", help="worker processes (default $DSTC_SIM_WORKERS or 1)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any other config key, repeatable")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        overrides = {k: getattr(args, k) for k in
                     ("mode", "code", "constellation", "snr", "imbalance", "positions", "seed", "out", "workers")}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        if overrides["workers"] is None and os.environ.get("DSTC_SIM_WORKERS"):
            overrides["workers"] = os.environ["DSTC_SIM_WORKERS"]
        cfg = parse_config(text, overrides)
        return run(cfg)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"dstc-sim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
