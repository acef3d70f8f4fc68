"""Command line: gen-code, exit, optimize, ber.

Each subcommand reads an optional JSON config, applies flat override flags,
and writes its artifacts plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import CsiMode
from .exit import (
    CharacteristicCache,
    DetectorConfig,
    cnd_curve_inverse,
    exit_threshold,
    ia_grid,
    is_open_at,
    optimize_degrees,
    save_curves,
    snr_grid,
    vnd_curve,
)
from .ldpc_code import (
    CodeError,
    DegreeDistribution,
    load_alist,
    load_distribution,
    realize_matrix,
    save_alist,
    save_distribution,
    solve_free_counts,
    validate_distribution,
)
from .sim import Feedback, TrialConfig, run_sweep
from .standards import BASES, STANDARD_DISTRIBUTIONS, accumulator_for, standard_matrix

log = logging.getLogger("pnc_ldpc")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


# defaults per subcommand; a value of REQUIRED must come from the config or a flag
REQUIRED = object()

_CODE_FIELDS = {"base": None, "distribution": None, "degrees": None, "standard": False}

DEFAULTS = {
    "gen-code": {**_CODE_FIELDS, "seed": 0, "avoid_4cycles": None},
    "exit": {
        **_CODE_FIELDS,
        "m": REQUIRED,
        "csi": REQUIRED,
        "snr_grid": REQUIRED,
        "snr": None,
        "length": None,
        "frames": 1,
        "per_bit": False,
        "seed": 0,
    },
    "optimize": {
        "base": REQUIRED,
        "m": REQUIRED,
        "csi": REQUIRED,
        "snr_grid": REQUIRED,
        "length": None,
        "frames": 1,
        "per_bit": False,
        "seed": 0,
        "limit": None,
        "top": 10,
    },
    "ber": {
        **_CODE_FIELDS,
        "alist": None,
        "code_seed": 0,
        "m": REQUIRED,
        "csi": REQUIRED,
        "feedback": "bicm-id",
        "snrs": REQUIRED,
        "max_frames": 1_000_000,
        "max_frame_errors": 100,
        "max_bit_errors": None,
        "iterations": 100,
        "seed": 0,
        "interleaver_seed": 0,
        "per_bit": False,
        "batch": 16,
        "workers": 1,
    },
}


@dataclass
class RunManifest:
    subcommand: str
    config_path: str | None
    output_dir: str
    seed: int
    overrides: dict
    config: dict
    config_sha256: str
    version: str = __version__
    created: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    def write(self) -> Path:
        path = Path(self.output_dir) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, default=str) + "\n")
        return path


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def resolve_config(command: str, path, overrides: dict) -> dict:
    defaults = DEFAULTS[command]
    cfg = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(raw) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config field(s) for {command}: {', '.join(unknown)}")
        cfg.update(raw)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    for key, val in defaults.items():
        if key not in cfg:
            if val is REQUIRED:
                raise ConfigError(f"missing config field '{key}'")
            cfg[key] = val
    _check_values(cfg)
    return cfg


def _check_values(cfg: dict) -> None:
    if cfg.get("base") is not None and cfg["base"] not in BASES:
        raise ConfigError(f"field 'base' must be one of {sorted(BASES)}, got {cfg['base']!r}")
    if "csi" in cfg:
        try:
            CsiMode(cfg["csi"])
        except ValueError:
            raise ConfigError(f"field 'csi' must be full, partial or none, got {cfg['csi']!r}") from None
    if "feedback" in cfg:
        try:
            Feedback(cfg["feedback"])
        except ValueError:
            raise ConfigError(f"field 'feedback' must be bicm or bicm-id, got {cfg['feedback']!r}") from None
    if "m" in cfg:
        m = cfg["m"]
        if not isinstance(m, int) or m < 2 or m & (m - 1):
            raise ConfigError(f"field 'm' must be a power of two >= 2, got {m!r}")
    if "snr_grid" in cfg:
        g = cfg["snr_grid"]
        if not (isinstance(g, list) and len(g) in (2, 3) and g[0] <= g[1]):
            raise ConfigError("field 'snr_grid' must be [lo, hi] or [lo, hi, step] with lo <= hi")
    if "snrs" in cfg:
        s = cfg["snrs"]
        if not isinstance(s, list) or not s:
            raise ConfigError("field 'snrs' must be a nonempty list")


def _grid(cfg) -> np.ndarray:
    lo, hi, *rest = cfg["snr_grid"]
    return snr_grid(lo, hi, rest[0] if rest else 0.1)


def resolve_distribution(cfg: dict) -> DegreeDistribution:
    """A distribution from a file/dict, a base plus free degree pair, or a base standard."""
    src = cfg.get("distribution")
    if src is not None:
        try:
            return DegreeDistribution.from_json(src) if isinstance(src, dict) else load_distribution(src)
        except (OSError, json.JSONDecodeError, CodeError) as exc:
            raise ConfigError(f"cannot read distribution: {exc}") from None
    base_name = cfg.get("base")
    if base_name is None:
        raise ConfigError("missing config field 'base' (or 'distribution')")
    base = BASES[base_name]
    if cfg.get("standard"):
        return STANDARD_DISTRIBUTIONS[base_name]
    degrees = cfg.get("degrees")
    if degrees is None:
        raise ConfigError("missing config field 'degrees' (or 'standard': true)")
    if len(degrees) != 2:
        raise ConfigError("field 'degrees' must hold the two free degrees")
    counts = solve_free_counts(base.fixed, tuple(degrees), base.n, base.k, base.dc)
    if counts is None:
        raise ConfigError(f"degrees {degrees} have no positive integer solution for base {base_name}")
    return base.distribution([(degrees[0], counts[0]), (degrees[1], counts[1])])


def _detector_config(cfg, rate, n) -> DetectorConfig:
    return DetectorConfig(
        m=cfg["m"],
        csi=cfg["csi"],
        rate=rate,
        length=cfg["length"] or n,
        frames=cfg["frames"],
        per_bit=cfg["per_bit"],
    )


def _tag(cfg_hash, seed) -> dict:
    return {"config_sha256": cfg_hash, "seed": seed}


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_gen_code(cfg, out: Path, cfg_hash) -> int:
    dist = resolve_distribution(cfg)
    report = validate_distribution(dist)
    print(report.summary())
    if not report.valid:
        return EXIT_FAIL
    if cfg.get("standard") and cfg.get("base"):
        H = standard_matrix(cfg["base"])
    else:
        acc = accumulator_for(cfg["base"]) if cfg.get("base") else None
        H = realize_matrix(dist, cfg["seed"], accumulator=acc, avoid_4cycles=cfg["avoid_4cycles"])
    save_alist(H, out / "code.alist")
    save_distribution(dist, out / "distribution.json")
    print(f"wrote {out / 'code.alist'}  ({H.m} x {H.n}, {H.num_edges} edges)")
    return EXIT_OK


def cmd_exit(cfg, out: Path, cfg_hash) -> int:
    dist = resolve_distribution(cfg)
    report = validate_distribution(dist)
    if not report.valid:
        print(report.summary())
        return EXIT_FAIL
    dcfg = _detector_config(cfg, dist.rate, dist.n)
    cache = CharacteristicCache(dcfg, cfg["seed"])
    tag = _tag(cfg_hash, cfg["seed"])
    ia = ia_grid(dcfg.grid_points)

    if cfg["snr"] is not None:
        # single point: characteristic, curves and the open/closed verdict
        snr = float(cfg["snr"][0] if isinstance(cfg["snr"], list) else cfg["snr"])
        char = cache(snr)
        char.save(out / "characteristic", tag)
        save_curves(out / "curves.csv", ia, vnd_curve(dist, char, ia), cnd_curve_inverse(dist.dc, ia), _comment(tag))
        verdict = {"snr_db": snr, "open": is_open_at(dist, char), "label": dist.label(), **tag}
        (out / "verdict.json").write_text(json.dumps(verdict, indent=2) + "\n")
        print(f"{dist.label()} at {snr:.2f} dB: {'open' if verdict['open'] else 'closed'}")
        return EXIT_OK

    res = exit_threshold(dist, cache, _grid(cfg))
    (out / "threshold.json").write_text(json.dumps({**res.to_json(), **tag}, indent=2) + "\n")
    if res.threshold_db is None:
        print(f"{dist.label()}: tunnel closed over the whole grid")
    else:
        char = cache(res.threshold_db)
        char.save(out / "characteristic", tag)
        save_curves(out / "curves.csv", ia, vnd_curve(dist, char, ia), cnd_curve_inverse(dist.dc, ia), _comment(tag))
        print(f"{dist.label()}: threshold {res.threshold_db:.2f} dB")
    return EXIT_OK


def cmd_optimize(cfg, out: Path, cfg_hash) -> int:
    base = BASES[cfg["base"]]
    dcfg = _detector_config(cfg, base.rate, base.n)
    cache = CharacteristicCache(dcfg, cfg["seed"])
    ranked = optimize_degrees(base, cache, _grid(cfg), limit=cfg["limit"])
    tag = _tag(cfg_hash, cfg["seed"])
    with open(out / "ranking.csv", "w") as fh:
        fh.write(f"# {_comment(tag)}\n")
        fh.write("rank,threshold_db,distribution\n")
        for i, r in enumerate(ranked, 1):
            t = "" if r.threshold_db is None else f"{r.threshold_db:.2f}"
            fh.write(f"{i},{t},\"{r.dist.label()}\"\n")
    payload = {**tag, "base": base.name, "results": [r.to_json() for r in ranked]}
    (out / "ranking.json").write_text(json.dumps(payload, indent=2) + "\n")
    for i, r in enumerate(ranked[: cfg["top"]], 1):
        t = "none" if r.threshold_db is None else f"{r.threshold_db:.2f} dB"
        print(f"{i:3d}  {t:>9}  {r.dist.label()}")
    return EXIT_OK


def _ber_code(cfg):
    if cfg.get("alist"):
        k = BASES[cfg["base"]].k if cfg.get("base") else None
        try:
            return load_alist(cfg["alist"], k=k), Path(cfg["alist"]).stem
        except OSError as exc:
            raise ConfigError(f"cannot read alist: {exc}") from None
    dist = resolve_distribution(cfg)
    if cfg.get("standard"):
        return standard_matrix(cfg["base"]), f"{cfg['base']}-standard"
    acc = accumulator_for(cfg["base"]) if cfg.get("base") else None
    return realize_matrix(dist, cfg["code_seed"], accumulator=acc), dist.label()


def cmd_ber(cfg, out: Path, cfg_hash) -> int:
    H, code_id = _ber_code(cfg)
    trial = TrialConfig(
        H=H,
        m=cfg["m"],
        csi=cfg["csi"],
        feedback=cfg["feedback"],
        snrs=cfg["snrs"],
        code_id=code_id,
        max_frames=cfg["max_frames"],
        max_frame_errors=cfg["max_frame_errors"],
        max_bit_errors=cfg["max_bit_errors"],
        iterations=cfg["iterations"],
        seed=cfg["seed"],
        interleaver_seed=cfg["interleaver_seed"],
        per_bit=cfg["per_bit"],
        batch=cfg["batch"],
        workers=cfg["workers"],
    )
    records = run_sweep(trial, out / "ber.csv", out / "ber.json")
    for r in records:
        print(f"{r.snr_db:6.2f} dB  frames {r.frames:7d}  BER {r.ber:.3e}  FER {r.fer:.3e}")
    return EXIT_OK


def _comment(tag) -> str:
    return " ".join(f"{k}={v}" for k, v in tag.items())


COMMANDS = {"gen-code": cmd_gen_code, "exit": cmd_exit, "optimize": cmd_optimize, "ber": cmd_ber}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnc-ldpc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", nargs="?", help="JSON config file")
        s.add_argument("--out", default=f"runs/{name}", help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
        s.add_argument("--base", choices=sorted(BASES))
        if name in ("gen-code", "exit", "ber"):
            s.add_argument("--distribution", help="distribution JSON file")
            s.add_argument("--degrees", type=int, nargs=2, metavar=("DA", "DB"), help="free degree pair")
            s.add_argument("--standard", action="store_true", default=None, help="use the base standard's code")
        if name in ("exit", "optimize", "ber"):
            s.add_argument("--csi", choices=[c.value for c in CsiMode])
            s.add_argument("--mod-order", dest="m", type=int)
            s.add_argument("--per-bit", action="store_true", default=None, help="N0 with log2(M) in place of M")
        if name in ("exit", "ber"):
            s.add_argument("--snr", type=float, nargs="+")
        if name == "ber":
            s.add_argument("--feedback", choices=[f.value for f in Feedback])
            s.add_argument("--alist")
        s.add_argument("--workers", type=int)
    return p


def _overrides(args) -> dict:
    skip = {"command", "config", "out", "dry_run", "verbose"}
    ov = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if args.command == "ber" and "snr" in ov:
        ov["snrs"] = ov.pop("snr")
    if args.command == "exit" and "snr" in ov:
        ov["snr"] = ov["snr"][0]
    if args.command != "ber":
        ov.pop("workers", None)  # threshold engines run single-process
    return ov


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = _overrides(args)
    try:
        cfg = resolve_config(args.command, args.config, overrides)
        if "distribution" in DEFAULTS[args.command] and not cfg.get("alist"):
            resolve_distribution(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg_hash = config_hash(cfg)
    if args.dry_run:
        print(json.dumps({"command": args.command, "config_sha256": cfg_hash, "config": cfg}, indent=2, default=str))
        return EXIT_OK

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(args.command, args.config, str(out), cfg.get("seed", 0), overrides, cfg, cfg_hash)
        manifest.write()
        return COMMANDS[args.command](cfg, out, cfg_hash)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
