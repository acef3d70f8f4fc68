"""Monte Carlo BER/FER of network-coded bit recovery at the relay."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .channel import CsiMode, csi_view, draw_fading, noise_density, transmit_symbols
from .decoder import BPDecoder, DecoderState
from .ldpc_code import Encoder, ParityCheckMatrix
from .modem import Interleaver, bits_per_symbol, modulate, network_symbol_likelihoods, somap_from_network, super_symbol_likelihoods

log = logging.getLogger(__name__)

SCHEMA = "pnc_ldpc-ber/1"
CSV_COLUMNS = ["snr_db", "frames", "bit_errors", "ber", "frame_errors", "fer", "seed", "wall_time", "mean_iterations"]


class Feedback(str, Enum):
    BICM = "bicm"
    BICM_ID = "bicm-id"


@dataclass
class TrialConfig:
    H: ParityCheckMatrix
    m: int
    csi: CsiMode
    feedback: Feedback
    snrs: list[float]
    code_id: str = "code"
    max_frames: int = 1_000_000
    max_frame_errors: int | None = 100
    max_bit_errors: int | None = None
    iterations: int = 100
    seed: int = 0
    interleaver_seed: int = 0
    per_bit: bool = False
    early_exit: bool = True
    batch: int = 16
    workers: int = 1

    def __post_init__(self):
        self.csi = CsiMode(self.csi)
        self.feedback = Feedback(self.feedback)
        self.snrs = [float(s) for s in self.snrs]
        if not self.snrs:
            raise ValueError("SNR list is empty")
        if self.max_frames < 1 or self.iterations < 1 or self.batch < 1 or self.workers < 1:
            raise ValueError("frame, iteration, batch and worker limits must be positive")
        if self.H.n % bits_per_symbol(self.m):
            raise ValueError("codeword length is not a multiple of log2(M)")

    def identity(self) -> dict:
        """Everything that determines the per-point results (the SNR list excluded)."""
        digest = hashlib.sha256(self.H.rows.tobytes() + self.H.cols.tobytes()).hexdigest()
        return {
            "code_id": self.code_id,
            "matrix_sha256": digest,
            "n": self.H.n,
            "k": self.H.k,
            "m": self.m,
            "csi": self.csi.value,
            "feedback": self.feedback.value,
            "max_frames": self.max_frames,
            "max_frame_errors": self.max_frame_errors,
            "max_bit_errors": self.max_bit_errors,
            "iterations": self.iterations,
            "seed": self.seed,
            "interleaver_seed": self.interleaver_seed,
            "per_bit": self.per_bit,
            "early_exit": self.early_exit,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ResultRecord:
    snr_db: float
    frames: int
    bit_errors: int
    ber: float
    frame_errors: int
    fer: float
    seed: int
    wall_time: float = 0.0
    mean_iterations: float = 0.0

    def row(self) -> list:
        return [repr(self.snr_db), self.frames, self.bit_errors, repr(self.ber), self.frame_errors,
                repr(self.fer), self.seed, f"{self.wall_time:.3f}", f"{self.mean_iterations:.3f}"]

    def counts(self) -> tuple:
        """Fields that must be reproducible (telemetry excluded)."""
        return (self.snr_db, self.frames, self.bit_errors, self.ber, self.frame_errors, self.fer, self.seed)


def frame_rng(seed: int, snr_db: float, frame: int) -> np.random.Generator:
    return np.random.default_rng([seed, int(round((snr_db + 1000.0) * 1000)), frame])


@dataclass
class _Frames:
    """Per-frame outcomes of one chunk, in frame order."""

    bit_errors: np.ndarray
    iterations: np.ndarray


class RelayReceiver:
    """Transmit-and-detect chain for one code; reused across frames."""

    def __init__(self, config: TrialConfig):
        self.config = config
        self.H = config.H
        self.encoder = Encoder(config.H)
        self.decoder = BPDecoder(config.H)
        self.interleaver = Interleaver(config.H.n, config.interleaver_seed)

    def channel_frame(self, rng, n0):
        """Draw one frame; returns network-symbol log-likelihoods and the true u1 ^ u2."""
        cfg, H = self.config, self.H
        u = rng.integers(0, 2, size=(2, H.k))
        c = self.encoder.encode(u)
        b = self.interleaver.interleave(c)
        q = modulate(b, cfg.m)
        fading = draw_fading(q.shape[1], rng)
        y = transmit_symbols(q[0], q[1], cfg.m, fading, n0, rng)
        ll = super_symbol_likelihoods(y, csi_view(fading, cfg.csi), n0, cfg.m)
        return network_symbol_likelihoods(ll), u[0] ^ u[1]

    def _somap(self, ls, v):
        f, nq, m = ls.shape
        z = somap_from_network(ls.reshape(f * nq, m), v.reshape(-1))
        return self.interleaver.deinterleave(z.reshape(f, -1))

    def detect(self, ls: np.ndarray):
        """Iterative demodulation/decoding for a batch (F, Nq, M); returns posteriors and iteration counts."""
        cfg, dec = self.config, self.decoder
        frames = ls.shape[0]
        zp = self._somap(ls, np.zeros((frames, self.H.n)))
        c2v = np.zeros((frames, dec.num_edges))
        posterior = zp.copy()
        its = np.zeros(frames, dtype=np.int64)
        active = np.arange(frames)
        for it in range(cfg.iterations):
            if cfg.feedback is Feedback.BICM_ID and it > 0:
                # decoder extrinsic = posterior - channel input = sum of check messages
                v = self.interleaver.interleave(dec.column_sums(c2v[active]))
                zp[active] = self._somap(ls[active], v)
            sub = DecoderState(c2v[active])
            post = dec.iterate(sub, zp[active])
            c2v[active] = sub.c2v
            posterior[active] = post
            its[active] += 1
            if cfg.early_exit:
                ok = dec.converged(post)
                active = active[~ok]
                if active.size == 0:
                    break
        return posterior, its

    def run_frames(self, snr_db: float, frames) -> _Frames:
        cfg = self.config
        n0 = noise_density(snr_db, self.H.k / self.H.n, cfg.m, per_bit=cfg.per_bit)
        ls, truth = [], []
        for f in frames:
            a, b = self.channel_frame(frame_rng(cfg.seed, snr_db, int(f)), n0)
            ls.append(a)
            truth.append(b)
        posterior, its = self.detect(np.stack(ls))
        hard = (posterior[:, : self.H.k] > 0).astype(np.uint8)
        errors = (hard != np.stack(truth)).sum(axis=1)
        return _Frames(errors, its)


def _chunk_worker(args):
    config, snr_db, frames = args
    return RelayReceiver(config).run_frames(snr_db, frames)


def run_point(config: TrialConfig, snr_db: float, receiver: RelayReceiver | None = None) -> ResultRecord:
    """Simulate frames at one SNR until a stopping limit is hit.

    Frame ``f`` always uses the stream seeded by (seed, SNR, f), and limits
    are applied frame by frame in index order, so the record does not depend
    on batch size or worker count.
    """
    t0 = time.perf_counter()
    receiver = receiver or RelayReceiver(config)
    k = config.H.k
    frames = bit_err = frame_err = 0
    iters = 0
    next_frame = 0
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        while True:
            chunks = []
            for _ in range(config.workers):
                if next_frame >= config.max_frames:
                    break
                stop = min(next_frame + config.batch, config.max_frames)
                chunks.append(np.arange(next_frame, stop))
                next_frame = stop
            if not chunks:
                break
            if pool is None:
                outs = [receiver.run_frames(snr_db, c) for c in chunks]
            else:
                outs = list(pool.map(_chunk_worker, [(config, snr_db, c) for c in chunks]))
            finished = False
            for out in outs:
                for e, it in zip(out.bit_errors.tolist(), out.iterations.tolist()):
                    frames += 1
                    bit_err += e
                    frame_err += e > 0
                    iters += it
                    if _limit_reached(config, frames, bit_err, frame_err):
                        finished = True
                        break
                if finished:
                    break
            if finished:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    rec = ResultRecord(
        snr_db=float(snr_db),
        frames=frames,
        bit_errors=int(bit_err),
        ber=bit_err / (frames * k),
        frame_errors=int(frame_err),
        fer=frame_err / frames,
        seed=config.seed,
        wall_time=time.perf_counter() - t0,
        mean_iterations=iters / frames,
    )
    log.info("%.2f dB: %d frames, BER %.3e, FER %.3e", snr_db, frames, rec.ber, rec.fer)
    return rec


def _limit_reached(config, frames, bit_err, frame_err) -> bool:
    if frames >= config.max_frames:
        return True
    if config.max_frame_errors is not None and frame_err >= config.max_frame_errors:
        return True
    return config.max_bit_errors is not None and bit_err >= config.max_bit_errors


# --------------------------------------------------------------------------
# sweeps and result files
# --------------------------------------------------------------------------


def read_results(path) -> tuple[dict, list[ResultRecord]]:
    """Parse a result CSV; returns (header metadata, records)."""
    meta, records = {}, []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    key, val = part.split("=", 1)
                    meta[key] = val
        elif line.strip():
            body.append(line)
    if body and body[0].split(",")[0] == "snr_db":
        body = body[1:]
    for row in csv.reader(body):
        vals = dict(zip(CSV_COLUMNS, row))
        records.append(
            ResultRecord(
                snr_db=float(vals["snr_db"]),
                frames=int(vals["frames"]),
                bit_errors=int(vals["bit_errors"]),
                ber=float(vals["ber"]),
                frame_errors=int(vals["frame_errors"]),
                fer=float(vals["fer"]),
                seed=int(vals["seed"]),
                wall_time=float(vals.get("wall_time", 0) or 0),
                mean_iterations=float(vals.get("mean_iterations", 0) or 0),
            )
        )
    return meta, records


def _write_header(fh, config: TrialConfig) -> None:
    fh.write(f"# schema={SCHEMA}\n")
    fh.write(f"# config_sha256={config.config_hash()} seed={config.seed} code={config.code_id}\n")
    fh.write(",".join(CSV_COLUMNS) + "\n")


def run_sweep(config: TrialConfig, csv_path=None, json_path=None) -> list[ResultRecord]:
    """Run every SNR point in order; an existing CSV is resumed at the first missing point."""
    done: dict[float, ResultRecord] = {}
    if csv_path is not None and Path(csv_path).exists() and Path(csv_path).stat().st_size:
        meta, old = read_results(csv_path)
        if meta.get("config_sha256") != config.config_hash():
            raise ValueError(f"{csv_path} was produced by a different configuration")
        done = {round(r.snr_db, 9): r for r in old}
    elif csv_path is not None:
        with open(csv_path, "w") as fh:
            _write_header(fh, config)

    receiver = RelayReceiver(config)
    records = []
    for snr in config.snrs:
        key = round(snr, 9)
        if key in done:
            records.append(done[key])
            continue
        rec = run_point(config, snr, receiver)
        records.append(rec)
        if csv_path is not None:
            with open(csv_path, "a", newline="") as fh:
                csv.writer(fh).writerow(rec.row())
    if json_path is not None:
        payload = {
            "schema": SCHEMA,
            "config_sha256": config.config_hash(),
            "config": config.identity(),
            "records": [asdict(r) for r in records],
        }
        Path(json_path).write_text(json.dumps(payload, indent=2) + "\n")
    return records


def snr_at_ber(records: list[ResultRecord], target: float) -> float | None:
    """Eb/N0 where the BER curve crosses ``target`` (log-linear interpolation)."""
    pts = sorted((r.snr_db, r.ber) for r in records)
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        if b0 >= target > b1:
            if b1 <= 0:
                return s1
            t = (np.log10(b0) - np.log10(target)) / (np.log10(b0) - np.log10(b1))
            return float(s0 + t * (s1 - s0))
    return None
