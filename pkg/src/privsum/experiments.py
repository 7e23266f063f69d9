"""Node-count sweeps for the toy summation and private beamforming experiments.

All randomness for trial ``t`` at node count ``k`` flows from
``SeedSequence(seed, spawn_key=(k, t))``, so results per trial do not depend on
how many trials or node counts are configured, nor on ``jobs``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import wave
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .beamform import (Beamformer, input_snr_db, make_scene, output_snr, overlap_add, simulate_observations,
                       stft, transfer_vector)
from .code import make_rs_code
from .field import centered
from .network import build_tree, dump_topology, generate_network, select_task_subnet
from .protocol import make_error_plan, node_bound, run_dps
from .quantizer import OutOfRange, QuantizerConfig, levels_for_task, quantize

log = logging.getLogger(__name__)

CSV_HEADER = ("node_count", "metric_mean", "metric_std", "decode_rate", "trials")
MAX_RESEEDS = 50


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "toy"
    p: int = 251
    n: int = 64
    l: list = field(default_factory=lambda: [16, 32, 48])
    lam: int = 1
    node_counts: list = field(default_factory=lambda: list(range(1, 61)))
    trials: int = 200
    seed: int = 0
    network_size: int = 120
    arena_radius: float = 25.0
    comm_range: float = 10.0
    payload_len: int = 2
    # quantizer (beamform); levels = 0 sizes the quantizer for max(node_counts)
    levels: int = 0
    half_range: float = 0.0
    # scene (beamform)
    duration: float = 2.0
    sample_rate: int = 8000
    speed_of_sound: float = 343.0
    noise_var: float = 0.01
    source_power: float = 1.0
    interferer_power: float = 0.5
    interferer: bool = True
    loading: float = 1e-6
    out: str = "results"

    def validate(self) -> ExperimentConfig:
        if self.kind not in ("toy", "beamform"):
            raise ConfigError(f"kind must be toy or beamform, got {self.kind!r}")
        if not self.l:
            raise ConfigError("need at least one message length l")
        for l in self.l:
            make_rs_code(self.p, self.n, l)
        if self.kind == "beamform" and len(self.l) != 1:
            raise ConfigError("beamform takes a single l (the frame length)")
        if self.trials < 1 or self.lam < 0:
            raise ConfigError("trials must be >= 1 and lam >= 0")
        if any(k < 1 for k in self.node_counts):
            raise ConfigError("node counts must be >= 1")
        if self.node_counts and max(self.node_counts) > self.network_size:
            raise ConfigError("node counts exceed network_size")
        if self.kind == "toy" and any(self.payload_len > l for l in self.l):
            raise ConfigError("payload_len exceeds l")
        return self

    # --- text format: one "key = value" per line, '#' comments, lists comma-separated

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ", ".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
        cfg = dataclasses.replace(base) if base is not None else cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg.set(key, value)
        return cfg

    def set(self, key: str, value: str) -> None:
        types = {f.name: f for f in dataclasses.fields(self)}
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(self, key)
        try:
            if isinstance(current, list):
                parsed = _parse_int_list(value)
            elif isinstance(current, bool):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                parsed = value.lower() in ("true", "1", "yes")
            elif isinstance(current, int):
                parsed = int(value)
            elif isinstance(current, float):
                parsed = float(value)
            else:
                parsed = value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
        setattr(self, key, parsed)


def _parse_int_list(value: str) -> list:
    out = []
    for part in value.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def load_config(path, overrides=()) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = ExperimentConfig.from_text(text)
    for key, value in overrides:
        cfg.set(key, value)
    return cfg.validate()


def trial_seed(seed: int, node_count: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(node_count, trial))


@dataclass
class SweepResult:
    series: str
    node_counts: list
    metric: str
    values: dict  # node_count -> per-trial metric list
    decoded: dict  # node_count -> per-trial decode-success fraction

    def rows(self):
        for k in self.node_counts:
            vals = np.asarray(self.values[k], dtype=float)
            rate = float(np.mean(self.decoded[k]))
            yield k, float(np.mean(vals)), float(np.std(vals)), rate, len(vals)


def emit_csv(result: SweepResult | None, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    if result is not None:
        for k, mean, std, rate, trials in result.rows():
            writer.writerow([k, f"{mean:.12g}", f"{std:.12g}", f"{rate:.12g}", trials])
    try:
        Path(path).write_bytes(buf.getvalue().encode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# --- trials --------------------------------------------------------------------


def _task_geometry(cfg: ExperimentConfig, k: int, rng):
    """Network + query + subnet of exactly k nodes; disconnected draws are re-seeded."""
    for attempt in range(MAX_RESEEDS):
        net = generate_network(cfg.network_size, cfg.arena_radius, cfg.comm_range,
                               seed=int(rng.integers(2**63)))
        query = int(rng.integers(net.size))
        sub = select_task_subnet(net, query, k)
        if not sub.truncated:
            return net, sub, attempt
    raise RuntimeError(f"no connected {k}-node subnet after {MAX_RESEEDS} network draws")


def toy_trial(cfg: ExperimentConfig, k: int, t: int, trace=False):
    rng = np.random.default_rng(trial_seed(cfg.seed, k, t))
    net, sub, reseeds = _task_geometry(cfg, k, rng)
    tree = build_tree(sub)
    p = cfg.p
    out = {"reseeds": reseeds, "series": {}, "trace": {}, "topology": (net, sub, tree) if t == 0 else None}
    for l in cfg.l:
        code = make_rs_code(p, cfg.n, l)
        msgs = rng.integers(0, p, size=(k, l))
        plan = make_error_plan(cfg.n, p, cfg.lam, sub.members, seed=int(rng.integers(2**63)))
        res = run_dps(sub, tree, msgs, code, plan, trace=trace)
        truth = msgs.sum(axis=0) % p
        diff = centered(res.message[: cfg.payload_len] - truth[: cfg.payload_len], p)
        correct = bool(np.array_equal(res.message, truth))
        out["series"][f"l{l}"] = (float(np.mean(diff.astype(float) ** 2)), float(correct))
        out["trace"][f"l{l}"] = res.trace
    return out


def beamform_trial(cfg: ExperimentConfig, k: int, t: int, trace=False, keep_audio=False):
    rng = np.random.default_rng(trial_seed(cfg.seed, k, t))
    net, sub, reseeds = _task_geometry(cfg, k, rng)
    tree = build_tree(sub)
    l = cfg.l[0]
    code = make_rs_code(cfg.p, cfg.n, l)
    hop = l // 2
    pos = net.positions[list(sub.members)]
    scene = make_scene(cfg.duration, cfg.arena_radius, seed=int(rng.integers(2**63)), noise_var=cfg.noise_var,
                       source_power=cfg.source_power, interferer_power=cfg.interferer_power,
                       interferer=cfg.interferer, sample_rate=cfg.sample_rate,
                       speed_of_sound=cfg.speed_of_sound)
    sig = simulate_observations(scene, pos, cfg.duration, seed=int(rng.integers(2**63)))
    length = sig.source.shape[1]
    Xs = stft(sig.source, l)
    Xr = stft(sig.interferer + sig.noise, l)
    d = transfer_vector(pos, scene.source_pos, l, cfg.sample_rate, cfg.speed_of_sound)
    levels = cfg.levels or levels_for_task(cfg.p, max(cfg.node_counts))
    n_frames = Xs.shape[1]
    plan_seed = int(rng.integers(2**63))
    out = {"reseeds": reseeds, "series": {}, "trace": {}, "notes": [], "audio": {},
           "topology": (net, sub, tree) if t == 0 else None, "interferer": scene.interferer_pos,
           "input_snr_db": input_snr_db(scene, pos[0], cfg.source_power,
                                        cfg.interferer_power if cfg.interferer else 0.0),
           "distortion": 0.0}
    for flavor in ("mvdr", "dsb"):
        bf = Beamformer(flavor, frame_len=l, loading=cfg.loading).fit(Xs + Xr, d)
        # |w^H d - 1| is already relative since the target is 1
        out["distortion"] = max(out["distortion"], float(np.max(bf.distortion_)))
        Us, Ur = bf.transform(Xs), bf.transform(Xr)
        U = Us + Ur
        clean = overlap_add(Us.sum(axis=0), hop, length)
        peak = float(np.max(np.abs(U))) or 1.0
        y = cfg.half_range or peak
        try:
            qcfg = QuantizerConfig(cfg.p, y, levels)
            msgs = quantize(qcfg, U)
        except OutOfRange:
            out["notes"].append(f"k={k} t={t} {flavor}: half_range {y:g} recalibrated to {peak:g}")
            qcfg = QuantizerConfig(cfg.p, peak, levels)
            msgs = quantize(qcfg, U)
        for tag, lam in (("private", cfg.lam), ("control", 0)):
            plan = make_error_plan(cfg.n, cfg.p, lam, sub.members, seed=plan_seed, frames=n_frames)
            res = run_dps(sub, tree, msgs, code, plan, quantizer=qcfg, trace=trace and tag == "private")
            enhanced = overlap_add(res.value, hop, length)
            name = f"{flavor}_{tag}"
            truth = msgs.sum(axis=0) % cfg.p
            frame_ok = np.all(res.message == truth, axis=-1)
            out["series"][name] = (output_snr(enhanced, clean), float(np.mean(frame_ok)))
            if res.trace:
                out["trace"][name] = res.trace
            if keep_audio:
                out["audio"][name] = enhanced
    return out


def _run_trials(fn, cfg: ExperimentConfig, jobs: int, **kw):
    tasks = [(k, t) for k in cfg.node_counts for t in range(cfg.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_call, [(fn, cfg, k, t, kw) for k, t in tasks]))
    else:
        outs = [fn(cfg, k, t, **kw) if t == 0 else fn(cfg, k, t) for k, t in tasks]
    return dict(zip(tasks, outs))


def _call(args):
    fn, cfg, k, t, kw = args
    return fn(cfg, k, t, **kw) if t == 0 else fn(cfg, k, t)


def _collect(cfg: ExperimentConfig, outs: dict, metric: str) -> dict:
    names = list(next(iter(outs.values()))["series"]) if outs else []
    results = {}
    for name in names:
        values = {k: [outs[(k, t)]["series"][name][0] for t in range(cfg.trials)] for k in cfg.node_counts}
        decoded = {k: [outs[(k, t)]["series"][name][1] for t in range(cfg.trials)] for k in cfg.node_counts}
        results[name] = SweepResult(name, list(cfg.node_counts), metric, values, decoded)
    return results


@dataclass
class RunOutput:
    config: ExperimentConfig
    results: dict
    manifest: dict
    trials: dict


def _manifest(cfg: ExperimentConfig, outs: dict) -> dict:
    codes = []
    for l in cfg.l:
        c = make_rs_code(cfg.p, cfg.n, l)
        codes.append({
            "l": l, "d": c.d, "radius": c.params.radius,
            "node_bound": node_bound(cfg.n, l, cfg.lam),
            "redundancy_pct": f"{100 * c.params.redundancy:.1f}",
        })
    man = {
        "version": __version__,
        "config": {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)},
        "codes": codes,
        "reseeds": sum(o["reseeds"] for o in outs.values()),
        "seed_scheme": "SeedSequence(seed, spawn_key=(node_count, trial))",
    }
    if cfg.kind == "beamform":
        man["quantizer_levels"] = cfg.levels or levels_for_task(cfg.p, max(cfg.node_counts))
        man["notes"] = [n for o in outs.values() for n in o["notes"]]
        man["max_distortion"] = max((o["distortion"] for o in outs.values()), default=0.0)
        man["interferer_positions"] = [
            [k, t, round(o["interferer"][0], 6), round(o["interferer"][1], 6)]
            for (k, t), o in outs.items() if o["interferer"] is not None
        ]
        man["input_snr_db"] = [[k, t, round(o["input_snr_db"], 6)] for (k, t), o in outs.items()]
    return man


def run_toy(cfg: ExperimentConfig, jobs: int = 1, trace: bool = False) -> RunOutput:
    if cfg.kind != "toy":
        raise ConfigError("run_toy needs kind = toy")
    outs = _run_trials(toy_trial, cfg, jobs, trace=trace)
    return RunOutput(cfg, _collect(cfg, outs, "mse"), _manifest(cfg, outs), outs)


def run_beamform(cfg: ExperimentConfig, jobs: int = 1, trace: bool = False, keep_audio: bool = False) -> RunOutput:
    if cfg.kind != "beamform":
        raise ConfigError("run_beamform needs kind = beamform")
    outs = _run_trials(beamform_trial, cfg, jobs, trace=trace, keep_audio=keep_audio)
    return RunOutput(cfg, _collect(cfg, outs, "snr_db"), _manifest(cfg, outs), outs)


def write_wav(path, signal, sample_rate: int = 8000) -> None:
    x = np.asarray(signal, dtype=float)
    peak = float(np.max(np.abs(x))) or 1.0
    pcm = np.round(x / peak * 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


def write_outputs(run: RunOutput, out_dir, trace=False, dump_topology_files=False, export_wav=False) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    names = list(run.results)
    for i, name in enumerate(names):
        path = out_dir / f"results_{name}.csv"
        emit_csv(run.results[name], path)
        written.append(path)
        if i == 0:
            emit_csv(run.results[name], out_dir / "results.csv")
            written.append(out_dir / "results.csv")
    if not names:
        emit_csv(None, out_dir / "results.csv")
        written.append(out_dir / "results.csv")
    man = out_dir / "manifest.json"
    man.write_text(json.dumps(run.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(man)
    for (k, t), o in run.trials.items():
        if t != 0:
            continue
        if trace and o["trace"]:
            path = out_dir / f"trace_n{k}.txt"
            with open(path, "w", encoding="utf-8") as fh:
                for name, lines in o["trace"].items():
                    fh.write(f"# series={name} node_count={k} trial=0\n")
                    fh.writelines(line + "\n" for line in lines)
            written.append(path)
        if dump_topology_files:
            path = out_dir / f"topology_n{k}.txt"
            net, sub, tree = o["topology"]
            with open(path, "w", encoding="utf-8") as fh:
                dump_topology(net, fh, sub, tree)
            written.append(path)
        if export_wav:
            for name, audio in o.get("audio", {}).items():
                path = out_dir / f"enhanced_{name}_n{k}.wav"
                write_wav(path, audio, run.config.sample_rate)
                written.append(path)
    return written
