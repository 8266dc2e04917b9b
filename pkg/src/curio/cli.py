"""Command-line entry point: ``curio {simulate,decode,validate,analyze}``."""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import logging
import os
import re
import sys
import tempfile
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, baselines, ifep, pipeline, sim
from .config import ConfigError, RunConfig, load_config
from .core import replay
from .particles import DegenerateLikelihoodError

log = logging.getLogger("curio")

SESSION_NAME = re.compile(r"^(?P<pid>.+?)[_-]task(?P<task>[123])$")


class InvariantError(RuntimeError):
    pass


# -- helpers -------------------------------------------------------------------


def atomic_write(path: Path, writer) -> None:
    """Call ``writer(fh)`` on a temp file next to ``path`` then rename it in place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj) -> None:
    atomic_write(path, lambda fh: fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def write_manifest(out: Path, command: str, cfg: RunConfig, artifacts: list) -> None:
    write_json(out / "manifest.json", {"command": command, "config": cfg.resolved(),
                                       "seed": cfg.seed, "artifacts": sorted(artifacts)})


def derived_seed(master: int, *keys) -> int:
    """Stable 63-bit seed from a master seed and string/int keys."""
    entropy = [master] + [zlib.crc32(str(k).encode()) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(2, np.uint64)[0] >> np.uint64(1))


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _curiosity(cfg: RunConfig):
    if cfg.curiosity_mode == "sinusoid":
        return sim.Sinusoid(cfg.curiosity_amplitude, cfg.curiosity_cycles)
    if cfg.curiosity_mode == "constant":
        return sim.Constant(cfg.curiosity_constant)
    return sim.RandomWalk(cfg.epsilon_c, cfg.curiosity_constant)


def _sim_config(cfg: RunConfig, seed: int) -> sim.SimConfig:
    return sim.SimConfig(trials=cfg.trials, params=cfg.model_params(),
                         curiosity=_curiosity(cfg), seed=seed)


def check_decoded(traj, n_particles: int) -> None:
    if np.any(traj.curiosity_sd < 0):
        raise InvariantError("negative posterior SD")
    if np.any(traj.p_sick <= 0) or np.any(traj.p_sick >= 1):
        raise InvariantError("decoded probability outside (0, 1)")
    if np.any(traj.ess < 1 - 1e-9) or np.any(traj.ess > n_particles + 1e-6):
        raise InvariantError("effective sample size outside [1, n_particles]")


# -- commands ------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, out: Path) -> list:
    trace = sim.simulate_recu(_sim_config(cfg, cfg.seed))
    session = sim.synthetic_session(trace, rate_hz=cfg.sample_rate_hz, window_s=cfg.window_s)
    atomic_write(out / "sim_trace.csv", trace.write_csv)
    atomic_write(out / "session.csv", lambda fh: pipeline.write_session_csv(fh, session))
    return ["sim_trace.csv", "session.csv"]


def _session_key(path: Path):
    m = SESSION_NAME.match(path.stem)
    if m:
        return m.group("pid"), int(m.group("task"))
    return path.stem, 1


def _expand_sessions(cfg: RunConfig) -> list:
    paths = []
    for item in cfg.sessions:
        if any(ch in item for ch in "*?["):
            paths.extend(Path(m) for m in sorted(glob.glob(item)))
        else:
            paths.append(Path(item))
    if not paths:
        raise ConfigError("decode needs at least one session CSV (config key 'sessions')")
    for p in paths:
        if not p.exists():
            raise FileNotFoundError(str(p))
    return paths


def _decode_one(job):
    pid, records, cfg_dict, decoder, seed = job
    cfg = RunConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg_dict.items()})
    dcfg = cfg.decoder_config(seed=seed)
    if decoder == "ifep":
        traj = ifep.decode(records, dcfg)
        if cfg.check_invariants:
            check_decoded(traj, dcfg.n_particles)
    elif decoder == "subjective":
        traj = baselines.decode_subjective(records, dcfg)
    else:
        traj = baselines.decode_qlearning(records, dcfg)
    buf = io.StringIO()
    traj.write_csv(buf)
    return pid, buf.getvalue()


def cmd_decode(cfg: RunConfig, out: Path) -> list:
    rows = []
    by_pid = {}
    for path in _expand_sessions(cfg):
        pid, task = _session_key(path)
        session = pipeline.read_session_csv(path, pid, task)
        try:
            windows = pipeline.process_session(session, cfg.window_s, cfg.speed_threshold, cfg.msdv_threshold)
        except ValueError as exc:
            raise pipeline.CSVFormatError(path, 0, str(exc)) from None
        rows.extend((pid, task, w) for w in windows)
        by_pid.setdefault(pid, []).append((task, windows))
    rows.sort(key=lambda r: (r[0], r[1], r[2].index))
    atomic_write(out / "trials.csv", lambda fh: pipeline.write_trials_csv(fh, rows))

    jobs = []
    for pid in sorted(by_pid):
        records = [w.to_record() for _, ws in sorted(by_pid[pid], key=lambda x: x[0]) for w in ws]
        jobs.append((pid, records, cfg.resolved(), cfg.decoder, derived_seed(cfg.seed, pid)))
    artifacts = ["trials.csv"]
    for pid, text in _map(_decode_one, jobs, cfg.workers):
        name = f"decoded_{pid}.csv" if cfg.decoder == "ifep" else f"decoded_{cfg.decoder}_{pid}.csv"
        atomic_write(out / name, lambda fh, text=text: fh.write(text))
        artifacts.append(name)
        log.info("decoded %s -> %s", pid, name)
    return artifacts


def _validate_one(job):
    cfg_dict, eps, s = job
    cfg = RunConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg_dict.items()})
    sim_seed = derived_seed(cfg.seed, "simulate", s)
    trace = sim.simulate_recu(_sim_config(cfg, sim_seed))
    dcfg = cfg.decoder_config(epsilon_c=eps, seed=derived_seed(cfg.seed, "decode", eps, s))
    traj = ifep.decode(trace.to_trials(), dcfg)
    if cfg.check_invariants:
        check_decoded(traj, dcfg.n_particles)
    return {"epsilon": eps, "seed": s,
            "rmse": ifep.rmse(traj.curiosity_mean, trace.c),
            "corr": ifep.pearson(traj.curiosity_mean, trace.c)}


RMSE_COLUMNS = ("epsilon", "seed", "rmse", "corr")


def cmd_validate(cfg: RunConfig, out: Path) -> list:
    jobs = [(cfg.resolved(), float(eps), s) for eps in cfg.epsilons for s in range(cfg.n_seeds)]
    results = _map(_validate_one, jobs, cfg.workers)

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RMSE_COLUMNS)
        for r in results:
            w.writerow([format(r["epsilon"], "g"), r["seed"], format(r["rmse"], ".12g"),
                        format(r["corr"], ".12g")])

    atomic_write(out / "rmse_sweep.csv", write)
    for eps in cfg.epsilons:
        sel = [r for r in results if r["epsilon"] == eps]
        log.info("epsilon=%g median rmse=%.3f median corr=%.3f", eps,
                 np.median([r["rmse"] for r in sel]), np.median([r["corr"] for r in sel]))
    return ["rmse_sweep.csv"]


def _read_rmse(path: Path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{"epsilon": float(r["epsilon"]), "seed": int(r["seed"]), "rmse": float(r["rmse"]),
                 "corr": float(r["corr"])} for r in csv.DictReader(fh)]


def _participant_severity(ssq_records: dict, pid: str):
    scores = [rec.score for (p, _), rec in ssq_records.items() if p == pid]
    if not scores:
        return None
    return pipeline.ssq(0.0, float(np.mean(scores))).severity.value


def cmd_analyze(cfg: RunConfig, out: Path) -> list:
    src = Path(cfg.input_dir) if cfg.input_dir else out
    trials_path = src / "trials.csv"
    if not trials_path.exists():
        raise FileNotFoundError(str(trials_path))
    trials = pipeline.read_trials_csv(trials_path)
    ssq_records = pipeline.read_ssq_csv(cfg.ssq) if cfg.ssq else {}
    params = cfg.model_params()
    decodes = []
    for pid in sorted(trials):
        path = src / f"decoded_{pid}.csv"
        if not path.exists():
            raise FileNotFoundError(str(path))
        with open(path, newline="", encoding="utf-8") as fh:
            try:
                traj = ifep.read_decoded_csv(fh)
            except ValueError as exc:
                raise pipeline.CSVFormatError(path, 1, str(exc)) from None
        rep = replay(trials[pid], params)
        actions = np.array([int(t.action) for t in trials[pid]])
        info = rep.expected_info[np.arange(len(actions)), actions]
        if len(info) != len(traj):
            raise pipeline.CSVFormatError(path, 0, "trajectory length does not match trials.csv")
        decodes.append(analysis.ParticipantDecode(pid, traj.curiosity_mean, info,
                                                  _participant_severity(ssq_records, pid)))
    rmse_path = src / "rmse_sweep.csv"
    rmse_rows = _read_rmse(rmse_path) if rmse_path.exists() else None
    rcfg = analysis.ReportConfig(max_lag=cfg.max_lag, sample_rate_hz=cfg.sample_rate_hz,
                                 extra={"run": cfg.resolved()})
    report = analysis.build_report(decodes, rcfg, rmse_rows)
    write_json(out / "report.json", report.to_dict())
    artifacts = ["report.json"]
    for block in report.participants:
        name = f"lagcorr_{block['participant_id']}.csv"

        def write(fh, block=block):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("lag", "r_curiosity", "r_derivative"))
            for k, rc, rd in zip(block["curiosity"]["lags"], block["curiosity"]["r"], block["derivative"]["r"]):
                w.writerow([k, format(rc, ".12g"), format(rd, ".12g")])

        atomic_write(out / name, write)
        artifacts.append(name)
    if report.chi_square:
        chi = report.chi_square

        def write_chi(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("chi2", "dof", "p", "cramers_v"))
            w.writerow([format(chi["chi2"], ".12g"), chi["dof"], format(chi["p"], ".12g"),
                        format(chi["cramers_v"], ".12g")])

        atomic_write(out / "chi_square.csv", write_chi)
        artifacts.append("chi_square.csv")
    return artifacts


COMMANDS = {"simulate": cmd_simulate, "decode": cmd_decode,
            "validate": cmd_validate, "analyze": cmd_analyze}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curio", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--decoder", choices=("ifep", "subjective", "qlearning"))
    parser.add_argument("--quiet", action="store_true")
    return parser


def _error(kind: str, message: str, file=None) -> None:
    payload = {"error": kind, "message": message}
    if file:
        payload["file"] = str(file)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).override(seed=args.seed, out=args.out, decoder=args.decoder)
    except (ConfigError, TypeError) as exc:
        _error("config", str(exc), args.config)
        return 2
    out = Path(cfg.out)
    try:
        artifacts = COMMANDS[args.command](cfg, out)
        write_manifest(out, args.command, cfg, artifacts)
    except ConfigError as exc:
        _error("config", str(exc), args.config)
        return 2
    except pipeline.CSVFormatError as exc:
        _error("csv", str(exc), exc.path)
        return 1
    except FileNotFoundError as exc:
        _error("missing_file", f"no such file: {exc.filename or exc}", exc.filename or str(exc))
        return 1
    except DegenerateLikelihoodError as exc:
        _error("degenerate_likelihood", str(exc))
        return 1
    except InvariantError as exc:
        _error("invariant", str(exc))
        return 3
    except ValueError as exc:
        _error("value", str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
