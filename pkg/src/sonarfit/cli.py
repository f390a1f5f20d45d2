"""Command-line pipeline: simulate -> featurize -> split -> train -> eval -> report.

Configuration lives in one YAML document; any value can be overridden on
the command line with dotted key=value pairs (e.g. ``train.epochs=50``).
Unknown keys are rejected and the fully resolved config is logged to
stderr on every run. Each stage writes a manifest carrying the hash of
the config slice it depends on, so re-running an unchanged stage is a
no-op unless ``--force`` is given.

Exit codes: 0 success, 2 config error, 3 data I/O error, 4 numeric error.

Set SONARFIT_THREADS to pin the BLAS/OpenMP thread count; it is applied
before numpy is first imported.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_STAGES = ("simulate", "featurize", "split", "train", "eval", "report")

DEFAULT_CONFIG: dict = {
    "workspace": "runs/default",
    "seed": 0,
    "simulate": {
        "lab_subjects": ["L1"],
        "lab_sessions": 8,
        "field_subjects": ["P1", "P2"],
        "field_sessions": 8,
        "target_duration_s": 30.0,
        "reps_per_session": 10,
        "gap_s": [3.0, 6.0],
        "subject_jitter": True,
        "lab_shift": {
            "gain_db": 0.0,
            "noise_floor_db": -80.0,
            "attenuation_tilt": 0.0,
            "speed_scale": 1.0,
            "seed": 0,
        },
        "field_shift": {
            "gain_db": -18.0,
            "noise_floor_db": -42.0,
            "attenuation_tilt": 3.5,
            "speed_scale": 1.22,
            "seed": 1,
        },
    },
    "featurize": {
        "window_len": 12250,
        "hop": 2048,
        "fft_len": 16384,
        "band_low_hz": 19500.0,
        "band_high_hz": 20500.0,
    },
    "split": {
        "dev_sessions": 4,
    },
    "train": {
        "method": "baseline",
        "epochs": None,
        "lr": None,
        "per_class": None,
        "n_way": None,
        "k_shot": None,
        "q_query": None,
        "label_ratio": None,
        "mmd_weight": None,
        "allow_any_ratio": False,
    },
    "eval": {
        "supports": [5, 10],
        "iterations": 100,
        "pooled_supports": False,
    },
}


def _configure_threads() -> None:
    n = os.environ.get("SONARFIT_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _merge(base: dict, patch: dict, path: str = "") -> None:
    """Recursive merge of ``patch`` into ``base``; unknown keys rejected."""
    for key, value in patch.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ValueError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, where)
        else:
            base[key] = value


def load_config(path: str | None, overrides: list[str]) -> dict:
    import yaml

    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        doc = yaml.safe_load(Path(path).read_text())
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: config root must be a mapping")
        _merge(cfg, doc)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        node = cfg
        for key in keys[:-1]:
            if not isinstance(node, dict) or key not in node:
                raise ValueError(f"unknown config key: {dotted}")
            node = node[key]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ValueError(f"unknown config key: {dotted}")
        node[keys[-1]] = yaml.safe_load(raw)
    return cfg


def _stage_hash(cfg: dict, stage: str) -> str:
    """Hash of the config slices a stage depends on (cumulative chain)."""
    chain = ["seed"] + list(_STAGES[: _STAGES.index(stage) + 1])
    doc = {name: cfg.get(name) for name in chain if name in cfg or name == "seed"}
    doc["seed"] = cfg["seed"]
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _manifest_path(ws: Path, stage: str) -> Path:
    return ws / f"{stage}.manifest.json"


def _stage_done(ws: Path, stage: str, digest: str, force: bool) -> bool:
    mp = _manifest_path(ws, stage)
    if force or not mp.exists():
        return False
    try:
        doc = json.loads(mp.read_text())
    except json.JSONDecodeError:
        return False
    return doc.get("hash") == digest


def _write_manifest(ws: Path, stage: str, digest: str, extra: dict) -> None:
    doc = {"stage": stage, "hash": digest}
    doc.update(extra)
    _manifest_path(ws, stage).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ----------------------------------------------------------------- stages


def cmd_simulate(cfg: dict, force: bool) -> int:
    from .sim import (DomainShiftConfig, build_domain_corpus,
                      derive_subject_shifts, load_profiles, save_clip)

    ws = Path(cfg["workspace"])
    digest = _stage_hash(cfg, "simulate")
    if _stage_done(ws, "simulate", digest, force):
        _log(f"simulate: up to date ({digest})")
        return EXIT_OK
    ws.mkdir(parents=True, exist_ok=True)
    sim = cfg["simulate"]
    profiles = load_profiles()
    files = []

    def render(subject: str, domain: str, shift: DomainShiftConfig, sessions: int, seed: int):
        clips = build_domain_corpus(
            profiles, shift, sessions=sessions,
            reps_per_session=sim["reps_per_session"], seed=seed,
            subject=subject, domain=domain, gap_s=tuple(sim["gap_s"]),
            target_duration_s=sim["target_duration_s"],
        )
        out_dir = ws / "clips" / domain
        out_dir.mkdir(parents=True, exist_ok=True)
        for clip in clips:
            path = out_dir / f"{subject}-s{clip.session:02d}.sfit"
            save_clip(clip, path)
            files.append(str(path.relative_to(ws)))

    lab_shift = DomainShiftConfig(**sim["lab_shift"])
    for i, subject in enumerate(sim["lab_subjects"]):
        render(subject, "lab", lab_shift, sim["lab_sessions"],
               seed=cfg["seed"] + 1000 * i)

    base_field = DomainShiftConfig(**sim["field_shift"])
    field_subjects = list(sim["field_subjects"])
    if sim["subject_jitter"]:
        shifts = derive_subject_shifts(base_field, len(field_subjects), seed=cfg["seed"])
    else:
        shifts = [base_field] * len(field_subjects)
    for i, (subject, shift) in enumerate(zip(field_subjects, shifts)):
        render(subject, "field", shift, sim["field_sessions"],
               seed=cfg["seed"] + 1000 * (i + len(sim["lab_subjects"])))

    _write_manifest(ws, "simulate", digest, {"files": sorted(files)})
    _log(f"simulate: wrote {len(files)} clips under {ws / 'clips'}")
    return EXIT_OK


def _stft_config(cfg: dict):
    from .dsp import StftConfig

    return StftConfig(**cfg["featurize"])


def cmd_featurize(cfg: dict, force: bool) -> int:
    from .dsp import featurize_clips, save_windows
    from .sim import load_clip

    ws = Path(cfg["workspace"])
    digest = _stage_hash(cfg, "featurize")
    if _stage_done(ws, "featurize", digest, force):
        _log(f"featurize: up to date ({digest})")
        return EXIT_OK
    sim_manifest = _manifest_path(ws, "simulate")
    if not sim_manifest.exists():
        raise FileNotFoundError(f"{sim_manifest}: run simulate first")
    clip_files = json.loads(sim_manifest.read_text())["files"]
    stft_cfg = _stft_config(cfg)

    by_domain: dict[str, list] = {}
    for rel in clip_files:
        clip = load_clip(ws / rel)
        by_domain.setdefault(clip.domain, []).append(clip)

    out_dir = ws / "windows"
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = {}
    for domain in sorted(by_domain):
        windows = featurize_clips(by_domain[domain], stft_cfg)
        if not windows:
            raise ValueError(f"domain {domain}: no windows produced; clips too short?")
        save_windows(windows, out_dir / f"{domain}.swd")
        counts[domain] = len(windows)
    _write_manifest(ws, "featurize", digest, {"counts": counts})
    _log(f"featurize: {counts}")
    return EXIT_OK


def _load_domain_windows(ws: Path):
    from .dsp import load_windows

    lab_path = ws / "windows" / "lab.swd"
    field_path = ws / "windows" / "field.swd"
    for p in (lab_path, field_path):
        if not p.exists():
            raise FileNotFoundError(f"{p}: run featurize first")
    return load_windows(lab_path), load_windows(field_path)


def cmd_split(cfg: dict, force: bool) -> int:
    from .data import make_split, save_split_assignment

    ws = Path(cfg["workspace"])
    digest = _stage_hash(cfg, "split")
    if _stage_done(ws, "split", digest, force):
        _log(f"split: up to date ({digest})")
        return EXIT_OK
    lab, field = _load_domain_windows(ws)
    split = make_split(lab, field, seed=cfg["seed"],
                       dev_sessions=cfg["split"]["dev_sessions"])
    save_split_assignment(split, ws / "split.json")
    _write_manifest(ws, "split", digest, {
        "counts": {
            "basic_training": len(split.basic_training),
            "subject_development": len(split.subject_development),
            "testing": len(split.testing),
        },
    })
    _log(f"split: dev {len(split.subject_development)} / test {len(split.testing)} windows")
    return EXIT_OK


def _experiment_config(cfg: dict):
    from .harness import make_config

    section = cfg["train"]
    overrides = {k: v for k, v in section.items()
                 if k != "method" and v is not None and v is not False}
    if section.get("allow_any_ratio"):
        overrides["allow_any_ratio"] = True
    overrides["seed"] = cfg["seed"]
    overrides["eval_supports"] = tuple(cfg["eval"]["supports"])
    overrides["eval_iterations"] = cfg["eval"]["iterations"]
    if cfg["eval"]["pooled_supports"]:
        overrides["pooled_supports"] = True
    overrides["out_dir"] = str(Path(cfg["workspace"]) / "models")
    return make_config(section["method"], **overrides)


def _rebuild_split(cfg: dict):
    from .data import load_split_assignment

    ws = Path(cfg["workspace"])
    split_path = ws / "split.json"
    if not split_path.exists():
        raise FileNotFoundError(f"{split_path}: run split first")
    lab, field = _load_domain_windows(ws)
    return load_split_assignment(split_path, lab, field)


def cmd_train(cfg: dict, force: bool) -> int:
    from .harness import config_hash, train

    ws = Path(cfg["workspace"])
    exp = _experiment_config(cfg)
    tag = config_hash(exp)
    ckpt = ws / "models" / f"{exp.method}-{tag}.ckpt"
    if ckpt.exists() and not force:
        _log(f"train: checkpoint {ckpt} exists; skipping (use --force to retrain)")
        return EXIT_OK
    split = _rebuild_split(cfg)
    result = train(exp, split)
    last = result.history["loss"][-1] if result.history["loss"] else float("nan")
    _log(f"train: {exp.method} {exp.epochs} epochs, final loss {last:.4f}, "
         f"checkpoint {result.checkpoint_path}")
    return EXIT_OK


def cmd_eval(cfg: dict, force: bool) -> int:
    from .harness import (config_hash, embed_pools, evaluate_closed,
                          evaluate_fewshot, load_trained)

    ws = Path(cfg["workspace"])
    exp = _experiment_config(cfg)
    tag = config_hash(exp)
    ckpt = ws / "models" / f"{exp.method}-{tag}.ckpt"
    if not ckpt.exists():
        raise FileNotFoundError(f"{ckpt}: run train first")
    split = _rebuild_split(cfg)
    _, frames, bins = split.basic_training.features.shape
    model, _meta = load_trained(ckpt, frames, bins)

    tables = []
    if exp.method in ("baseline", "da"):
        tables.append(evaluate_closed(model, split.testing, exp))
    else:
        cache = embed_pools(model, split.subject_development, split.testing)
        for k in exp.eval_supports:
            tables.append(evaluate_fewshot(
                model, split.subject_development, split.testing,
                k=k, cfg=exp, embeddings=cache,
            ))
    out_dir = ws / "results" / "tables"
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, table in enumerate(tables):
        path = out_dir / f"{exp.method}-{tag}-{i}.json"
        path.write_text(json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n")
    for table in tables:
        for row in table.rows:
            _log(f"eval: {row.method} subject={row.subject} k={row.k_shot} "
                 f"acc={row.accuracy_pct:.2f}% ({row.n_queries} queries)")
    return EXIT_OK


def cmd_report(cfg: dict, force: bool) -> int:
    from .harness import ResultTable, report

    ws = Path(cfg["workspace"])
    table_dir = ws / "results" / "tables"
    if not table_dir.is_dir():
        raise FileNotFoundError(f"{table_dir}: run eval first")
    tables = [ResultTable.from_dict(json.loads(p.read_text()))
              for p in sorted(table_dir.glob("*.json"))]
    paths = report(tables, ws / "results")
    _log("report: " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_selftest(cfg: dict, force: bool) -> int:
    import numpy as np

    from .dsp import StftConfig, stft
    from .nn import (DEFAULT_TOL, BatchNorm2d, Conv2d, Dense, Tensor,
                     check_gradients, leaky_relu, sigmoid, softmax_cross_entropy)
    from .sim import doppler_shift_hz, synthesize_constant_velocity_clip

    failures = 0

    def check(name: str, err: float, tol: float = DEFAULT_TOL) -> None:
        nonlocal failures
        ok = err <= tol
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {name}: {err:.3e} (tol {tol:.0e})")

    rng = np.random.default_rng(0)

    dense = Dense(6, 4, rng)
    x = Tensor(rng.normal(size=(5, 6)), requires_grad=True)
    y = rng.integers(0, 4, 5)
    check("dense+softmax-ce", check_gradients(
        lambda: softmax_cross_entropy(dense(x), y),
        {"x": x, "w": dense.w, "b": dense.b}, np.random.default_rng(1)))

    conv = Conv2d(2, 3, rng)
    bn = BatchNorm2d(3)
    xc = Tensor(rng.normal(size=(2, 2, 6, 6)), requires_grad=True)
    check("conv+bn+leaky", check_gradients(
        lambda: (leaky_relu(bn(conv(xc), train=True), 0.2) * 0.1).sum(),
        {"x": xc, "w": conv.w, "gamma": bn.gamma}, np.random.default_rng(2)))

    xs = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    check("sigmoid-sum", check_gradients(
        lambda: sigmoid(xs).sum(), {"x": xs}, np.random.default_rng(3)))

    # Doppler oracle: a 1 m/s reflector lands on the predicted bin offset.
    wide = StftConfig(band_low_hz=17900.0, band_high_hz=22049.0)
    clip = synthesize_constant_velocity_clip(1.0, duration_s=1.5, seed=0)
    spec = stft(clip.samples, wide)
    profile = spec.values.max(axis=0)
    carrier = spec.carrier_index
    masked = profile.copy()
    masked[max(0, carrier - 4): carrier + 5] = -np.inf
    peak = int(np.argmax(masked))
    predicted = carrier + round(doppler_shift_hz(1.0) / wide.grid_hz)
    err_bins = abs(peak - predicted)
    ok = err_bins <= 1
    failures += 0 if ok else 1
    print(f"{'PASS' if ok else 'FAIL'} doppler-oracle: peak off by {err_bins} bins (tol 1)")

    print("selftest:", "all checks passed" if failures == 0 else f"{failures} check(s) failed")
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


_COMMANDS = {
    "simulate": cmd_simulate,
    "featurize": cmd_featurize,
    "split": cmd_split,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonarfit",
        description="Synthetic sonar exercise-recognition pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", "-c", default=None, help="YAML config file")
        p.add_argument("--force", action="store_true",
                       help="re-run even if the stage is up to date")
        p.add_argument("--method", default=None,
                       help="shorthand for train.method=...")
        p.add_argument("--label-ratio", type=float, default=None,
                       help="shorthand for train.label_ratio=...")
        p.add_argument("--allow-any-ratio", action="store_true",
                       help="permit label ratios outside {0, 0.5, 1.0}")
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="dotted config overrides")
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_threads()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, list(args.overrides))
        if args.method is not None:
            cfg["train"]["method"] = args.method
        if args.label_ratio is not None:
            cfg["train"]["label_ratio"] = args.label_ratio
        if args.allow_any_ratio:
            cfg["train"]["allow_any_ratio"] = True
        _log("resolved config: " + json.dumps(cfg, sort_keys=True))
        return _COMMANDS[args.command](cfg, args.force)
    except (ValueError, KeyError, TypeError) as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _log(f"I/O error: {exc}")
        return EXIT_IO
    except (FloatingPointError, ArithmeticError) as exc:
        _log(f"numeric error: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
