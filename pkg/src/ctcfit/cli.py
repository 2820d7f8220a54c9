"""Command line interface: simulate runs, verify numerics, evaluate matrices.

Exit codes are a stable contract:
  0  success
  1  config or input error
  2  infeasible labels or zero sequence probability
  3  a verification tolerance was violated (check command)
"""

from __future__ import annotations

import argparse
import string
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import Alphabet, InfeasibleSequence, ZeroProbability, extend_labels, min_frames
from .loss import best_path_decode, ctc_loss_grad, forward_backward, loss_grad_from_probs, posterior
from .mods import ModConfig
from .oracle import brute_posterior, brute_prob, fd_gradient
from .report import (
    format_float,
    read_metrics_csv,
    render_metrics_figure,
    render_snapshot_figure,
    snapshot_figure_name,
    write_manifest,
    write_metrics_csv,
    write_trajectory_csv,
)
from .simulate import SimConfig, run

ORACLE_TOL = 1e-10
FD_TOL = 1e-6


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config file handling

_CONFIG_DEFAULTS = {
    "frames": "50",
    "classes": "-abc",
    "labels": "abc",
    "init_seed": "0",
    "init_stddev": "0.1",
    "learning_rate": "0.5",
    "iterations": "200",
    "snapshot_every": "2",
    "alpha": "",
    "gamma": "",
    "rescale_scope": "per_sequence",
}


def parse_config_file(path) -> dict[str, tuple[str, int]]:
    """Flat key=value lines with '#' comments; returns {key: (value, line_no)}."""
    out: dict[str, tuple[str, int]] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_DEFAULTS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        out[key] = (value, line_no)
    return out


def _parse_int(settings, key, minimum) -> int:
    value, line_no = settings[key]
    try:
        parsed = int(value)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} must be an integer, got {value!r}") from None
    if parsed < minimum:
        raise ConfigError(f"line {line_no}: {key} must be >= {minimum}, got {parsed}")
    return parsed


def _parse_float(settings, key) -> float:
    value, line_no = settings[key]
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} must be a number, got {value!r}") from None


def _parse_optional_float(settings, key) -> float | None:
    value, _ = settings[key]
    return None if value == "" else _parse_float(settings, key)


def build_sim_config(overrides: dict[str, tuple[str, int]]) -> tuple[SimConfig, str]:
    """Merge file settings over defaults and build a validated SimConfig."""
    settings = {key: (value, 0) for key, value in _CONFIG_DEFAULTS.items()}
    settings.update(overrides)

    classes, classes_line = settings["classes"]
    if len(classes) < 2:
        raise ConfigError(f"line {classes_line}: classes needs at least 2 characters")
    if classes.count("-") != 1:
        raise ConfigError(f"line {classes_line}: classes must contain exactly one '-' (the blank)")
    if len(set(classes)) != len(classes):
        raise ConfigError(f"line {classes_line}: classes characters must be unique")
    alphabet = Alphabet(num_classes=len(classes), blank_index=classes.index("-"))

    labels_text, labels_line = settings["labels"]
    try:
        labels = tuple(classes.index(ch) for ch in labels_text)
    except ValueError:
        raise ConfigError(f"line {labels_line}: labels contain characters outside classes") from None
    if alphabet.blank_index in labels:
        raise ConfigError(f"line {labels_line}: labels must not contain the blank '-'")

    alpha = _parse_optional_float(settings, "alpha")
    gamma = _parse_optional_float(settings, "gamma")
    scope, scope_line = settings["rescale_scope"]
    if scope not in ("per_sequence", "per_batch"):
        raise ConfigError(f"line {scope_line}: rescale_scope must be per_sequence or per_batch")
    if alpha is not None and not labels:
        raise ConfigError(f"line {labels_line}: alpha rescaling needs a non-empty labels value")

    try:
        config = SimConfig(
            frames=_parse_int(settings, "frames", 1),
            labels=labels,
            alphabet=alphabet,
            init_seed=_parse_int(settings, "init_seed", 0),
            init_stddev=_parse_float(settings, "init_stddev"),
            learning_rate=_parse_float(settings, "learning_rate"),
            iterations=_parse_int(settings, "iterations", 1),
            snapshot_every=_parse_int(settings, "snapshot_every", 1),
            mods=ModConfig(alpha=alpha, gamma=gamma, rescale_scope=scope),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config, classes


def _config_echo(config: SimConfig, classes: str) -> list[tuple[str, str]]:
    labels_text = "".join(classes[k] for k in config.labels)
    mods = config.mods
    return [
        ("frames", str(config.frames)),
        ("classes", classes),
        ("labels", labels_text),
        ("init_seed", str(config.init_seed)),
        ("init_stddev", format_float(config.init_stddev)),
        ("learning_rate", format_float(config.learning_rate)),
        ("iterations", str(config.iterations)),
        ("snapshot_every", str(config.snapshot_every)),
        ("alpha", "" if mods.alpha is None else format_float(mods.alpha)),
        ("gamma", "" if mods.gamma is None else format_float(mods.gamma)),
        ("rescale_scope", mods.rescale_scope),
    ]


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    try:
        overrides = parse_config_file(args.config)
        config, classes = build_sim_config(overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()

    abort_iteration = None
    try:
        trajectory = run(config)
        snapshots = trajectory.snapshots
        phase = trajectory.phase_boundary
    except ZeroProbability as exc:
        snapshots = getattr(exc, "partial_snapshots", ())
        abort_iteration = getattr(exc, "iteration", None)
        phase = None
        print(f"aborted: {exc}", file=sys.stderr)

    outputs: list[str] = []
    trajectory_path = out_dir / "trajectory.csv"
    write_trajectory_csv(trajectory_path, snapshots)
    outputs.append(trajectory_path.name)
    metrics_path = out_dir / "metrics.csv"
    write_metrics_csv(metrics_path, snapshots)
    outputs.append(metrics_path.name)

    metrics = read_metrics_csv(metrics_path)
    if metrics:
        render_metrics_figure(metrics, out_dir / "metrics.svg")
        outputs.append("metrics.svg")
    for snap in snapshots:
        name = snapshot_figure_name(snap.iteration)
        render_snapshot_figure(snap, config.alphabet.blank_index, out_dir / name, class_names=list(classes))
        outputs.append(name)

    finished = datetime.now(timezone.utc).isoformat()
    manifest = [("tool_version", __version__)]
    manifest += _config_echo(config, classes)
    manifest += [
        ("started_utc", started),
        ("finished_utc", finished),
        ("status", "complete" if abort_iteration is None else "aborted_zero_probability"),
    ]
    if abort_iteration is not None:
        manifest.append(("abort_iteration", str(abort_iteration)))
    if phase is not None:
        manifest.append(("phase_boundary", str(phase)))
    manifest += [(f"output_{i}", name) for i, name in enumerate(outputs)]
    write_manifest(out_dir / "manifest.txt", manifest)

    return 0 if abort_iteration is None else 2


# ---------------------------------------------------------------------------
# check

def _random_instance(rng, max_t, max_c, max_u, cap_t=None):
    num_classes = int(rng.integers(2, max_c + 1))
    alphabet = Alphabet(num_classes, 0)
    top_t = max_t if cap_t is None else min(max_t, cap_t)
    while True:
        num_labels = int(rng.integers(0, max_u + 1))
        labels = rng.integers(1, num_classes, size=num_labels)
        if min_frames(labels) <= top_t:
            break
    frames = int(rng.integers(max(min_frames(labels), 1), top_t + 1))
    probs = rng.random((frames, num_classes))
    probs /= probs.sum(axis=1, keepdims=True)
    return alphabet, labels, probs


def cmd_check(args) -> int:
    if args.trials < 0:
        print("trials must be >= 0", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    worst_prob = worst_post = worst_fd = 0.0
    fd_checks = 0
    for trial in range(args.trials):
        alphabet, labels, probs = _random_instance(rng, args.max_t, args.max_c, args.max_u)
        tables = forward_backward(probs, extend_labels(labels, alphabet))
        dp_post = posterior(probs, tables)
        ref_prob = brute_prob(probs, labels, alphabet)
        ref_post = brute_posterior(probs, labels, alphabet)
        prob_err = abs(np.exp(tables.log_prob) - ref_prob) / ref_prob
        post_err = float(np.abs(dp_post - ref_post).max())
        worst_prob = max(worst_prob, prob_err)
        worst_post = max(worst_post, post_err)
        line = f"trial {trial}: T={probs.shape[0]} C={alphabet.num_classes} U={labels.size} p_rel_err={prob_err:.3e} post_err={post_err:.3e}"

        fd_err = None
        if trial % 5 == 0:
            fd_alphabet, fd_labels, fd_probs = _random_instance(rng, args.max_t, args.max_c, args.max_u, cap_t=6)
            logits = rng.normal(0.0, 1.0, fd_probs.shape)
            analytic = ctc_loss_grad(logits, fd_labels, fd_alphabet).gradient
            if args.corrupt_gradient:
                analytic = analytic.copy()
                analytic[0, 0] += 1e-3
            numeric = fd_gradient(logits, fd_labels, fd_alphabet)
            fd_err = float(np.abs(analytic - numeric).max())
            worst_fd = max(worst_fd, fd_err)
            fd_checks += 1
            line += f" fd_err={fd_err:.3e}"
        print(line)

        if prob_err > ORACLE_TOL or post_err > ORACLE_TOL or (fd_err is not None and fd_err > FD_TOL):
            print(f"FAIL at trial {trial} (seed {args.seed}): tolerance exceeded", file=sys.stderr)
            return 3

    print(
        f"{args.trials} trials ({fd_checks} gradient checks): "
        f"max p_rel_err={worst_prob:.3e} max post_err={worst_post:.3e} max fd_err={worst_fd:.3e}; all within tolerance"
    )
    return 0


# ---------------------------------------------------------------------------
# eval

def default_classes(num_classes: int) -> str:
    letters = string.ascii_lowercase + string.ascii_uppercase + string.digits
    if num_classes - 1 > len(letters):
        raise ConfigError(f"supply --classes: no default mapping for {num_classes} classes")
    return "-" + letters[: num_classes - 1]


def cmd_eval(args) -> int:
    rows: list[list[float]] = []
    try:
        with open(args.probs) as handle:
            for line_no, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line:
                    continue
                parts = line.split(",")
                try:
                    rows.append([float(cell) for cell in parts])
                except ValueError:
                    print(f"input error: line {line_no}: non-numeric cell", file=sys.stderr)
                    return 1
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    if not rows or any(len(row) != len(rows[0]) for row in rows):
        print("input error: empty matrix or ragged rows", file=sys.stderr)
        return 1
    probs = np.asarray(rows, dtype=float)
    if probs.shape[1] < 2:
        print("input error: need at least 2 classes per row", file=sys.stderr)
        return 1
    if np.any(probs < 0.0) or not np.all(np.isfinite(probs)):
        print("input error: probabilities must be finite and non-negative", file=sys.stderr)
        return 1
    sums = probs.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-6:
        print(f"input error: row sums deviate from 1 by {np.abs(sums - 1.0).max():.3e}", file=sys.stderr)
        return 1
    probs = probs / sums[:, None]

    try:
        classes = args.classes or default_classes(probs.shape[1])
    except ConfigError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    if len(classes) != probs.shape[1] or classes.count("-") != 1 or len(set(classes)) != len(classes):
        print("input error: classes must be unique, match the matrix width, and contain one '-'", file=sys.stderr)
        return 1
    alphabet = Alphabet(num_classes=len(classes), blank_index=classes.index("-"))
    try:
        labels = [classes.index(ch) for ch in args.labels]
    except ValueError:
        print("input error: labels contain characters outside classes", file=sys.stderr)
        return 1
    if alphabet.blank_index in labels:
        print("input error: labels must not contain the blank '-'", file=sys.stderr)
        return 1

    try:
        result = loss_grad_from_probs(probs, labels, alphabet)
    except (InfeasibleSequence, ZeroProbability) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"loss={format_float(result.loss)}")
    for row in result.pseudo_gt:
        print(",".join(format_float(v) for v in row))
    decoded = best_path_decode(probs, alphabet)
    print("decoded=" + "".join(classes[k] for k in decoded))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctcfit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ctcfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a training simulation and write CSVs and figures")
    sim.add_argument("--config", required=True, help="key=value config file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    check = sub.add_parser("check", help="verify lattice numerics against brute-force enumeration")
    check.add_argument("--max-t", type=int, default=8, dest="max_t")
    check.add_argument("--max-c", type=int, default=4, dest="max_c")
    check.add_argument("--max-u", type=int, default=3, dest="max_u")
    check.add_argument("--trials", type=int, default=1000)
    check.add_argument("--seed", type=int, default=7)
    check.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    check.set_defaults(func=cmd_check)

    ev = sub.add_parser("eval", help="loss, fitting target, and decode for a probability CSV")
    ev.add_argument("--probs", required=True, help="CSV of T rows x C columns")
    ev.add_argument("--labels", required=True, help="label string, e.g. abc")
    ev.add_argument(
        "--classes",
        default=None,
        help="class characters by index, '-' marks blank; pass as --classes=-abc",
    )
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
