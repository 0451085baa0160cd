"""Benchmark harness: sweeps over clutter fraction, delta, first-stage size and
stage configuration, plus the ``semcascade`` command line.

Every sweep writes a CSV body that depends only on the configuration and
seeds, and a JSON sidecar with the configuration, seeds, the selection audit
and the measured wall-clock times. "Energy" throughout is the MAC-count proxy
(multiply-accumulates per input), not a hardware measurement.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__, dataset, features
from .cascade import Hierarchy, Metrics, StageExpr, evaluate, evaluate_baseline
from .errors import ContractError, DataError, InvalidSpecError, SemcascadeError
from .features import FeatureConfig
from .kvconfig import as_float, as_float_list, as_int, as_str_list, read_kv
from .mlp import TrainConfig
from .selection import (
    ORACLE_MAX_SPACE, SelectionConfig, exhaustive_oracle, fit_baseline, select_semantics,
    train_hierarchy,
)

log = logging.getLogger(__name__)

DATA_ENV = "SEMCASCADE_DATA"
DEFAULT_DATA = "profile:color"
ENERGY_PROXY = "MAC count per input (multiply-accumulates); not hardware energy"

# delta defaults per data kind
SYNTHETIC_DELTA = 0.4
CIFAR_DELTA = 0.55
CIFAR_SHIP = 8

COLUMNS = (
    "value", "stage", "first_stage", "avg_macs_per_input", "baseline_macs_per_input",
    "normalized_ops", "normalized_energy_proxy", "accuracy", "baseline_accuracy",
    "normalized_accuracy", "clutter_pass_fraction", "object_pass_fraction", "n_test", "note",
)


@dataclass(frozen=True)
class BenchConfig:
    data: str = DEFAULT_DATA
    target_class: int | None = None  # None: profile target, or ship on CIFAR
    seed: int = 0
    delta: float | None = None  # None: per-dataset default
    epsilon: float = 0.02
    k: int = 4
    count: int = 2000  # images rendered for synthetic profiles
    max_images: int | None = 12000  # CIFAR cap
    train_fraction: float = 0.8
    test_size: int = 2000
    fractions: tuple = (0.6, 0.75, 0.9)
    sweep_fraction: float = 0.75  # test clutter for the delta and complexity sweeps
    deltas: tuple = (0.1, 0.2, 0.3, 0.4)
    hidden_sizes: tuple = (1, 4, 16, 64, 256, 1024, 4096)
    final_hidden: int = 128
    final_learning_rate: float = 0.5
    final_epochs: int = 50
    final_batch_size: int = 32
    leaf_hidden: int = 16
    leaf_learning_rate: float = 2.0
    leaf_epochs: int = 60
    leaf_batch_size: int = 32
    grid: int = 8
    validation_fraction: float = 0.2
    colors: tuple | None = None  # None: the data source's default color space
    texture: bool | None = None  # None: the data source's default
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        for name in ("fractions", "deltas", "hidden_sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.colors is not None:
            object.__setattr__(self, "colors", tuple(self.colors))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["feature_config"] = self.feature_config.to_dict()
        return out

    @classmethod
    def from_kv(cls, kv: dict, base: "BenchConfig | None" = None) -> "BenchConfig":
        """Override ``base`` with the recognised keys of a ``key = value`` map.

        Keys naming a feature-bank setting update ``feature_config``; any
        other unknown key is an error.
        """
        base = base or cls()
        feature_keys = {f.name for f in fields(FeatureConfig)}
        own = {f.name: f for f in fields(cls)}
        updates, feature_kv = {}, {}
        for key, raw in kv.items():
            if key in feature_keys:
                feature_kv[key] = raw
            elif key in own and key != "feature_config":
                updates[key] = _parse_field(key, raw)
            else:
                raise InvalidSpecError(f"unknown config key {key!r}")
        if feature_kv:
            parsed = asdict(FeatureConfig.from_kv(feature_kv))
            updates["feature_config"] = replace(
                base.feature_config, **{k: v for k, v in parsed.items() if k in feature_kv}
            )
        return replace(base, **updates)


_INT_KEYS = {"target_class", "seed", "k", "count", "max_images", "test_size", "final_hidden",
             "final_epochs", "final_batch_size", "leaf_hidden", "leaf_epochs", "leaf_batch_size",
             "grid"}
_OPTIONAL = {"target_class", "delta", "max_images", "colors", "texture"}


def _parse_field(key: str, raw: str):
    if key in _OPTIONAL and raw.strip().lower() in ("", "none", "default"):
        return None
    if key == "data":
        return raw.strip()
    if key in ("fractions", "deltas"):
        return tuple(as_float_list(raw))
    if key == "hidden_sizes":
        return tuple(as_int(v, key) for v in as_str_list(raw))
    if key == "colors":
        return tuple(as_str_list(raw))
    if key == "texture":
        text = raw.strip().lower()
        if text not in ("true", "false", "yes", "no", "1", "0"):
            raise InvalidSpecError(f"texture must be a boolean, got {raw!r}")
        return text in ("true", "yes", "1")
    if key in _INT_KEYS:
        return as_int(raw, key)
    return as_float(raw, key)


# ----------------------------------------------------------------- data source


@dataclass
class DataSource:
    kind: str  # "profile", "synthetic" or "cifar"
    description: str
    images: list
    target_class: int
    colors: tuple
    texture: bool

    @property
    def default_delta(self) -> float:
        return CIFAR_DELTA if self.kind == "cifar" else SYNTHETIC_DELTA


def load_source(config: BenchConfig) -> DataSource:
    """Resolve ``config.data``: ``profile:<name>``, a synthetic spec file or a
    CIFAR-10 binary directory."""
    data = config.data
    if data.startswith("profile:"):
        prof = dataset.synthetic_profile(data.split(":", 1)[1], count=config.count, seed=config.seed)
        images = dataset.render_profile(prof)
        src = DataSource("profile", data, images, prof.target_class, prof.colors, prof.use_texture)
    else:
        path = Path(data)
        if path.is_dir():
            images = dataset.load_cifar10_dir(path, config.max_images)
            names = tuple(c.value for c in features.Color)
            src = DataSource("cifar", str(path), images, CIFAR_SHIP, names, False)
        elif path.is_file():
            spec = dataset.SyntheticSpec.from_file(path)
            images = dataset.generate_synthetic(spec)
            src = DataSource("synthetic", str(path), images, 0,
                             tuple(c.value for c in spec.palette), bool(spec.orientations))
        else:
            raise DataError(f"data source {data!r} is neither a profile, a file nor a directory")
    if config.target_class is not None:
        src.target_class = config.target_class
    if config.colors is not None:
        src.colors = config.colors
    if config.texture is not None:
        src.texture = config.texture
    return src


# ---------------------------------------------------------------------- report


@dataclass
class SweepReport:
    name: str
    variable: str
    rows: list
    columns: tuple = COLUMNS
    meta: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(row.get(c, "")) for c in self.columns])
        return buf.getvalue()

    def hierarchy_rows(self) -> list:
        return [r for r in self.rows if r.get("stage") != "baseline"]

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{self.name}.csv"
        json_path = out_dir / f"{self.name}.json"
        csv_path.write_text(self.csv_text())
        sidecar = {"report": self.name, "variable": self.variable, "columns": list(self.columns),
                   "energy_proxy": ENERGY_PROXY, "version": __version__, **self.meta}
        json_path.write_text(json.dumps(sidecar, indent=1, sort_keys=True, default=str))
        return csv_path, json_path


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _row(value, stage: str, first_stage: str, m: Metrics, base: Metrics, note: str = "") -> dict:
    return {
        "value": value,
        "stage": stage,
        "first_stage": first_stage,
        "avg_macs_per_input": m.avg_macs_per_input,
        "baseline_macs_per_input": base.avg_macs_per_input,
        "normalized_ops": base.avg_macs_per_input / m.avg_macs_per_input,
        "normalized_energy_proxy": m.avg_macs_per_input / base.avg_macs_per_input,
        "accuracy": m.accuracy,
        "baseline_accuracy": base.accuracy,
        "normalized_accuracy": m.accuracy / base.accuracy if base.accuracy > 0 else float("nan"),
        "clutter_pass_fraction": m.clutter_pass_fraction,
        "object_pass_fraction": m.object_pass_fraction,
        "n_test": m.n,
        "note": note,
    }


# ------------------------------------------------------------------ experiment


class Experiment:
    """Shared training state behind every sweep.

    The baseline and the hierarchy are trained lazily and once; test sets at
    each clutter fraction are resampled from the same held-out pool.
    """

    def __init__(self, config: BenchConfig, source: DataSource | None = None):
        self.config = config
        self.source = source or load_source(config)
        self.delta = self.source.default_delta if config.delta is None else float(config.delta)
        self.timings: dict = {}
        self._tasks: dict = {}
        self._baseline = None
        self._trained = None
        self.train_set = self.task(config.fractions[0] if config.fractions else 0.5).train_set

    def task(self, fraction: float):
        key = float(fraction)
        if key not in self._tasks:
            self._tasks[key] = dataset.make_detection_task(
                self.source.images, self.source.target_class, key, self.config.seed,
                self.config.train_fraction, self.config.test_size,
            )
        return self._tasks[key]

    def test_set(self, fraction: float) -> list:
        return self.task(fraction).test_set

    def selection_config(self, space) -> SelectionConfig:
        c = self.config
        return SelectionConfig(
            epsilon=c.epsilon, k=c.k, delta=self.delta, search_space=tuple(space),
            validation_fraction=c.validation_fraction, seed=c.seed, grid=c.grid,
            leaf_hidden=c.leaf_hidden,
            leaf_train=TrainConfig(c.leaf_learning_rate, c.leaf_epochs, c.leaf_batch_size, c.seed),
            feature_config=c.feature_config,
        )

    def color_space(self) -> list:
        return features.color_space(self.config.feature_config, self.source.colors)

    def texture_space(self) -> list:
        if not self.source.texture:
            return []
        size = min(self.source.images[0].shape)
        return features.gabor_bank(size, self.config.feature_config)

    @property
    def baseline(self):
        if self._baseline is None:
            c = self.config
            start = time.perf_counter()
            self._baseline = fit_baseline(
                self.train_set, c.final_hidden,
                TrainConfig(c.final_learning_rate, c.final_epochs, c.final_batch_size, c.seed),
                c.validation_fraction, c.seed,
            )
            self.timings["train_baseline_s"] = time.perf_counter() - start
        return self._baseline

    @property
    def trained(self):
        if self._trained is None:
            baseline = self.baseline
            start = time.perf_counter()
            self._trained = train_hierarchy(
                baseline, self.train_set,
                self.selection_config(self.color_space()),
                self.selection_config(self.texture_space()),
            )
            self.timings["train_selection_s"] = time.perf_counter() - start
        return self._trained

    @property
    def hierarchy(self) -> Hierarchy:
        return self.trained.hierarchy

    def meta(self, **extra) -> dict:
        out = {
            "config": self.config.to_dict(),
            "data": {"kind": self.source.kind, "description": self.source.description,
                     "n_images": len(self.source.images), "target_class": self.source.target_class},
            "seeds": {"seed": self.config.seed, "split": [self.config.seed, 0],
                      "holdout": [self.config.seed, 2]},
            "delta": self.delta,
            "timings": dict(self.timings),
        }
        if self._trained is not None:
            out["selection"] = self._trained.summary()
        out.update(extra)
        return out


def _timed(fn, *args):
    start = time.perf_counter()
    value = fn(*args)
    return value, time.perf_counter() - start


# ---------------------------------------------------------------------- sweeps


def run_clutter_sweep(exp: Experiment, fractions=None) -> SweepReport:
    """One hierarchy evaluated on test sets resampled at each clutter fraction.

    Each fraction gets its own baseline row, since the test set changes. A
    final ``aggregate`` row pools the hierarchy rows; the baseline cost per
    input is constant, so pooling MACs and averaging per-task normalizations
    by cost coincide for it.
    """
    fractions = tuple(exp.config.fractions if fractions is None else fractions)
    if not fractions:
        raise ContractError("at least one clutter fraction is needed")
    for fr in fractions:
        if not 0.05 <= fr <= 0.95:
            raise ContractError("clutter fractions must lie in [0.05, 0.95]")
    h = exp.hierarchy
    expr = str(h.first_stage)
    rows, times = [], []
    totals = {"macs": 0.0, "base": 0.0, "acc": 0.0, "base_acc": 0.0, "n": 0}
    for fr in sorted(fractions):
        test = exp.test_set(fr)
        base, t_base = _timed(evaluate_baseline, h.final, test, h.final_threshold)
        m, t_test = _timed(evaluate, h, test)
        rows.append(_row(fr, "baseline", "NULL", base, base))
        rows.append(_row(fr, "hierarchy", expr, m, base))
        times += [t_base, t_test]
        totals["macs"] += m.avg_macs_per_input
        totals["base"] += base.avg_macs_per_input
        totals["acc"] += m.accuracy
        totals["base_acc"] += base.accuracy
        totals["n"] += m.n
    k = len(fractions)
    agg_base = replace(_blank_metrics(), avg_macs_per_input=totals["base"] / k,
                       accuracy=totals["base_acc"] / k, n=totals["n"])
    agg = replace(_blank_metrics(), avg_macs_per_input=totals["macs"] / k,
                  accuracy=totals["acc"] / k, n=totals["n"])
    row = _row("aggregate", "hierarchy", expr, agg, agg_base, "mean over fractions")
    row["clutter_pass_fraction"] = row["object_pass_fraction"] = ""
    rows.append(row)
    return SweepReport("sweep-clutter", "clutter_fraction", rows,
                       meta=exp.meta(row_wall_time_test_s=times))


def _blank_metrics() -> Metrics:
    return Metrics(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0)


def run_delta_sweep(exp: Experiment, deltas=None, fraction: float | None = None) -> SweepReport:
    """The trained hierarchy re-evaluated at each activation threshold."""
    deltas = tuple(exp.config.deltas if deltas is None else deltas)
    if not deltas:
        raise ContractError("at least one delta is needed")
    if not all(0.0 < d < 1.0 for d in deltas):
        raise ContractError("deltas must lie in (0, 1)")
    fraction = exp.config.sweep_fraction if fraction is None else fraction
    h = exp.hierarchy
    test = exp.test_set(fraction)
    base, t_base = _timed(evaluate_baseline, h.final, test, h.final_threshold)
    rows, times = [_row("baseline", "baseline", "NULL", base, base)], [t_base]
    for d in sorted(deltas):
        m, t = _timed(evaluate, h.with_delta(d), test)
        rows.append(_row(d, "hierarchy", str(h.first_stage), m, base))
        times.append(t)
    return SweepReport("sweep-delta", "delta", rows,
                       meta=exp.meta(test_clutter_fraction=fraction, row_wall_time_test_s=times))


def _resize_leaves(expr: StageExpr, hidden: int, pools) -> StageExpr:
    def pool_for(descriptor):
        return pools[0] if isinstance(descriptor, features.ColorDescriptor) else pools[1]

    return StageExpr(tuple(
        tuple(pool_for(l.descriptor).leaf(l.descriptor, hidden) for l in clause)
        for clause in expr.clauses
    ))


def run_complexity_sweep(exp: Experiment, hidden_sizes=None,
                         fraction: float | None = None) -> SweepReport:
    """Retrain the chosen expression's leaves at each hidden size.

    The ``argmin`` note marks the lowest energy proxy among rows whose
    accuracy drop stays within epsilon, or among all rows if none does.
    Sizes whose first stage would cost as much as the final classifier are
    left out and listed in the sidecar.
    """
    sizes = tuple(exp.config.hidden_sizes if hidden_sizes is None else hidden_sizes)
    if not sizes:
        raise ContractError("at least one hidden size is needed")
    if any(s < 1 for s in sizes) or list(sizes) != sorted(set(sizes)):
        raise ContractError("hidden sizes must be ascending positive integers")
    fraction = exp.config.sweep_fraction if fraction is None else fraction
    trained = exp.trained
    h = trained.hierarchy
    pools = (trained.color.pool, trained.texture.pool)
    test = exp.test_set(fraction)
    base, t_base = _timed(evaluate_baseline, h.final, test, h.final_threshold)
    rows, times, skipped = [], [t_base], []
    for size in sizes:
        start = time.perf_counter()
        expr = _resize_leaves(h.first_stage, size, pools)
        try:
            hs = h.with_first_stage(expr)
        except ContractError as exc:
            skipped.append({"hidden": size, "reason": str(exc)})
            continue
        m = evaluate(hs, test)
        times.append(time.perf_counter() - start)
        rows.append(_row(size, "hierarchy", str(expr), m, base))
    if rows:
        ok = [r for r in rows if base.accuracy - r["accuracy"] <= exp.config.epsilon] or rows
        best = min(ok, key=lambda r: r["normalized_energy_proxy"])
        best["note"] = "argmin"
    rows.insert(0, _row("baseline", "baseline", "NULL", base, base))
    return SweepReport("sweep-complexity", "leaf_hidden", rows,
                       meta=exp.meta(test_clutter_fraction=fraction, skipped=skipped,
                                     row_wall_time_s=times))


def run_stage_comparison(exp: Experiment, fractions=None) -> SweepReport:
    """Baseline, color-only, texture-only and color AND texture first stages."""
    fractions = tuple(exp.config.fractions if fractions is None else fractions)
    trained = exp.trained
    h = trained.hierarchy
    color, texture = trained.color.expression, trained.texture.expression
    configs = {"color": color, "texture": texture, "combined": color.and_(texture)}
    stages, skipped = {}, []
    for name, expr in configs.items():
        try:
            stages[name] = h.with_first_stage(expr)
        except ContractError as exc:
            skipped.append({"stage": name, "reason": str(exc)})
    rows, times = [], []
    for fr in sorted(fractions):
        test = exp.test_set(fr)
        base, t = _timed(evaluate_baseline, h.final, test, h.final_threshold)
        rows.append(_row(fr, "baseline", "NULL", base, base))
        times.append(t)
        for name, hs in stages.items():
            m, t = _timed(evaluate, hs, test)
            rows.append(_row(fr, name, str(hs.first_stage), m, base))
            times.append(t)
    return SweepReport("compare-stages", "clutter_fraction", rows,
                       meta=exp.meta(skipped=skipped, row_wall_time_test_s=times))


ORACLE_COLUMNS = ("method", "expression", "gain", "q_baseline", "q_hier", "n_candidates",
                  "n_feasible", "matches_oracle")


def run_oracle_check(exp: Experiment) -> SweepReport:
    """Greedy selection against exhaustive enumeration on the color space."""
    space = exp.color_space()
    if len(space) > ORACLE_MAX_SPACE:
        raise ContractError(f"oracle check needs at most {ORACLE_MAX_SPACE} colors, got {len(space)}")
    cfg = exp.selection_config(space)
    greedy = select_semantics(exp.baseline, space, exp.train_set, cfg)
    oracle = exhaustive_oracle(exp.baseline, space, exp.train_set, cfg, greedy.pool)
    match = greedy.report.gain >= oracle.report.gain
    rows = [
        {"method": "greedy", "expression": str(greedy.expression), "gain": greedy.report.gain,
         "q_baseline": greedy.report.q_baseline, "q_hier": greedy.report.q_hier,
         "n_candidates": len(greedy.audit), "n_feasible": "", "matches_oracle": match},
        {"method": "oracle", "expression": str(oracle.expression), "gain": oracle.report.gain,
         "q_baseline": oracle.report.q_baseline, "q_hier": oracle.report.q_hier,
         "n_candidates": oracle.n_candidates, "n_feasible": oracle.n_feasible,
         "matches_oracle": True},
    ]
    return SweepReport("oracle-check", "method", rows, ORACLE_COLUMNS,
                       meta=exp.meta(audit=[r.to_dict() for r in greedy.audit]))


# ------------------------------------------------------------------------- CLI


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help=f"profile:<name>, synthetic spec file or CIFAR-10 directory "
                                       f"(default: ${DATA_ENV} or {DEFAULT_DATA})")
    common.add_argument("--target-class", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--delta", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--out", default="reports", help="report directory")
    common.add_argument("--config", help="key = value file overriding the defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="semcascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train and save a hierarchy")
    ev = sub.add_parser("evaluate", parents=[common], help="evaluate a saved hierarchy")
    ev.add_argument("--model", required=True, help="hierarchy JSON written by train")
    ev.add_argument("--fractions", help="comma separated clutter fractions")
    sc = sub.add_parser("sweep-clutter", parents=[common], help="clutter-fraction sweep")
    sc.add_argument("--fractions", help="comma separated clutter fractions")
    sd = sub.add_parser("sweep-delta", parents=[common], help="activation-threshold sweep")
    sd.add_argument("--deltas", help="comma separated thresholds in (0, 1)")
    sx = sub.add_parser("sweep-complexity", parents=[common], help="first-stage size sweep")
    sx.add_argument("--hidden-sizes", help="comma separated ascending hidden sizes")
    cs = sub.add_parser("compare-stages", parents=[common], help="color / texture / combined")
    cs.add_argument("--fractions", help="comma separated clutter fractions")
    sub.add_parser("oracle-check", parents=[common], help="greedy vs exhaustive selection")
    return parser


def config_from_args(args) -> BenchConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = BenchConfig(data=os.environ.get(DATA_ENV) or DEFAULT_DATA)
    if args.config:
        cfg = BenchConfig.from_kv(read_kv(args.config), cfg)
    flags = {"data": args.data, "target_class": args.target_class, "seed": args.seed,
             "delta": args.delta, "epsilon": args.epsilon}
    for key in ("fractions", "deltas"):
        raw = getattr(args, key, None)
        if raw:
            flags[key] = tuple(as_float_list(raw))
    raw = getattr(args, "hidden_sizes", None)
    if raw:
        flags["hidden_sizes"] = tuple(as_int(v, "hidden_sizes") for v in as_str_list(raw))
    return replace(cfg, **{k: v for k, v in flags.items() if v is not None})


def _cmd_train(exp: Experiment, args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = out / "hierarchy.json"
    model.write_text(exp.hierarchy.dumps())
    summary = out / "train.json"
    summary.write_text(json.dumps(exp.meta(), indent=1, sort_keys=True, default=str))
    print(f"first stage: {exp.hierarchy.first_stage} ({exp.trained.chosen})")
    return [model, summary]


def _cmd_evaluate(exp: Experiment, args) -> list[Path]:
    h = Hierarchy.loads(Path(args.model).read_text())
    rows = []
    for fr in sorted(exp.config.fractions):
        test = exp.test_set(fr)
        base = evaluate_baseline(h.final, test, h.final_threshold)
        rows.append(_row(fr, "baseline", "NULL", base, base))
        rows.append(_row(fr, "hierarchy", str(h.first_stage), evaluate(h, test), base))
    report = SweepReport("evaluate", "clutter_fraction", rows, meta=exp.meta(model=str(args.model)))
    return list(report.write(args.out))


def _sweep(fn):
    def run(exp: Experiment, args) -> list[Path]:
        return list(fn(exp).write(args.out))
    return run


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep-clutter": _sweep(run_clutter_sweep),
    "sweep-delta": _sweep(run_delta_sweep),
    "sweep-complexity": _sweep(run_complexity_sweep),
    "compare-stages": _sweep(run_stage_comparison),
    "oracle-check": _sweep(run_oracle_check),
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        exp = Experiment(config)
        for path in _COMMANDS[args.command](exp, args):
            print(path)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (SemcascadeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
