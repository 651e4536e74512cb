"""Command-line pipeline: gen -> train -> eval -> render/sensitivity/dropout.

Every command resolves its configuration (file then flags), snapshots it
into the output directory, and is bit-reproducible under a fixed seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, apply_overrides, load_config, save_config
from .errors import NonFiniteActivationError, TrajcastError
from .evalsuite.analysis import (
    dropout_epistemic,
    epistemic_std,
    error_heatmap,
    error_vs_horizon,
    occlusion_sensitivity,
)
from .evalsuite.calibration import reliability_curve
from .evalsuite.metrics import aggregate, write_per_horizon_csv
from .evalsuite.plots import curve_csv, heatmap_ppm, line_plot_svg, matrix_csv
from .geometry import TICK_DT
from .harness import evaluate_methods
from .mapio import load_map
from .nnet.train import TrainOptions, init_from_point_weights, train_model
from .nnet.weights_io import load_weights, save_weights
from .raster import rasterize_scene, write_ppm
from .rng import substream
from .synthgen.dataset import load_dataset, make_dataset, read_tracks, write_dataset
from .synthgen.scenarios import generate_scenarios


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for key in ("seed", "workers"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if getattr(args, "scenarios", None) is not None:
        overrides["scenarios"] = args.scenarios
    if getattr(args, "history_k", None) is not None:
        overrides["raster_history_k"] = args.history_k
    if getattr(args, "epochs", None) is not None:
        overrides["train_epochs"] = args.epochs
    return apply_overrides(cfg, **overrides)


def cmd_gen(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.scenarios:
        print("error: empty scenario list", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenarios = generate_scenarios(cfg.scenarios, cfg.seed)
    dataset, datas = make_dataset(
        scenarios, cfg.raster_config(), cfg.horizon, cfg.noise_model(), cfg.seed,
        stride=cfg.dataset_stride, max_per_scenario=cfg.dataset_max_per_scenario,
        workers=cfg.workers,
    )
    write_dataset(dataset, datas, out)
    save_config(cfg, out / "config.ini")
    counts = dataset.counts
    print(f"scenarios: {len(scenarios)}")
    print(f"examples: train={counts['train']} val={counts['val']} test={counts['test']}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    dataset = load_dataset(args.dataset, rasters="archive")
    model_cfg = cfg.model_config(output_mode=args.mode, raster_n=dataset.raster_config.n)
    model_cfg = replace(model_cfg, horizon=dataset.horizon)
    initial = None
    if args.init:
        point_cfg, point_params = load_weights(args.init)
        initial = init_from_point_weights(
            model_cfg, point_cfg, point_params, substream(cfg.seed, "finetune")
        )
    elif args.mode == "uncertain":
        print("warning: uncertain mode trains best when initialized from point weights "
              "(--init)", file=sys.stderr)

    train_rasters, train_states, train_targets = dataset.arrays("train")
    val = dataset.arrays("val")
    if len(train_states) == 0:
        print("error: dataset has no training examples", file=sys.stderr)
        return 1
    opts = TrainOptions(batch_size=cfg.train_batch_size, epochs=cfg.train_epochs,
                        seed=cfg.seed, lr0=cfg.train_lr0, decay_every=cfg.train_decay_every)
    try:
        params, history = train_model(
            model_cfg, train_rasters, train_states[:, : model_cfg.state_dim],
            train_targets, opts,
            val_data=(val[0], val[1][:, : model_cfg.state_dim], val[2]) if len(val[1]) else None,
            initial_params=initial,
        )
    except NonFiniteActivationError as exc:
        print(f"error: training diverged with non-finite loss ({exc}); "
              f"lower train.lr0 or check the dataset", file=sys.stderr)
        return 1
    out_path = Path(args.weights_out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_weights(out_path, model_cfg, params)
    with open(out_path.with_suffix(out_path.suffix + ".loss.csv"), "w", encoding="utf-8") as fh:
        fh.write("epoch,lr,train_loss,val_loss,val_displacement\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['lr']:.8g},{row['train_loss']:.8g},"
                     f"{row['val_loss']:.8g},{row['val_displacement']:.8g}\n")
    save_config(cfg, out_path.with_suffix(out_path.suffix + ".config.ini"))
    if history:
        last = history[-1]
        print(f"final train loss {last['train_loss']:.4f} "
              f"val displacement {last['val_displacement']:.4f} m")
    print(f"weights written to {out_path}")
    return 0


def _emit_reliability(result, targets, dt, out: Path) -> None:
    errors = np.linalg.norm(result.predictions - targets, axis=2)
    horizon = targets.shape[1]
    curves = []
    for h_sec in (1.0, 3.0):
        h_idx = int(round(h_sec / dt)) - 1
        if 0 <= h_idx < horizon:
            curve = reliability_curve(errors[:, h_idx], result.sigmas[:, h_idx])
            tag = f"{h_sec:.0f}s"
            curves.append((tag, curve.levels, curve.observed))
            curve_csv(curve.levels, curve.observed, ("level", "observed"),
                      out / f"reliability_{result.name.replace(':', '_')}_{tag}.csv")
    if curves:
        safe = result.name.replace(":", "_").replace("/", "_")
        line_plot_svg(out / f"reliability_{safe}.svg", curves,
                      title=f"Reliability: {result.name}", xlabel="confidence level",
                      ylabel="observed fraction", diagonal=True)


def _emit_heatmaps(result, dataset, out: Path) -> None:
    examples = dataset.split_examples("test")
    by_event: dict[tuple[str, str], list[int]] = {}
    for i, ex in enumerate(examples):
        by_event.setdefault((ex.scenario_id, ex.actor_id), []).append(i)
    flagged = None
    for key, idx in by_event.items():
        hcrs = [abs(examples[i].state[2]) for i in idx]
        if len(idx) >= 8 and max(hcrs) > 0.15:
            flagged = (key, idx)
            break
    if flagged is None:
        return
    (scenario_id, actor_id), idx = flagged
    targets = np.stack([examples[i].targets for i in idx])
    preds = result.predictions[idx]
    along, cross = error_heatmap(preds, targets)
    safe = result.name.replace(":", "_").replace("/", "_")
    for name, matrix in (("along", along), ("cross", cross)):
        matrix_csv(matrix, out / f"heatmap_{safe}_{scenario_id}_{actor_id}_{name}.csv")
        heatmap_ppm(matrix.T[::-1], out / f"heatmap_{safe}_{scenario_id}_{actor_id}_{name}.ppm")


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        print("error: no methods given", file=sys.stderr)
        return 2
    needs_rasters = any(m.startswith("model:") for m in methods)
    for m in methods:
        if m.startswith("model:") and not Path(m.split(":", 1)[1]).exists():
            print(f"error: missing weights file {m.split(':', 1)[1]}", file=sys.stderr)
            return 1
    dataset = load_dataset(args.dataset, rasters="archive" if needs_rasters else "none")
    _, _, targets = dataset.arrays("test")
    if len(targets) == 0:
        print("error: dataset has no test examples", file=sys.stderr)
        return 1
    try:
        results = evaluate_methods(methods, dataset, ridge=cfg.linear_ridge)
    except (TrajcastError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = aggregate({r.name: r.predictions for r in results}, targets)
    by_name = {r.name: r for r in results}
    with open(out / "metrics.csv", "w", encoding="utf-8") as fh:
        fh.write("method,raster,state,loss,displacement,along_track,cross_track,selection\n")
        for row in rows:
            r = by_name[row.method]
            selection = "oracle" if r.oracle_selection else "causal"
            fh.write(f"{row.method},{r.raster_variant},{r.uses_state},{r.loss_kind},"
                     f"{row.displacement:.6f},{row.along_track:.6f},{row.cross_track:.6f},"
                     f"{selection}\n")
    write_per_horizon_csv(rows, TICK_DT, out / "per_horizon.csv")

    horizon = targets.shape[1]
    xs = np.arange(1, horizon + 1) * TICK_DT
    curves = []
    for r in results:
        curve = error_vs_horizon(r.predictions, targets)
        curve_csv(xs, curve, ("horizon_s", "displacement"),
                  out / f"error_vs_horizon_{r.name.replace(':', '_').replace('/', '_')}.csv")
        curves.append((r.name, xs, curve))
    line_plot_svg(out / "error_vs_horizon.svg", curves, title="Displacement vs horizon",
                  xlabel="horizon [s]", ylabel="mean displacement [m]")
    for r in results:
        if r.sigmas is not None:
            _emit_reliability(r, targets, TICK_DT, out)
        _emit_heatmaps(r, dataset, out)
    save_config(cfg, out / "config.ini")
    for row in rows:
        print(f"{row.method}: displacement {row.displacement:.3f} m "
              f"along {row.along_track:.3f} cross {row.cross_track:.3f}")
    return 0


def cmd_render(args) -> int:
    cfg = _resolve_config(args)
    world_map = load_map(args.map)
    tracks = read_tracks(args.tracks)
    try:
        img = rasterize_scene(world_map, tracks, args.actor, args.tick, cfg.raster_config())
    except TrajcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_ppm(img, args.out_file)
    print(f"wrote {args.out_file}")
    return 0


def _find_example(dataset, example_id: str):
    for i, ex in enumerate(dataset.examples):
        if ex.example_id == example_id:
            return i, ex
    raise KeyError(f"example {example_id!r} not found")


def cmd_sensitivity(args) -> int:
    cfg_model, params = load_weights(args.weights)
    dataset = load_dataset(args.dataset, rasters="archive")
    try:
        idx, ex = _find_example(dataset, args.example)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raster = dataset.rasters[idx]
    sens = occlusion_sensitivity(params, cfg_model, raster, ex.state[: cfg_model.state_dim],
                                 box_size=args.box, stride=args.stride)
    out = Path(args.out_file)
    matrix_csv(sens.scores, out.with_suffix(".csv"))
    heatmap_ppm(sens.scores, out, cell=max(1, args.stride))
    print(f"wrote {out} (grid {sens.scores.shape[0]}x{sens.scores.shape[1]})")
    return 0


def cmd_dropout(args) -> int:
    cfg_model, params = load_weights(args.weights)
    dataset = load_dataset(args.dataset, rasters="archive")
    try:
        idx, ex = _find_example(dataset, args.example)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    var = dropout_epistemic(params, cfg_model, dataset.rasters[idx],
                            ex.state[: cfg_model.state_dim], rate=args.rate,
                            repeats=args.repeats, seed=args.seed or 0)
    std = epistemic_std(var)
    with open(args.out_file, "w", encoding="utf-8") as fh:
        fh.write("horizon_s,var_x,var_y,std\n")
        for h in range(len(std)):
            fh.write(f"{(h + 1) * TICK_DT:.1f},{var[h, 0]:.8g},{var[h, 1]:.8g},{std[h]:.8g}\n")
    print(f"wrote {args.out_file}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajcast",
        description="Generate synthetic traffic data, train the raster trajectory "
                    "predictor, and evaluate it against engineered baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("gen", help="generate a dataset")
    common(p)
    p.add_argument("--scenarios", help="e.g. straight_multilane:20,parking_cut_in:8")
    p.add_argument("--history-k", dest="history_k", type=int,
                   help="raster history depth (1 disables fading)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the predictor")
    common(p)
    p.add_argument("--dataset", required=True, help="dataset directory from gen")
    p.add_argument("--mode", choices=("point", "uncertain"), default="point")
    p.add_argument("--init", help="point-model weights to initialize from")
    p.add_argument("--epochs", type=int, help="override train.epochs")
    p.add_argument("weights_out", help="weights output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate methods on the test split")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--methods", required=True,
                   help="comma list: ukf,linear,lane_assoc,model:<weights>")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="rasterize one scene to a PPM")
    common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--actor", required=True)
    p.add_argument("--tick", type=int, required=True)
    p.add_argument("out_file")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sensitivity", help="occlusion sensitivity map for one example")
    common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--example", required=True)
    p.add_argument("--box", type=int, default=15)
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("out_file")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("dropout", help="dropout epistemic variance for one example")
    common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--example", required=True)
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("out_file")
    p.set_defaults(func=cmd_dropout)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
