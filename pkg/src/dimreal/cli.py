"""Command-line entry points and the headless benchmark/eval harness.

Commands: ``simulate`` (headless run with optional artifact dumps),
``bench`` (timing + quality report as JSON lines), ``serve`` (live operator
server), ``export-ply`` (point cloud snapshot of one frame).

A ``--config`` JSON file overrides command-line flags; keys are the flag
names with underscores.  Configuration errors exit nonzero with a single
``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .detection import DetectorNoise, GroundTruthDetector, Tracker
from .errors import ConfigError
from .geometry import Pose
from .inpaint import BaselineEngine, DsttConfig, DsttEngine, weighted_l1
from .pipeline import (ConfirmCalibration, Pipeline, SetCalibration, StageTiming,
                       ToggleObject, export_ply)
from .scene import (CameraIntrinsics, SceneRenderer, SceneSpec, TrajectoryParams,
                    camera_trajectory, default_scene, load_scene)
from .server import LiveServer, create_app
from .service import LocalEngineClient


@dataclass
class RunConfig:
    scene: str | None = None
    engine: str = "baseline"           # baseline | dstt
    model_size: str = "small"          # dstt preset: small (64x36) | full (640x360)
    frames: int = 100
    seed: int = 0
    dropout: float = 0.0
    jitter: int = 0
    private: tuple[int, ...] = ()      # scene object ids to privatize at start
    trajectory: str = "static"
    report: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    ui_dir: str | None = None
    out: str | None = None
    frame: int = 0
    fps_limit: float = 0.0
    w_mask: float = 10.0
    w_valid: float = 1.0

    def validate(self) -> None:
        if self.engine not in ("baseline", "dstt"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.model_size not in ("small", "full"):
            raise ConfigError(f"unknown model size {self.model_size!r}")
        if self.frames <= 0:
            raise ConfigError("frame count must be positive")
        for path_field in ("scene", "ui_dir"):
            value = getattr(self, path_field)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{path_field} path does not exist: {value}")


def _scale_scene(spec: SceneSpec, width: int, height: int) -> SceneSpec:
    """Re-render the same world at a different raster resolution."""
    old = spec.intrinsics
    sx, sy = width / old.width, height / old.height
    intr = CameraIntrinsics(fx=old.fx * sx, fy=old.fy * sy, cx=old.cx * sx,
                            cy=old.cy * sy, width=width, height=height)
    return dataclasses.replace(spec, intrinsics=intr)


def build_scene(cfg: RunConfig) -> SceneSpec:
    spec = load_scene(cfg.scene, seed_override=cfg.seed) if cfg.scene \
        else default_scene(cfg.seed)
    if cfg.engine == "dstt":
        model_cfg = DsttConfig.small() if cfg.model_size == "small" else DsttConfig()
        if (spec.intrinsics.width, spec.intrinsics.height) != \
                (model_cfg.width, model_cfg.height):
            spec = _scale_scene(spec, model_cfg.width, model_cfg.height)
    return spec


def build_engine(cfg: RunConfig, spec: SceneSpec):
    if cfg.engine == "baseline":
        return BaselineEngine(spec.intrinsics.width, spec.intrinsics.height)
    model_cfg = DsttConfig.small() if cfg.model_size == "small" else DsttConfig()
    return DsttEngine(model_cfg, seed=cfg.seed)


def build_pipeline(cfg: RunConfig, spec: SceneSpec, engine=None) -> Pipeline:
    engine = engine or build_engine(cfg, spec)
    detector = GroundTruthDetector(
        DetectorNoise(dropout_prob=cfg.dropout, jitter_px=cfg.jitter, seed=cfg.seed),
        class_labels={o.id: o.class_label for o in spec.objects})
    return Pipeline(intrinsics=spec.intrinsics, detector=detector,
                    client=LocalEngineClient(engine), tracker=Tracker())


@dataclass
class EvalReport:
    engine: str
    width: int
    height: int
    frames: int
    fps: float
    wall_s: float
    weighted_l1_mean: float | None
    masked_mae_mean: float | None
    mask_area_mean: float
    mask_area_min: float
    mask_area_max: float
    engine_failures: int
    timings: list[StageTiming] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "type": "summary",
            "engine": self.engine,
            "width": self.width,
            "height": self.height,
            "frames": self.frames,
            "fps": round(self.fps, 3),
            "wall_s": round(self.wall_s, 4),
            "weighted_l1_mean": self.weighted_l1_mean,
            "masked_mae_mean": self.masked_mae_mean,
            "mask_area_mean": self.mask_area_mean,
            "mask_area_min": self.mask_area_min,
            "mask_area_max": self.mask_area_max,
            "engine_failures": self.engine_failures,
        }


def _match_private_tracks(pipeline: Pipeline, truth, private_object_ids) -> list[int]:
    """Map scene object ids to live track ids by best mask overlap."""
    track_ids = []
    for obj_id in private_object_ids:
        gt_mask = truth.object_masks.get(obj_id)
        if gt_mask is None or gt_mask.is_empty():
            continue
        best, best_iou = None, 0.0
        for track in pipeline.tracker.tracks:
            iou = track.latest.mask.iou(gt_mask)
            if iou > best_iou:
                best, best_iou = track.id, iou
        if best is not None:
            track_ids.append(best)
    return track_ids


def run_eval(cfg: RunConfig, save_outputs: str | None = None,
             progress=None) -> EvalReport:
    """Run the full pipeline headless on the simulator and score it.

    Per-frame timing records append to ``cfg.report`` as JSON lines, followed
    by one summary object.  Weighted L1 compares the inpainted frame against
    the simulator's object-free background over the private mask.  Reported
    fps covers capture + pipeline time; quality-metric computation (which
    needs ground truth a deployment would not have) happens off the clock.
    """
    cfg.validate()
    spec = build_scene(cfg)
    renderer = SceneRenderer(spec)
    pipeline = build_pipeline(cfg, spec)
    pipeline.submit(SetCalibration(Pose.identity()))
    pipeline.submit(ConfirmCalibration())

    report_file = open(cfg.report, "a") if cfg.report else None
    timings: list[StageTiming] = []
    l1_values: list[float] = []
    mae_values: list[float] = []
    areas: list[float] = []
    failures = 0
    last_result = None
    traj_params = TrajectoryParams()

    pipeline_wall = 0.0
    try:
        for t in range(cfg.frames):
            pose = camera_trajectory(cfg.trajectory, t, traj_params)
            t0 = time.perf_counter()
            frame, truth = renderer.render(pose, t)
            capture_ms = (time.perf_counter() - t0) * 1e3

            result = pipeline.step(frame, truth, capture_ms)
            pipeline_wall += time.perf_counter() - t0
            last_result = result
            timings.append(result.timing)
            failures += int(result.timing.engine_failed)
            if report_file:
                report_file.write(result.timing.to_json_line() + "\n")

            if t == 0 and cfg.private:
                for track_id in _match_private_tracks(pipeline, truth, cfg.private):
                    pipeline.submit(ToggleObject(track_id))

            if not result.mask.is_empty() and not result.timing.engine_failed:
                pred = result.inpainted.astype(np.float64) / 255.0
                target = truth.background_rgb.astype(np.float64) / 255.0
                l1_values.append(weighted_l1(pred, target, result.mask.bits[..., None],
                                             w_mask=cfg.w_mask, w_valid=cfg.w_valid))
                diff = np.abs(pred - target)[result.mask.bits]
                mae_values.append(float(diff.mean()))
                areas.append(result.mask.area_fraction())
            if progress:
                progress(t, result)
        wall_s = pipeline_wall

        report = EvalReport(
            engine=cfg.engine,
            width=spec.intrinsics.width,
            height=spec.intrinsics.height,
            frames=cfg.frames,
            fps=cfg.frames / wall_s if wall_s > 0 else float("inf"),
            wall_s=wall_s,
            weighted_l1_mean=float(np.mean(l1_values)) if l1_values else None,
            masked_mae_mean=float(np.mean(mae_values)) if mae_values else None,
            mask_area_mean=float(np.mean(areas)) if areas else 0.0,
            mask_area_min=float(np.min(areas)) if areas else 0.0,
            mask_area_max=float(np.max(areas)) if areas else 0.0,
            engine_failures=failures,
            timings=timings,
        )
        if report_file:
            report_file.write(json.dumps(report.summary(), sort_keys=True) + "\n")
    finally:
        if report_file:
            report_file.close()

    if save_outputs and last_result is not None:
        out_dir = Path(save_outputs)
        out_dir.mkdir(parents=True, exist_ok=True)
        cv2.imwrite(str(out_dir / "last_frame.png"),
                    cv2.cvtColor(last_result.output, cv2.COLOR_RGB2BGR))
        export_ply(last_result.cloud, out_dir / "last_frame.ply")
    return report


# ---------------------------------------------------------------------------
# argparse wiring

def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", help="scene JSON file (default: built-in desk scene)")
    p.add_argument("--seed", type=int, default=0, help="seed for every seeded component")
    p.add_argument("--engine", choices=["baseline", "dstt"], default="baseline",
                   help="inpainting engine")
    p.add_argument("--model-size", choices=["small", "full"], default="small",
                   help="dstt preset: small=64x36, full=640x360")
    p.add_argument("--frames", type=int, default=100, help="number of frames to run")
    p.add_argument("--dropout", type=float, default=0.0,
                   help="detector dropout probability")
    p.add_argument("--jitter", type=int, default=0, help="detector jitter, pixels")
    p.add_argument("--private", default="",
                   help="comma-separated scene object ids to privatize")
    p.add_argument("--trajectory", choices=["static", "pan", "orbit"],
                   default="static", help="camera trajectory")
    p.add_argument("--report", help="JSON-lines timing report path (appended)")
    p.add_argument("--config", help="JSON config file; overrides flags")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(overrides, dict):
            raise ConfigError("config file must hold a JSON object")

    values = {}
    for f in dataclasses.fields(RunConfig):
        if hasattr(args, f.name):
            values[f.name] = getattr(args, f.name)
    values.update({k.replace("-", "_"): v for k, v in overrides.items()})
    unknown = set(values) - {f.name for f in dataclasses.fields(RunConfig)}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    private = values.get("private", "")
    if isinstance(private, str):
        values["private"] = tuple(int(v) for v in private.split(",") if v.strip())
    elif isinstance(private, (list, tuple)):
        values["private"] = tuple(int(v) for v in private)

    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    report = run_eval(cfg, save_outputs=cfg.out)
    print(json.dumps(report.summary(), sort_keys=True))
    return 0


def _cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.report:
        cfg.report = "bench_report.jsonl"
    report = run_eval(cfg)
    summary = report.summary()
    print(json.dumps(summary, sort_keys=True))
    print(f"fps={report.fps:.2f} ({'meets' if report.fps >= 20 else 'below'} "
          f"the 20 fps real-time target)")
    return 0


def _cmd_export_ply(args) -> int:
    cfg = _config_from_args(args)
    cfg.frames = cfg.frame + 1
    out = cfg.out or "frame.ply"
    holder = {}

    def keep_last(t, result):
        holder["result"] = result

    run_eval(cfg, progress=keep_last)
    export_ply(holder["result"].cloud, out)
    print(f"wrote {out} ({len(holder['result'].cloud)} points)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    cfg = _config_from_args(args)
    spec = build_scene(cfg)
    renderer = SceneRenderer(spec)
    pipeline = build_pipeline(cfg, spec)
    live = LiveServer(pipeline, renderer, trajectory=cfg.trajectory,
                      target_fps=cfg.fps_limit or 20.0)
    ui_dir = cfg.ui_dir
    if ui_dir is None and (Path("frontend/dist") / "index.html").is_file():
        ui_dir = "frontend/dist"
    app = create_app(live, ui_dir=ui_dir)
    print(f"serving on http://{cfg.host}:{cfg.port} (ws endpoint /ws)")
    uvicorn.run(app, host=cfg.host, port=cfg.port, ws_ping_interval=5.0,
                log_level="warning")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dimreal",
        description="Desk-scale diminished-reality privacy pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the pipeline headless on the simulator")
    _add_shared_flags(p)
    p.add_argument("--out", help="directory for last-frame PNG/PLY artifacts")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bench", help="timing benchmark with a JSON-lines report")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="live websocket server for the operator UI")
    _add_shared_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", help="static UI bundle directory")
    p.add_argument("--fps-limit", type=float, default=20.0,
                   help="frame loop pacing (0 = unpaced)")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("export-ply", help="export one frame's point cloud")
    _add_shared_flags(p)
    p.add_argument("--frame", type=int, default=0, help="frame index to export")
    p.add_argument("--out", help="output PLY path (default frame.ply)")
    p.set_defaults(func=_cmd_export_ply)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
