"""Command-line surface: phantom-gen, train, predict, eval.

Reports never embed wall-clock values, so runs with identical inputs and
seeds produce byte-identical output files; timings go to stdout only.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import PhantomSpec, dsc, generate_phantom, summarize
from .config import RunConfig, default_config, load_config
from .errors import FormatError, GeometryError
from .fileio import read_nifti, read_volume, write_volume
from .nn.models import UNetModel
from .nn.train import fit
from .nn.weights import load_weights, save_weights
from .pipeline import (
    StageModels,
    prepare_abnormal_set,
    prepare_coarse_set,
    prepare_fine_set,
    run_case,
)
from .volume import Mask3D, Volume3D


def _parse_dims(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected D,H,W, got {text!r}")
    return tuple(parts)


def _load_cases(data_dir: Path):
    cases = []
    for vol_path in sorted(data_dir.glob("*_volume.rvol")):
        mask_path = vol_path.with_name(vol_path.name.replace("_volume.rvol", "_mask.rvol"))
        if not mask_path.exists():
            raise FileNotFoundError(f"no mask file for {vol_path.name} (expected {mask_path.name})")
        vol = read_volume(vol_path)
        mask = read_volume(mask_path)
        if not isinstance(vol, Volume3D):
            raise FormatError(f"{vol_path.name}: expected an intensity volume")
        if not isinstance(mask, Mask3D):
            raise FormatError(f"{mask_path.name}: expected a mask")
        cases.append((vol, mask))
    return cases


def _read_input_volume(path: Path, cfg: RunConfig) -> Volume3D:
    if path.suffix == ".rvol":
        vol = read_volume(path)
    else:
        vol = read_nifti(path, depth_axis=cfg.nifti_depth_axis)
    if not isinstance(vol, Volume3D):
        raise FormatError(f"{path.name}: expected an intensity volume, found a mask")
    return vol


def _case_id_from_path(path: Path) -> str:
    name = path.name
    for suffix in (".nii.gz", ".nii", ".rvol"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    if name.endswith("_volume"):
        name = name[: -len("_volume")]
    return name


def cmd_phantom_gen(args) -> int:
    cfg = load_config(args.config) if args.config else default_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    chooser = np.random.default_rng(args.seed)
    for i in range(args.count):
        single = chooser.uniform() < args.single_kidney_fraction
        spec = PhantomSpec(
            dims=args.dims,
            spacing=cfg.pipeline.normalized_spacing,
            n_kidneys=1 if single else 2,
            noise_sigma=args.noise,
            seed=args.seed * 100003 + i,
        )
        vol, mask = generate_phantom(spec)
        write_volume(vol, out_dir / f"case{i:04d}_volume.rvol")
        write_volume(mask, out_dir / f"case{i:04d}_mask.rvol")
    print(f"wrote {args.count} phantom case(s) to {out_dir}")
    return 0


_STAGE_DIMS = {
    "coarse": lambda p: p.coarse_dims,
    "fine": lambda p: p.fine_dims,
    "abnormal": lambda p: p.abnormal_dims,
}
_STAGE_PREP = {
    "coarse": prepare_coarse_set,
    "fine": prepare_fine_set,
    "abnormal": prepare_abnormal_set,
}


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    dims = _STAGE_DIMS[args.stage](cfg.pipeline)
    step = 2**cfg.unet.depth
    if dims[0] % step or dims[1] % step:
        print(
            f"error: {args.stage} dims {dims} not divisible by 2^{cfg.unet.depth}",
            file=sys.stderr,
        )
        return 2
    cases = _load_cases(Path(args.data))
    pairs = _STAGE_PREP[args.stage](cases, cfg.pipeline)
    if not pairs:
        print("error: no training pairs", file=sys.stderr)
        return 2
    print(f"training {args.stage} model on {len(pairs)} slice pairs ...")
    weights, trace = fit(cfg.unet, pairs, cfg.train)
    save_weights(weights, args.out)
    print(f"epoch losses: {' '.join(f'{v:.4f}' for v in trace)}")
    print(f"saved weights to {args.out}")
    return 0


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    vol = _read_input_volume(Path(args.input), cfg)
    models = StageModels(
        coarse=UNetModel(cfg.unet, load_weights(args.coarse)),
        abnormal=UNetModel(cfg.unet, load_weights(args.abnormal)),
        fine=UNetModel(cfg.unet, load_weights(args.fine)),
    )
    result = run_case(vol, models, cfg.pipeline)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_volume(result.fine_mask, out)
    if args.emit_coarse:
        Path(args.emit_coarse).parent.mkdir(parents=True, exist_ok=True)
        write_volume(result.coarse_mask, args.emit_coarse)
    if args.report:
        report = {
            "case_id": _case_id_from_path(Path(args.input)),
            "verdict": result.verdict.verdict,
            "n_kidney": result.verdict.n_kidney,
            "kidney_ids": list(result.verdict.kidney_ids),
            "flags": list(result.flags),
        }
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    timing = " ".join(f"{k}={v:.2f}s" for k, v in result.timings.items())
    print(f"verdict={result.verdict.verdict} n_kidney={result.verdict.n_kidney} [{timing}]")
    print(f"wrote mask to {out}")
    return 0


def _format_summary_line(stage: str, stats: dict[str, float]) -> str:
    return (
        f"{stage:<7} {stats['mean'] * 100:.2f} ± {stats['std'] * 100:.2f}"
        f"  max {stats['max'] * 100:.2f}  min {stats['min'] * 100:.2f}"
    )


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    gt_files = sorted(gt_dir.glob("*_mask.rvol"))
    if not gt_files:
        print(f"error: no ground-truth masks (*_mask.rvol) in {gt_dir}", file=sys.stderr)
        return 2

    rows = []
    failures = []
    for gt_path in gt_files:
        case_id = gt_path.name[: -len("_mask.rvol")]
        try:
            gt = read_volume(gt_path)
            fine_path = pred_dir / f"{case_id}_fine.rvol"
            if not fine_path.exists():
                raise FileNotFoundError(f"missing prediction {fine_path.name}")
            fine = read_volume(fine_path)
            if not isinstance(fine, Mask3D) or not isinstance(gt, Mask3D):
                raise FormatError("predictions and ground truth must be masks")
            fine_dsc = dsc(fine, gt)
            coarse_path = pred_dir / f"{case_id}_coarse.rvol"
            coarse_dsc = None
            if coarse_path.exists():
                coarse = read_volume(coarse_path)
                coarse_dsc = dsc(coarse, gt)
            verdict = "-"
            report_path = pred_dir / f"{case_id}_report.json"
            if report_path.exists():
                verdict = json.loads(report_path.read_text()).get("verdict", "-")
            rows.append((case_id, coarse_dsc, fine_dsc, verdict))
        except (OSError, FormatError, GeometryError, ValueError) as exc:
            failures.append((case_id, str(exc)))

    lines = []
    for case_id, coarse_dsc, fine_dsc, verdict in rows:
        coarse_txt = f"{coarse_dsc:.6f}" if coarse_dsc is not None else "-"
        lines.append(f"{case_id} {coarse_txt} {fine_dsc:.6f} {verdict}")
    for case_id, message in failures:
        lines.append(f"{case_id} ERROR {message}")

    lines.append("")
    lines.append("# stage   mean±std [%]  max [%]  min [%]")
    summary_json: dict[str, dict] = {}
    coarse_scores = [r[1] for r in rows if r[1] is not None]
    if coarse_scores:
        stats = summarize(coarse_scores)
        lines.append(_format_summary_line("coarse", stats))
        summary_json["coarse"] = stats
    else:
        lines.append("coarse  n/a")
    if rows:
        stats = summarize([r[2] for r in rows])
        lines.append(_format_summary_line("fine", stats))
        summary_json["fine"] = stats
    else:
        lines.append("fine    n/a")

    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text("\n".join(lines) + "\n")
    machine = {
        "cases": [
            {
                "case_id": r[0],
                "coarse_dsc": r[1],
                "fine_dsc": r[2],
                "verdict": r[3],
            }
            for r in rows
        ],
        "failures": [{"case_id": c, "error": m} for c, m in failures],
        "summary": summary_json,
    }
    Path(str(report_path) + ".json").write_text(json.dumps(machine, indent=2) + "\n")

    print("\n".join(lines))
    if failures:
        print(f"error: {len(failures)} case(s) failed", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="c2fseg",
        description="Coarse-to-fine volumetric binary segmentation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom-gen", help="generate synthetic phantom volume/mask pairs")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--single-kidney-fraction", type=float, default=0.0)
    p.add_argument("--dims", type=_parse_dims, default=(64, 96, 96))
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_phantom_gen)

    p = sub.add_parser("train", help="train one stage model on volume/mask pairs")
    p.add_argument("--stage", choices=("coarse", "fine", "abnormal"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run the full pipeline on one volume")
    p.add_argument("--input", required=True)
    p.add_argument("--coarse", required=True)
    p.add_argument("--abnormal", required=True)
    p.add_argument("--fine", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-coarse", default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, GeometryError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
