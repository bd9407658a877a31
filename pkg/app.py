import argparse
import asyncio
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from commands import COMMANDS
from commands.base_command import EXIT_FAILURE, EXIT_USAGE
from config.settings import settings

logger = logging.getLogger("softras")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softras",
        description="Soft silhouette rasterizer and multi-view mesh fitting",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level (default from SOFTRAS_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    render = subparsers.add_parser("render", help=COMMANDS["render"].description)
    render.add_argument("--mesh", required=True, help="OBJ path or built-in shape name")
    render.add_argument("--azimuth", type=float, default=0.0)
    render.add_argument("--elevation", type=float, default=0.0)
    render.add_argument("--distance", type=float, default=settings.CAMERA_DISTANCE)
    render.add_argument("--size", type=int, default=settings.IMAGE_SIZE)
    render.add_argument("--sigma", type=float, default=settings.SIGMA)
    mode = render.add_mutually_exclusive_group()
    mode.add_argument("--hard", action="store_true", help="Write the binary silhouette")
    mode.add_argument("--color", action="store_true", help="Write vertex colors as a binary PPM")
    render.add_argument("--truncate", action="store_true", help="Skip pixels outside each face's dilated bounding box")
    render.add_argument("--out", required=True)

    genviews = subparsers.add_parser("genviews", help=COMMANDS["genviews"].description)
    genviews.add_argument("--mesh", required=True, help="OBJ path or built-in shape name")
    genviews.add_argument("--viewset", choices=["ring24", "grid120"], default="ring24")
    genviews.add_argument("--size", type=int, default=settings.IMAGE_SIZE)
    genviews.add_argument("--outdir", required=True)
    genviews.add_argument("--manifest", required=True)

    fit = subparsers.add_parser("fit", help=COMMANDS["fit"].description)
    fit.add_argument("--template", default="sphere642", help="sphere642 or an OBJ path")
    fit.add_argument("--manifest", required=True)
    fit.add_argument("--iters", type=int, default=settings.FIT_ITERATIONS)
    fit.add_argument("--out", required=True)
    fit.add_argument("--log", required=True, help="Loss history CSV")
    fit.add_argument("--sigma", type=float)
    fit.add_argument("--lambda", dest="lambda_", type=float)
    fit.add_argument("--mu", type=float)
    fit.add_argument("--alpha", type=float)
    fit.add_argument("--truncate", action="store_true")
    fit.add_argument("--workers", type=int)

    gradcheck = subparsers.add_parser("gradcheck", help=COMMANDS["gradcheck"].description)
    gradcheck.add_argument("--trials", type=int, default=settings.GRADCHECK_TRIALS)
    gradcheck.add_argument("--seed", type=int, default=settings.GRADCHECK_SEED)

    eval3d = subparsers.add_parser("eval3d", help=COMMANDS["eval3d"].description)
    eval3d.add_argument("--mesh", required=True)
    eval3d.add_argument("--ref", required=True)
    eval3d.add_argument("--resolution", type=int, default=settings.VOXEL_RESOLUTION)

    probmap = subparsers.add_parser("probmap", help=COMMANDS["probmap"].description)
    probmap.add_argument("--sigma", type=float, default=settings.SIGMA)
    probmap.add_argument("--size", type=int, default=settings.IMAGE_SIZE)
    probmap.add_argument("--out", required=True)

    ablation = subparsers.add_parser("ablation", help=COMMANDS["ablation"].description)
    ablation.add_argument("--study", choices=["regularizers", "views"], required=True)
    ablation.add_argument("--iters", type=int)
    ablation.add_argument("--size", type=int)
    ablation.add_argument("--truncate", action="store_true")
    ablation.add_argument("--out")

    return parser


def _command_input(args: argparse.Namespace) -> Dict[str, Any]:
    input_data = {key: value for key, value in vars(args).items() if key not in ("command", "log_level")}
    if "lambda_" in input_data:
        input_data["lambda"] = input_data.pop("lambda_")
    return input_data


def _print_result(command: str, data: Dict[str, Any]) -> None:
    if command == "render":
        print(f"wrote {data['mode']} image {data['out']} ({data['size']}x{data['size']}, coverage {data['coverage']:.4f})")
    elif command == "genviews":
        print(f"wrote {data['views']} {data['viewset']} views to {data['outdir']}, manifest {data['manifest']}")
    elif command == "fit":
        final = data["final_loss"]
        if final is not None:
            color = "" if final["color"] is None else f" color={final['color']:.6f}"
            print(
                f"final loss: total={final['total']:.6f} iou={final['iou']:.6f} "
                f"laplacian={final['laplacian']:.6f} flattening={final['flattening']:.6f}{color}"
            )
        print(f"mean 2D IoU: {data['mean_2d_iou']:.4f}")
    elif command == "gradcheck":
        print(data["summary"])
    elif command == "eval3d":
        print(f"3D IoU: {data['iou_3d']:.6f}")
    elif command == "probmap":
        print(f"wrote probability map {data['out']} (sigma {data['sigma']:g}, mean {data['mean_probability']:.4f})")
    else:
        print(json.dumps(data, indent=2, default=str))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    problems = settings.validate()
    if problems:
        for problem in problems:
            logger.error(f"Configuration error: {problem}")
        return EXIT_USAGE

    command = COMMANDS[args.command]
    try:
        response = asyncio.run(command.execute(_command_input(args)))
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return EXIT_FAILURE

    if response.get("data"):
        _print_result(args.command, response["data"])
    if not response["success"]:
        error = response["error"]
        print(f"error [{error['code']}]: {error['message']}", file=sys.stderr)
    return response["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
