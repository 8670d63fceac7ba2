"""Command-line entry point.

Each run subcommand (``plan``, ``simulate``, ``optimize``, ``inpaint``,
``pipeline``) takes a TOML config and an output directory and either
executes in-process or, with ``--server URL``, posts the same request to a
running service. ``serve`` starts that service.

Examples::

    mocomp pipeline scene.toml --out runs/demo --seed 7
    mocomp inpaint scene.toml --frames 12 --steps 50 --denoiser drift
    mocomp simulate scene.toml --set sim.steps=2000 --set sim.dt=5e-4
    mocomp serve --port 8000
    mocomp plan scene.toml --server http://localhost:8000
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .pipeline import MODES, PipelineConfig, run_pipeline

__all__ = ["build_parser", "main"]

_MODE_HELP = {
    "plan": "route a scenario to the simulation or inpainting branch",
    "simulate": "run the configured scene and export the trajectory",
    "optimize": "fit material parameters to a reference trajectory",
    "inpaint": "generate motion frames over a masked composite",
    "pipeline": "plan, then run whichever branch the decision picks",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mocomp",
        description="Motion-aware image composition: physics or inpainting, routed per scenario.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=_MODE_HELP[mode])
        p.add_argument("config", help="TOML config file")
        p.add_argument(
            "--out",
            default=None,
            help=f"output directory (default: mocomp-out-{mode})",
        )
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="BLOCK.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.add_argument(
            "--offline",
            action="store_true",
            help="use rule-based routing even if a chat backend is configured",
        )
        p.add_argument(
            "--server",
            default=None,
            metavar="URL",
            help="post the run to a service instead of executing in-process",
        )
        if mode in ("inpaint", "pipeline"):
            p.add_argument("--frames", type=int, help="frames to generate")
            p.add_argument("--steps", type=int, help="denoising steps per frame")
            p.add_argument("--denoiser", help="denoiser name (see README)")
            p.add_argument("--composite", help="precomposed input image (PNG)")
            p.add_argument("--mask", help="insertion mask (PNG, 0 = region to animate)")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _inpaint_overrides(args: argparse.Namespace) -> list[str]:
    """Convenience flags become [inpaint] overrides; paths resolve from CWD."""
    out = []
    if getattr(args, "frames", None) is not None:
        out.append(f"inpaint.frames={args.frames}")
    if getattr(args, "steps", None) is not None:
        out.append(f"inpaint.steps={args.steps}")
    if getattr(args, "denoiser", None) is not None:
        out.append(f'inpaint.denoiser="{args.denoiser}"')
    for key in ("composite", "mask"):
        value = getattr(args, key, None)
        if value is not None:
            out.append(f'inpaint.{key}="{Path(value).resolve()}"')
    return out


def _print_summary(mode: str, manifest: dict) -> None:
    stages = manifest.get("stages", {})
    if "plan" in stages:
        print(f"routing: {stages['plan']['method']}")
    if "simulate" in stages:
        print(f"trajectory: {stages['simulate']['frame_count']} frames exported")
    if "optimize" in stages:
        print(f"optimization: {stages['optimize']['iterations']} iterations")
    if "inpaint" in stages:
        frames = stages["inpaint"]["frames"]
        print(f"inpainting: {len(frames)} frames, best saved as {stages['inpaint']['selected']}")


def _run_local(mode: str, args: argparse.Namespace, overrides: list[str]) -> int:
    out_dir = Path(args.out) if args.out else Path(f"mocomp-out-{mode}")
    pcfg = PipelineConfig(
        mode=mode,
        config_path=Path(args.config),
        out_dir=out_dir,
        overrides=tuple(overrides),
        seed=args.seed,
        offline=args.offline,
    )
    status = run_pipeline(pcfg)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    if status != 0:
        print(
            f"error in stage {manifest.get('failed_stage')}: {manifest.get('error')}",
            file=sys.stderr,
        )
        return status
    _print_summary(mode, manifest)
    print(f"artifacts: {out_dir}")
    return 0


def _run_remote(mode: str, args: argparse.Namespace, overrides: list[str]) -> int:
    import httpx

    out_dir = Path(args.out) if args.out else Path(f"mocomp-out-{mode}")
    payload = {
        "config_path": str(Path(args.config).resolve()),
        "out_dir": str(out_dir.resolve()),
        "overrides": list(overrides),
        "seed": args.seed,
        "offline": args.offline,
    }
    url = args.server.rstrip("/") + "/" + mode
    try:
        response = httpx.post(url, json=payload, timeout=600.0)
    except httpx.HTTPError as exc:
        print(f"error contacting {url}: {exc}", file=sys.stderr)
        return 1
    if response.status_code == 400:
        detail = response.json().get("detail", {})
        print(
            f"error in stage {detail.get('failed_stage')}: {detail.get('error')}",
            file=sys.stderr,
        )
        return 1
    if response.status_code != 200:
        print(f"server error {response.status_code}: {response.text}", file=sys.stderr)
        return 1
    body = response.json()
    _print_summary(mode, body["manifest"])
    print(f"artifacts: {body['out_dir']}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("mocomp.service.app:app", host=args.host, port=args.port)
        return 0
    overrides = list(args.overrides) + _inpaint_overrides(args)
    if args.server:
        return _run_remote(args.command, args, overrides)
    return _run_local(args.command, args, overrides)


if __name__ == "__main__":
    sys.exit(main())
