"""Command line entry point.

Exit codes: 0 on success, 2 for user or input errors, 1 for internal errors.
Failures print one JSON line ``{"error": {...}}`` to standard error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import structlog
from pydantic import ValidationError

from app.core.config import get_settings
from app.core.exceptions import INTERNAL_EXIT_CODE, ArgumentError, CkaRefineError, UsageError
from app.core.logging import configure_logging
from app.models.activation import Family, FlattenMode, TransformTag
from app.models.cka import CkaConfig, Estimator
from app.models.kernel import KernelKind
from app.models.synthetic import PlantedSpec, SensitivityTag
from app.models.transform import TransformSpec
from app.schemas.pipeline import (
    ImageFormat,
    Palette,
    PipelineConfig,
    RenderOptions,
    StructureParams,
)
from app.services import arch_family, synth_oracle
from app.services.pipeline import (
    AnalysisPipeline,
    analyze_blocks,
    analyze_coverage,
    render_stored,
)
from app.services.tensor_store import find_manifests, write_activation_set
from app.services.transforms import apply_set_batch

logger = structlog.get_logger(__name__)

FLATTEN_CHOICES = {"all": FlattenMode.FLATTEN_ALL, "spatial-mean": FlattenMode.SPATIAL_MEAN}


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message, command=self.prog)


def _int_list(text: str) -> List[int]:
    """Parse ``"2-10"`` or ``"2,4,6"``."""
    values: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-", 1)
                values.extend(range(int(lo), int(hi) + 1))
            elif part:
                values.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from exc
    return values


def _cka_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--kernel", choices=[k.value for k in KernelKind], default=KernelKind.LINEAR.value)
    parent.add_argument("--estimator", choices=[e.value for e in Estimator], default=Estimator.UNBIASED.value)
    parent.add_argument("--sigma-frac", type=float, default=1.0)
    parent.add_argument("--minibatch", type=int, default=None)
    parent.add_argument("--flatten", choices=sorted(FLATTEN_CHOICES), default="all")
    parent.add_argument("--branch", default=None, help="keep only layers tagged diff, raw or mix")
    parent.add_argument("--average-folds", action="store_true")
    return parent


def _structure_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--tau", type=float, default=0.8)
    parent.add_argument("--min-coverage", type=float, default=1.0)
    parent.add_argument("--max-blocks", type=int, default=4)
    parent.add_argument("--penalty", type=float, default=0.05)
    return parent


def _render_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--palette", choices=[p.value for p in Palette], default=Palette.GRAY.value)
    parent.add_argument("--clamp", type=float, nargs=2, metavar=("LO", "HI"), default=[0.0, 1.0])
    parent.add_argument("--scale", type=int, default=1)
    parent.add_argument("--svg", action="store_true", help="also write SVG heatmaps")
    return parent


def _out_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--out", type=Path, default=Path("out"))
    return parent


def _structure(args: argparse.Namespace) -> StructureParams:
    return StructureParams(
        tau=args.tau,
        min_coverage=args.min_coverage,
        max_blocks=args.max_blocks,
        penalty=args.penalty
    )


def _render(args: argparse.Namespace) -> RenderOptions:
    return RenderOptions(
        palette=Palette(args.palette),
        clamp=tuple(args.clamp),
        scale=args.scale,
        svg=getattr(args, "svg", False)
    )


def _manifests(paths: Sequence[Path]) -> List[Path]:
    """Manifest files as given, directories expanded to the manifests below them."""
    found: List[Path] = []
    for path in paths:
        if path.is_dir():
            inside = find_manifests(path)
            if not inside:
                raise UsageError(f"no manifest.json under {path}")
            found.extend(inside)
        else:
            found.append(path)
    return found


def _pipeline(
    args: argparse.Namespace,
    reference: Sequence[Path],
    others: Sequence[Path] = ()
) -> AnalysisPipeline:
    config = PipelineConfig(
        reference=_manifests(reference),
        others=list(others),
        cka=CkaConfig(
            kernel=KernelKind(args.kernel),
            estimator=Estimator(args.estimator),
            sigma_frac=args.sigma_frac,
            minibatch_size=args.minibatch
        ),
        structure=_structure(args) if hasattr(args, "tau") else StructureParams(),
        render=_render(args),
        flatten=FLATTEN_CHOICES[args.flatten],
        average_folds=args.average_folds,
        branch=args.branch,
        out_dir=args.out
    )
    return AnalysisPipeline(config)


def _emit(document: Dict[str, Any]) -> None:
    print(json.dumps(document, sort_keys=True))


def cmd_self(args: argparse.Namespace) -> int:
    matrices = _pipeline(args, args.manifests).run_self()
    _emit({"matrices": [m.row_model.model_id for m in matrices], "out": str(args.out)})
    return 0


def cmd_cross(args: argparse.Namespace) -> int:
    matrix = _pipeline(args, [args.a]).run_cross(args.b)
    _emit({"shape": list(matrix.shape), "out": str(args.out)})
    return 0


def _check_others(path: Path) -> None:
    if not path.is_dir():
        raise UsageError(f"{path} is not a directory")


def cmd_grid(args: argparse.Namespace) -> int:
    _check_others(args.others)
    recommendation = _pipeline(args, [args.reference], [args.others]).run_grid()
    _emit({"depth": recommendation.depth, "cells": len(recommendation.per_depth), "out": str(args.out)})
    return 0


def cmd_recommend(args: argparse.Namespace) -> int:
    _check_others(args.others)
    recommendation = _pipeline(args, [args.reference], [args.others]).run_grid(write_cells=False)
    print(recommendation.depth if recommendation.recommended else "none")
    return 0


def cmd_blocks(args: argparse.Namespace) -> int:
    partition = analyze_blocks(args.matrix, _structure(args), args.out)
    _emit({"boundaries": partition.boundaries, "k": partition.k})
    return 0


def cmd_coverage(args: argparse.Namespace) -> int:
    report = analyze_coverage(args.matrix, _structure(args), args.out)
    _emit({"coverage_fraction": report.coverage_fraction, "uncovered_layers": report.uncovered_layers})
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    path = render_stored(args.matrix, args.out, _render(args), ImageFormat(args.format))
    print(path)
    return 0


def cmd_arch(args: argparse.Namespace) -> int:
    try:
        descriptor = arch_family.descriptor_for(args.family, args.depth)
    except ArgumentError as exc:
        raise UsageError(exc.message) from exc
    args.out.mkdir(parents=True, exist_ok=True)
    path = arch_family.emit(descriptor, args.out / f"{descriptor.family.value}-{descriptor.depth}.json")
    _emit({"path": str(path), "param_count": arch_family.param_count(descriptor)})
    return 0


def cmd_synth_blocks(args: argparse.Namespace) -> int:
    spec = PlantedSpec(
        n_examples=args.examples,
        feature_dim=args.features,
        layer_count=args.layers,
        block_boundaries=args.boundaries,
        noise_sigma=args.noise,
        seed=args.seed,
        model_id=args.model_id
    )
    path = write_activation_set(synth_oracle.planted_block_activations(spec), args.out)
    print(path)
    return 0


def cmd_synth_family(args: argparse.Namespace) -> int:
    base = PlantedSpec(
        n_examples=args.examples,
        feature_dim=args.features,
        noise_sigma=args.noise,
        seed=args.seed,
        model_id=args.model_id
    )
    shared = {
        depth: ["early", "late"] if depth >= args.late_from else ["early"]
        for depth in args.depths
    }
    family = synth_oracle.planted_depth_family(base, args.depths, shared, groups=["early", "late"])
    for aset in family:
        print(write_activation_set(aset, args.out / aset.model_id))
    return 0


def cmd_synth_probe(args: argparse.Namespace) -> int:
    tags = [SensitivityTag(tag) for tag in args.tags.split(",")]
    spec = PlantedSpec(
        n_examples=args.examples,
        feature_dim=args.features,
        layer_count=len(tags),
        noise_sigma=args.noise,
        seed=args.seed,
        sensitivity_tags=tags,
        model_id=args.model_id
    )
    clips = synth_oracle.synthetic_clips(args.examples, args.frames, args.size, args.frame_rate, args.seed)
    key = synth_oracle.examples_hash(args.seed, args.examples)
    transform = TransformSpec(tag=TransformTag(args.transform), seed=args.seed)

    clean = synth_oracle.probe_activations(spec, clips, TransformTag.NONE, examples_key=key)
    print(write_activation_set(clean, args.out / "none"))
    moved = synth_oracle.probe_activations(
        spec, apply_set_batch(clips, transform), transform.tag, examples_key=key
    )
    print(write_activation_set(moved, args.out / transform.tag.value, transform_spec=transform))
    return 0


def build_parser() -> argparse.ArgumentParser:
    """Parser for every sub-command."""
    cka_flags, structure_flags = _cka_parent(), _structure_parent()
    render_flags, out_flags = _render_parent(), _out_parent()

    parser = _Parser(prog="cka-refine", description="CKA-driven architecture refinement")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("self", parents=[cka_flags, render_flags, out_flags], help="self-similarity map")
    sub.add_argument("manifests", type=Path, nargs="+")
    sub.set_defaults(handler=cmd_self)

    sub = commands.add_parser("cross", parents=[cka_flags, render_flags, out_flags], help="cross-similarity map")
    sub.add_argument("a", type=Path)
    sub.add_argument("b", type=Path)
    sub.set_defaults(handler=cmd_cross)

    for name, handler, text in (
        ("grid", cmd_grid, "one-to-all grid, coverage and recommendation"),
        ("recommend", cmd_recommend, "depth recommendation only"),
    ):
        sub = commands.add_parser(
            name, parents=[cka_flags, structure_flags, render_flags, out_flags], help=text
        )
        sub.add_argument("reference", type=Path, help="reference manifest or directory of fold manifests")
        sub.add_argument("others", type=Path, help="directory searched for comparison manifests")
        sub.set_defaults(handler=handler)

    sub = commands.add_parser("blocks", parents=[structure_flags, out_flags], help="block partition")
    sub.add_argument("matrix", type=Path)
    sub.set_defaults(handler=cmd_blocks)

    sub = commands.add_parser("coverage", parents=[structure_flags, out_flags], help="coverage report")
    sub.add_argument("matrix", type=Path)
    sub.set_defaults(handler=cmd_coverage)

    sub = commands.add_parser("heatmap", parents=[render_flags, out_flags], help="render a stored matrix")
    sub.add_argument("matrix", type=Path)
    sub.add_argument("--format", choices=[f.value for f in ImageFormat], default=ImageFormat.PGM.value)
    sub.set_defaults(handler=cmd_heatmap)

    sub = commands.add_parser("arch", parents=[out_flags], help="emit an architecture descriptor")
    sub.add_argument("family", choices=[f.value for f in Family])
    sub.add_argument("depth", type=int)
    sub.set_defaults(handler=cmd_arch)

    synth = commands.add_parser("synth", help="generate synthetic activation sets")
    kinds = synth.add_subparsers(dest="kind", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--examples", type=int, default=128)
    common.add_argument("--features", type=int, default=16)
    common.add_argument("--noise", type=float, default=0.0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--model-id", default="planted")

    sub = kinds.add_parser("blocks", parents=[common, out_flags])
    sub.add_argument("--layers", type=int, default=8)
    sub.add_argument("--boundaries", type=_int_list, default=[])
    sub.set_defaults(handler=cmd_synth_blocks)

    sub = kinds.add_parser("family", parents=[common, out_flags])
    sub.add_argument("--depths", type=_int_list, default=list(range(2, 11)))
    sub.add_argument("--late-from", type=int, default=5, help="smallest depth holding the late group")
    sub.set_defaults(handler=cmd_synth_family)

    sub = kinds.add_parser("probe", parents=[common, out_flags])
    sub.add_argument("--tags", default="spatial,temporal,none")
    sub.add_argument("--transform", choices=[t.value for t in TransformTag if t != TransformTag.NONE],
                     default=TransformTag.SPATIAL.value)
    sub.add_argument("--frames", type=int, default=64)
    sub.add_argument("--size", type=int, default=8)
    sub.add_argument("--frame-rate", type=float, default=30.0)
    sub.set_defaults(handler=cmd_synth_probe)

    return parser


def _report(error: Dict[str, Any]) -> None:
    sys.stderr.write(json.dumps({"error": error}, sort_keys=True) + "\n")


def _validation_message(exc: ValidationError) -> str:
    first = exc.errors()[0]
    location = ".".join(str(part) for part in first["loc"])
    return f"{location}: {first['msg']}" if location else first["msg"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    settings = get_settings()
    configure_logging(settings.LOG_LEVEL, settings.LOG_JSON)
    try:
        args = build_parser().parse_args(argv)
        handler: Callable[[argparse.Namespace], int] = args.handler
        return handler(args)
    except CkaRefineError as exc:
        logger.warning("command_failed", kind=exc.kind, message=exc.message)
        _report(exc.to_dict())
        return exc.exit_code
    except ValidationError as exc:
        error = UsageError(_validation_message(exc))
        _report(error.to_dict())
        return error.exit_code
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal_error")
        _report({"kind": "internal", "message": str(exc)})
        return INTERNAL_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
