"""Flexible-depth architecture descriptors for the PhysNet-3DCNN and TS-CAN families.

Descriptors are declarative: they record layers, channels and pooling
placement but never build or run a network.
"""

import json
from math import prod
from pathlib import Path
from typing import Dict, List, Tuple, Union

import structlog
from pydantic import ValidationError

from app.core.exceptions import ArchValidationError, ArgumentError, StoreIOError
from app.models.activation import Family
from app.models.architecture import (
    ArchDescriptor,
    ArchInput,
    Branch,
    Follower,
    LayerOp,
    LayerSpec,
    PoolingSpec,
    PoolKind,
    Violation,
)

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

INPUT_SPATIAL = 64
PHYSNET_FRAMES = 136
TSCAN_FRAMES = 20
PHYSNET_DEPTHS = range(2, 16)
TSCAN_DEPTHS = range(1, 11)

# depth -> (layer indices followed by pooling, spatial strides)
PHYSNET_POOLING: Dict[int, Tuple[Tuple[int, ...], Tuple[int, ...]]] = {
    2: ((1,), (64,)),
    3: ((1, 2), (8, 8)),
    4: ((1, 2, 3), (4, 4, 4)),
    5: ((1, 2, 3, 4), (2, 4, 2, 4)),
    6: ((1, 2, 3, 4, 5), (2, 2, 2, 2, 4)),
    7: ((1, 2, 3, 4, 5, 6), (2, 2, 2, 2, 2, 2)),
    8: ((1, 2, 3, 4, 5, 7), (2, 2, 2, 2, 2, 2)),
    9: ((1, 2, 3, 4, 6, 8), (2, 2, 2, 2, 2, 2)),
    10: ((1, 2, 3, 5, 7, 9), (2, 2, 2, 2, 2, 2)),
    11: ((1, 2, 4, 6, 8, 10), (2, 2, 2, 2, 2, 2)),
    12: ((1, 3, 5, 7, 9, 11), (2, 2, 2, 2, 2, 2)),
    13: ((2, 4, 5, 8, 10, 12), (2, 2, 2, 2, 2, 2)),
    14: ((3, 5, 7, 9, 11, 13), (2, 2, 2, 2, 2, 2)),
    15: ((4, 6, 8, 10, 12, 14), (2, 2, 2, 2, 2, 2)),
}

# meta-depth -> meta-layers followed by 2x average pooling
TSCAN_POOLING: Dict[int, Tuple[int, ...]] = {
    1: (1,),
    2: (1, 2),
    3: (1, 2, 3),
    4: (1, 2, 3, 4),
    5: (1, 3, 4, 5),
    6: (1, 3, 5, 6),
    7: (1, 3),
    8: (1, 3),
    9: (1, 3),
    10: (1,),
}

PHYSNET_DROPOUT = 0.5
TSCAN_DROPOUT = 0.25
TSCAN_LAYERS_PER_META = 5


def physnet3dcnn_descriptor(depth: int) -> ArchDescriptor:
    """PhysNet-style 3D CNN with ``depth`` convolution layers (2-15)."""
    if depth not in PHYSNET_DEPTHS:
        raise ArgumentError(
            f"physnet3dcnn depth must be in {PHYSNET_DEPTHS.start}-{PHYSNET_DEPTHS.stop - 1}, got {depth}"
        )

    layers: List[LayerSpec] = []
    in_channels = 3
    for index in range(1, depth + 1):
        if index == 1:
            kernel, out_channels, padding = (1, 5, 5), 32, (0, 2, 2)
        elif index < depth:
            kernel, out_channels, padding = (5, 3, 3), 64, (2, 1, 1)
        else:
            kernel, out_channels, padding = (1, 1, 1), 1, (0, 0, 0)

        followers: List[Follower] = []
        if index < depth:
            followers = [Follower(kind="batch_norm"), Follower(kind="relu")]
            if index > 1 and index % 2 == 1:
                followers.append(Follower(kind="dropout", p=PHYSNET_DROPOUT))

        layers.append(
            LayerSpec(
                index=index,
                name=f"conv{index}",
                op=LayerOp.CONV3D,
                kernel=kernel,
                in_channels=in_channels,
                out_channels=out_channels,
                padding=padding,
                followers=followers
            )
        )
        in_channels = out_channels

    indices, strides = PHYSNET_POOLING[depth]
    pooling = [
        PoolingSpec(
            index=index,
            stride=stride,
            kind=PoolKind.AVG if position == len(indices) - 1 else PoolKind.MAX
        )
        for position, (index, stride) in enumerate(zip(indices, strides))
    ]
    return ArchDescriptor(
        family=Family.PHYSNET3DCNN,
        depth=depth,
        input=ArchInput(spatial=INPUT_SPATIAL, frames=PHYSNET_FRAMES),
        layers=layers,
        pooling=pooling
    )


def _tscan_meta_layer(meta: int, first_index: int, pooled: bool) -> List[LayerSpec]:
    in_channels = 3 if meta == 1 else (32 if meta == 2 else 64)
    out_channels = 32 if meta == 1 else 64
    tanh = Follower(kind="tanh")
    after_pool = [tanh, Follower(kind="dropout", p=TSCAN_DROPOUT)] if pooled else [tanh]

    rows = [
        (Branch.DIFF, "conv1", LayerOp.TSM_CONV2D, (3, 3), in_channels, out_channels, (1, 1), [tanh]),
        (Branch.DIFF, "conv2", LayerOp.TSM_CONV2D, (3, 3), out_channels, out_channels, (0, 0), after_pool),
        (Branch.RAW, "conv1", LayerOp.CONV2D, (3, 3), in_channels, out_channels, (1, 1), [tanh]),
        (Branch.RAW, "conv2", LayerOp.CONV2D, (3, 3), out_channels, out_channels, (0, 0), after_pool),
        (Branch.MIX, "attention", LayerOp.ATTENTION_MIX, (1, 1), out_channels, 1, (0, 0),
         [Follower(kind="sigmoid")]),
    ]
    return [
        LayerSpec(
            index=first_index + offset,
            name=f"meta{meta}_{branch.value}_{step}",
            op=op,
            kernel=kernel,
            in_channels=cin,
            out_channels=cout,
            padding=padding,
            meta_layer=meta,
            branch=branch,
            followers=followers
        )
        for offset, (branch, step, op, kernel, cin, cout, padding, followers) in enumerate(rows)
    ]


def tscan_descriptor(meta_depth: int) -> ArchDescriptor:
    """TS-CAN with ``meta_depth`` repeated meta-layers (1-10)."""
    if meta_depth not in TSCAN_DEPTHS:
        raise ArgumentError(
            f"tscan meta-depth must be in {TSCAN_DEPTHS.start}-{TSCAN_DEPTHS.stop - 1}, got {meta_depth}"
        )
    pooled = TSCAN_POOLING[meta_depth]
    layers: List[LayerSpec] = []
    for meta in range(1, meta_depth + 1):
        layers.extend(_tscan_meta_layer(meta, len(layers) + 1, meta in pooled))
    return ArchDescriptor(
        family=Family.TSCAN,
        depth=meta_depth,
        input=ArchInput(spatial=INPUT_SPATIAL, frames=TSCAN_FRAMES),
        layers=layers,
        pooling=[PoolingSpec(index=meta, stride=2, kind=PoolKind.AVG) for meta in pooled]
    )


def descriptor_for(family: Union[Family, str], depth: int) -> ArchDescriptor:
    """Descriptor of either family by name."""
    try:
        family = Family(family)
    except ValueError as exc:
        raise ArgumentError(f"unknown family {family!r}") from exc
    if family == Family.PHYSNET3DCNN:
        return physnet3dcnn_descriptor(depth)
    return tscan_descriptor(depth)


def all_descriptors() -> List[ArchDescriptor]:
    """The 14 PhysNet-3DCNN and 10 TS-CAN descriptors."""
    return [physnet3dcnn_descriptor(d) for d in PHYSNET_DEPTHS] + [
        tscan_descriptor(d) for d in TSCAN_DEPTHS
    ]


def _validate_layers(d: ArchDescriptor) -> List[Violation]:
    violations: List[Violation] = []
    expected = d.depth if d.family == Family.PHYSNET3DCNN else TSCAN_LAYERS_PER_META * d.depth
    if len(d.layers) != expected:
        violations.append(Violation(
            rule="layer_count",
            message=f"expected {expected} layers, found {len(d.layers)}"
        ))
    if [layer.index for layer in d.layers] != list(range(1, len(d.layers) + 1)):
        violations.append(Violation(rule="layer_order", message="layer indices must run 1..n"))

    for layer in d.layers:
        if layer.in_channels <= 0 or layer.out_channels <= 0:
            violations.append(Violation(
                rule="channels", message="channel counts must be positive", index=layer.index
            ))
        if any(k <= 0 or k % 2 == 0 for k in layer.kernel):
            violations.append(Violation(
                rule="kernel_shape",
                message=f"kernel {list(layer.kernel)} must have positive odd extents",
                index=layer.index
            ))

    if d.family == Family.PHYSNET3DCNN and d.layers:
        previous = d.input.channels
        for layer in d.layers:
            if layer.in_channels != previous:
                violations.append(Violation(
                    rule="channel_chain",
                    message=f"layer takes {layer.in_channels} channels, previous emits {previous}",
                    index=layer.index
                ))
            previous = layer.out_channels
    return violations


def _validate_pooling(d: ArchDescriptor) -> List[Violation]:
    violations: List[Violation] = []
    indices = [p.index for p in d.pooling]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        violations.append(Violation(rule="pooling_order", message="pooling indices must increase"))

    limit = d.depth - 1 if d.family == Family.PHYSNET3DCNN else d.depth
    for p in d.pooling:
        if not 1 <= p.index <= limit:
            violations.append(Violation(
                rule="pooling_index",
                message=f"pooling index {p.index} outside 1..{limit}",
                index=p.index
            ))

    if d.family == Family.PHYSNET3DCNN:
        product = prod(p.stride for p in d.pooling)
        if product != d.input.spatial:
            violations.append(Violation(
                rule="stride_product",
                message=f"pooling strides multiply to {product}, need {d.input.spatial}"
            ))
        for position, p in enumerate(d.pooling):
            want = PoolKind.AVG if position == len(d.pooling) - 1 else PoolKind.MAX
            if p.kind != want:
                violations.append(Violation(
                    rule="pooling_kind",
                    message=f"pooling after layer {p.index} must be {want.value}",
                    index=p.index
                ))
        return violations

    for p in d.pooling:
        if p.stride != 2:
            violations.append(Violation(
                rule="pooling_stride", message="TS-CAN pooling stride must be 2", index=p.index
            ))
        if p.kind != PoolKind.AVG:
            violations.append(Violation(
                rule="pooling_kind", message="TS-CAN pooling must be avg", index=p.index
            ))
    strides = {p.index: p.stride for p in d.pooling}
    size = d.input.spatial
    for meta in range(1, d.depth + 1):
        size -= 2
        if meta in strides:
            size //= max(strides[meta], 1)
        if size < 1:
            violations.append(Violation(
                rule="resolution",
                message=f"feature map falls below 1x1 at meta-layer {meta}",
                index=meta
            ))
            break
    return violations


def validate(d: ArchDescriptor) -> List[Violation]:
    """Every broken family rule as data; an empty list means valid."""
    violations: List[Violation] = []
    depths = PHYSNET_DEPTHS if d.family == Family.PHYSNET3DCNN else TSCAN_DEPTHS
    if d.depth not in depths:
        violations.append(Violation(
            rule="depth_range",
            message=f"{d.family.value} depth {d.depth} outside {depths.start}-{depths.stop - 1}"
        ))
    violations.extend(_validate_layers(d))
    violations.extend(_validate_pooling(d))
    return violations


def layer_param_count(layer: LayerSpec) -> int:
    """Weights plus bias of one convolution, plus scale and shift of its batch norm."""
    count = prod(layer.kernel) * layer.in_channels * layer.out_channels + layer.out_channels
    if layer.has_batch_norm:
        count += 2 * layer.out_channels
    return count


def param_count(d: ArchDescriptor) -> int:
    """Trainable parameters of every convolution and normalization layer."""
    violations = validate(d)
    if violations:
        raise ArchValidationError(
            f"descriptor has {len(violations)} violation(s)",
            violations=[v.model_dump(mode="json") for v in violations]
        )
    return sum(layer_param_count(layer) for layer in d.layers)


def emit(d: ArchDescriptor, path: PathLike) -> Path:
    """Write a validated descriptor as JSON."""
    violations = validate(d)
    if violations:
        raise ArchValidationError(
            f"refusing to emit an invalid descriptor ({len(violations)} violation(s))",
            violations=[v.model_dump(mode="json") for v in violations]
        )
    path = Path(path)
    document = json.dumps(d.model_dump(mode="json"), indent=2, sort_keys=True)
    try:
        path.write_text(document + "\n", encoding="utf-8")
    except OSError as exc:
        raise StoreIOError(f"cannot write {path}: {exc.strerror or exc}", path=str(path)) from exc
    logger.info("descriptor_emitted", family=d.family.value, depth=d.depth, path=str(path))
    return path


def parse_descriptor(path: PathLike) -> ArchDescriptor:
    """Read a descriptor written by :func:`emit`."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc.strerror or exc}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ArchValidationError(f"descriptor is not valid JSON: {exc.msg}", path=str(path)) from exc
    try:
        return ArchDescriptor.model_validate(document)
    except ValidationError as exc:
        raise ArchValidationError(
            f"descriptor failed validation: {exc.errors()[0]['msg']}", path=str(path)
        ) from exc
