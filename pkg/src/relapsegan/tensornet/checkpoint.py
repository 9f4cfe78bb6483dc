"""Binary checkpoints: versioned text header + length-prefixed float64 tensors.

Layout::

    RELAPSEGAN-CHECKPOINT 1
    meta <key>=<value> ...
    net <name> <n_layers> input=<d0>x<d1>...
    layer <kind> n_in=.. n_out=.. kernel=.. stride=.. pad=.. out_pad=.. shape=..
    ...
    end
    <per tensor: uint32 ndim, uint32 dims[ndim], uint64 count, float64 data[count]>  (little-endian)
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np

from .layers import LayerSpec, Network, param_shapes

MAGIC = "RELAPSEGAN-CHECKPOINT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _dims(shape) -> str:
    return "x".join(str(d) for d in shape) if shape else "-"


def _parse_dims(text: str) -> tuple:
    return () if text == "-" else tuple(int(d) for d in text.split("x"))


def _spec_line(s: LayerSpec) -> str:
    return (
        f"layer {s.kind} n_in={s.n_in} n_out={s.n_out} kernel={s.kernel} stride={s.stride} "
        f"pad={s.pad} out_pad={s.out_pad} shape={_dims(s.shape)}"
    )


def _parse_spec(line: str) -> LayerSpec:
    parts = line.split()
    if parts[0] != "layer":
        raise CheckpointError(f"expected layer line, got {line!r}")
    kv = dict(p.split("=", 1) for p in parts[2:])
    return LayerSpec(
        kind=parts[1],
        n_in=int(kv["n_in"]),
        n_out=int(kv["n_out"]),
        kernel=int(kv["kernel"]),
        stride=int(kv["stride"]),
        pad=int(kv["pad"]),
        out_pad=int(kv["out_pad"]),
        shape=_parse_dims(kv["shape"]),
    )


def dumps(nets: dict[str, Network], meta: dict[str, str] | None = None) -> bytes:
    head = [f"{MAGIC} {VERSION}"]
    if meta:
        head.append("meta " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())))
    for name, net in nets.items():
        head.append(f"net {name} {len(net.specs)} input={_dims(net.input_shape)}")
        head.extend(_spec_line(s) for s in net.specs)
    head.append("end")
    buf = io.BytesIO()
    buf.write(("\n".join(head) + "\n").encode("ascii"))
    for net in nets.values():
        for p in net.flat_params():
            buf.write(struct.pack("<I", p.ndim))
            buf.write(struct.pack(f"<{p.ndim}I", *p.shape))
            buf.write(struct.pack("<Q", p.size))
            buf.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> tuple[dict[str, Network], dict[str, str]]:
    stream = io.BytesIO(data)
    first = stream.readline().decode("ascii").split()
    if len(first) != 2 or first[0] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    if int(first[1]) != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {first[1]}")
    meta: dict[str, str] = {}
    layout: list[tuple[str, tuple, list[LayerSpec]]] = []
    while True:
        line = stream.readline().decode("ascii").strip()
        if not line:
            raise CheckpointError("truncated header")
        if line == "end":
            break
        if line.startswith("meta"):
            meta.update(p.split("=", 1) for p in line.split()[1:])
        elif line.startswith("net "):
            _, name, n_layers, inp = line.split()
            specs = [_parse_spec(stream.readline().decode("ascii").strip()) for _ in range(int(n_layers))]
            layout.append((name, _parse_dims(inp.split("=", 1)[1]), specs))
        else:
            raise CheckpointError(f"unexpected header line {line!r}")

    def read(n):
        chunk = stream.read(n)
        if len(chunk) != n:
            raise CheckpointError("truncated tensor data")
        return chunk

    nets = {}
    for name, input_shape, specs in layout:
        params = []
        for spec in specs:
            ps = []
            for shape in param_shapes(spec):
                (ndim,) = struct.unpack("<I", read(4))
                dims = struct.unpack(f"<{ndim}I", read(4 * ndim))
                (count,) = struct.unpack("<Q", read(8))
                if tuple(dims) != tuple(shape) or count != int(np.prod(shape)):
                    raise CheckpointError(f"tensor shape {dims} does not match layer {spec.kind}")
                ps.append(np.frombuffer(read(8 * count), dtype="<f8").astype(np.float64).reshape(shape))
            params.append(ps)
        nets[name] = Network(specs, params, input_shape)
    if stream.read(1):
        raise CheckpointError("trailing bytes after tensor data")
    return nets, meta


def save(path: str | os.PathLike, nets: dict[str, Network], meta: dict[str, str] | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(nets, meta))


def load(path: str | os.PathLike):
    with open(path, "rb") as fh:
        return loads(fh.read())
