#!/usr/bin/env python3
"""Convert a checkpoint into the raw binary + JSON manifest read by `cxlndp`.

Floating-point tensors are rounded to BF16 (nearest-even) unless they are
already BF16/FP16, in which case their bits are kept. Sources: `.safetensors`
and `.onnx` (initializers), or any `torch.load`-able state dict.

    python3 convert_checkpoint.py model.safetensors out/shard --max-mb 64
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np


def load_safetensors(path):
    from safetensors.numpy import load_file

    return load_file(str(path))


def load_onnx(path):
    import onnx
    from onnx import numpy_helper

    model = onnx.load(str(path))
    out = {init.name: numpy_helper.to_array(init) for init in model.graph.initializer}
    # some exporters fold weights into Constant nodes instead
    for node in model.graph.node:
        if node.op_type == "Constant":
            for attr in node.attribute:
                if attr.name == "value":
                    out.setdefault(node.output[0], numpy_helper.to_array(attr.t))
    return out


def load_torch(path):
    import torch

    state = torch.load(str(path), map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    out = {}
    for name, t in state.items():
        if not hasattr(t, "dtype"):
            continue
        if t.dtype == torch.bfloat16:
            out[name] = t.view(torch.int16).numpy().view(np.uint16).copy()
        else:
            out[name] = t.float().numpy() if t.is_floating_point() else t.numpy()
    return out


def to_bf16_bits(a):
    """Nearest-even rounding of float32 to the top 16 bits; NaN stays quiet."""
    bits = np.ascontiguousarray(a, dtype=np.float32).view(np.uint32)
    nan = np.isnan(a)
    rounded = ((bits + 0x7FFF + ((bits >> 16) & 1)) >> 16).astype(np.uint16)
    rounded[nan] = ((bits[nan] >> 16) | 0x0040).astype(np.uint16)
    return rounded


def encode(array):
    if array.dtype == np.float16:
        return "fp16", array.view(np.uint16)
    if array.dtype == np.uint16:
        return "bf16", array
    if np.issubdtype(array.dtype, np.floating):
        return "bf16", to_bf16_bits(array.astype(np.float32))
    return None, None


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", type=Path)
    ap.add_argument("out", type=Path, help="output stem; writes <out>.json and <out>.bin")
    ap.add_argument("--max-mb", type=float, default=1024.0, help="stop after this much tensor data")
    ap.add_argument("--min-elements", type=int, default=4096, help="skip tensors smaller than this")
    args = ap.parse_args(argv)

    suffix = args.source.suffix.lower()
    if suffix == ".safetensors":
        tensors = load_safetensors(args.source)
    elif suffix == ".onnx":
        tensors = load_onnx(args.source)
    else:
        tensors = load_torch(args.source)

    # largest tensors first, names break ties
    order = sorted(tensors, key=lambda n: (-tensors[n].size, n))
    budget = int(args.max_mb * 1024 * 1024)
    entries, offset = [], 0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out.with_suffix(".bin"), "wb") as data:
        for name in order:
            array = tensors[name]
            if array.size < args.min_elements:
                continue
            dtype, words = encode(array)
            if dtype is None:
                continue
            raw = np.ascontiguousarray(words, dtype="<u2").tobytes()
            if offset + len(raw) > budget:
                continue
            data.write(raw)
            entries.append(
                {
                    "name": name,
                    "shape": [int(s) for s in array.shape],
                    "dtype": dtype,
                    "offset": offset,
                    "length": len(raw),
                    "sha256": hashlib.sha256(raw).hexdigest(),
                }
            )
            offset += len(raw)
    entries.sort(key=lambda e: e["offset"])
    args.out.with_suffix(".json").write_text(json.dumps({"tensors": entries}, indent=2) + "\n")
    print(f"{len(entries)} tensors, {offset} bytes", file=sys.stderr)


if __name__ == "__main__":
    main()
