"""Single-file checkpoint format with an explicit manifest.

Layout: 4-byte magic, little-endian u32 format version, u64 header length,
UTF-8 JSON header, then a flat little-endian float32 data section.  The header
carries the model kind, configuration, both vocabularies and their hashes,
free-form training metadata, and a manifest of name/shape/offset/byte-length
for every parameter array.  No serialization framework is involved, so the
format is portable across languages.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .corpus import Vocabulary
from .model import BaselineWpm, EnergyModel, ModelConfig

MAGIC = b"WLCK"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    kind: str
    config: ModelConfig
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    metadata: dict
    params: dict[str, np.ndarray]

    def build_model(self) -> BaselineWpm | EnergyModel:
        model = BaselineWpm(self.config) if self.kind == "baseline" else EnergyModel(self.config)
        state = {name: torch.from_numpy(arr.copy()) for name, arr in self.params.items()}
        model.load_state_dict(state)
        model.eval()
        return model


def save_checkpoint(
    model: BaselineWpm | EnergyModel,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    metadata: dict,
    path: str | Path,
) -> None:
    """Write the model's parameters and vocabularies; round-trips bitwise."""
    arrays: list[tuple[str, np.ndarray]] = []
    for name, tensor in model.state_dict().items():
        arr = tensor.detach().cpu().numpy()
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        arrays.append((name, np.ascontiguousarray(arr)))
    manifest = []
    offset = 0
    for name, arr in arrays:
        manifest.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes}
        )
        offset += arr.nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "model_kind": model.kind,
        "config": model.config.to_json(),
        "vocab_hashes": {"source": src_vocab.hash(), "target": tgt_vocab.hash()},
        "vocab": {"source": src_vocab.to_json(), "target": tgt_vocab.to_json()},
        "metadata": metadata,
        "manifest": manifest,
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in arrays:
            fh.write(arr.astype("<f4", copy=False).tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {version}; expected {FORMAT_VERSION}"
        )
    (header_len,) = struct.unpack("<Q", raw[8:16])
    header_end = 16 + header_len
    if header_end > len(raw):
        raise CheckpointError("truncated header")
    header = json.loads(raw[16:header_end].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointVersionError("header format_version disagrees with container")
    data = raw[header_end:]

    manifest = header["manifest"]
    cursor = 0
    params: dict[str, np.ndarray] = {}
    for entry in sorted(manifest, key=lambda e: e["offset"]):
        if entry["offset"] != cursor:
            raise CheckpointError("manifest offsets overlap or leave gaps")
        end = entry["offset"] + entry["nbytes"]
        if end > len(data):
            raise CheckpointError(f"manifest entry {entry['name']} exceeds data section")
        expected = int(np.prod(entry["shape"], dtype=np.int64)) * 4 if entry["shape"] else 4
        if expected != entry["nbytes"]:
            raise CheckpointError(f"manifest entry {entry['name']} shape/size mismatch")
        arr = np.frombuffer(data[entry["offset"] : end], dtype="<f4").reshape(entry["shape"])
        params[entry["name"]] = arr.copy()
        cursor = end
    if cursor != len(data):
        raise CheckpointError("data section longer than manifest describes")

    src_vocab = Vocabulary.from_json(header["vocab"]["source"])
    tgt_vocab = Vocabulary.from_json(header["vocab"]["target"])
    if src_vocab.hash() != header["vocab_hashes"]["source"]:
        raise CheckpointError("source vocabulary hash mismatch")
    if tgt_vocab.hash() != header["vocab_hashes"]["target"]:
        raise CheckpointError("target vocabulary hash mismatch")
    return Checkpoint(
        kind=header["model_kind"],
        config=ModelConfig.from_json(header["config"]),
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        metadata=header["metadata"],
        params=params,
    )


def load_pipeline(baseline_path: str | Path, energy_path: str | Path | None = None):
    """Load checkpoints into a suggestion pipeline, verifying vocabulary pairing."""
    from .inference import SuggestPipeline, VocabularyMismatchError

    base_ckpt = load_checkpoint(baseline_path)
    if base_ckpt.kind != "baseline":
        raise CheckpointError(f"expected a baseline checkpoint, got {base_ckpt.kind!r}")
    baseline = base_ckpt.build_model()
    energy = None
    if energy_path is not None:
        energy_ckpt = load_checkpoint(energy_path)
        if energy_ckpt.kind != "energy":
            raise CheckpointError(f"expected an energy checkpoint, got {energy_ckpt.kind!r}")
        if (
            energy_ckpt.src_vocab.hash() != base_ckpt.src_vocab.hash()
            or energy_ckpt.tgt_vocab.hash() != base_ckpt.tgt_vocab.hash()
        ):
            raise VocabularyMismatchError(
                "baseline and energy checkpoints were built on different vocabularies"
            )
        energy = energy_ckpt.build_model()
    return SuggestPipeline(
        baseline,  # type: ignore[arg-type]
        base_ckpt.src_vocab,
        base_ckpt.tgt_vocab,
        energy=energy,  # type: ignore[arg-type]
    )
