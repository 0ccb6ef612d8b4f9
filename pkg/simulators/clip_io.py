"""On-disk clip dumps and box-list text files.

Clip dump layout (little-endian):
    b"STCX" | u32 version | u32 T | u32 H | u32 W | u32 C | T*H*W*C float32 | box-list text

Box-list lines: clip_id,x1,y1,x2,y2,confidence,is_ground_truth
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import numpy as np

from core.errors import DatasetError, InvalidBoxError
from core.tensor import Tensor
from model.features import ActorBox

logger = logging.getLogger(__name__)

CLIP_MAGIC = b"STCX"
CLIP_VERSION = 1
_HEADER = struct.Struct("<5I")

PathLike = Union[str, Path]
BoxRecord = Tuple[str, ActorBox]


@dataclass
class ClipDump:
    clip_id: str
    frames: Tensor
    boxes: List[ActorBox]

    @property
    def ground_truth(self) -> List[ActorBox]:
        return [b for b in self.boxes if b.is_ground_truth]

    @property
    def proposals(self) -> List[ActorBox]:
        return [b for b in self.boxes if not b.is_ground_truth]


def format_box_line(clip_id: str, box: ActorBox) -> str:
    if "," in clip_id:
        raise DatasetError(f"clip id {clip_id!r} must not contain commas")
    return (
        f"{clip_id},{box.x1:.6f},{box.y1:.6f},{box.x2:.6f},{box.y2:.6f},"
        f"{box.confidence:.6f},{int(box.is_ground_truth)}"
    )


def parse_box_line(line: str, where: str = "box list") -> BoxRecord:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != 7:
        raise DatasetError(f"{where}: expected 7 comma-separated fields, got {len(parts)}: {line!r}")
    try:
        x1, y1, x2, y2, confidence = (float(v) for v in parts[1:6])
        flag = int(parts[6])
    except ValueError as e:
        raise DatasetError(f"{where}: malformed record {line!r}: {e}") from e
    if flag not in (0, 1):
        raise DatasetError(f"{where}: ground-truth flag must be 0 or 1, got {flag}")
    try:
        return parts[0], ActorBox(x1, y1, x2, y2, confidence, bool(flag))
    except InvalidBoxError as e:
        raise DatasetError(f"{where}: {e}") from e


def format_box_list(records: Iterable[BoxRecord]) -> str:
    return "".join(format_box_line(clip_id, box) + "\n" for clip_id, box in records)


def parse_box_list(text: str, where: str = "box list") -> List[BoxRecord]:
    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        records.append(parse_box_line(line, f"{where}:{number}"))
    return records


def write_box_list(path: PathLike, records: Iterable[BoxRecord]) -> None:
    Path(path).write_text(format_box_list(records), encoding="utf-8")


def read_box_list(path: PathLike) -> List[BoxRecord]:
    path = Path(path)
    return parse_box_list(path.read_text(encoding="utf-8"), str(path))


def encode_clip(clip_id: str, frames: Tensor, boxes: Iterable[ActorBox]) -> bytes:
    data = np.asarray(frames.data)
    if data.ndim != 4:
        raise DatasetError(f"clip frames must be [T, H, W, C], got {data.shape}")
    header = CLIP_MAGIC + _HEADER.pack(CLIP_VERSION, *data.shape)
    body = data.astype("<f4").tobytes()
    return header + body + format_box_list((clip_id, b) for b in boxes).encode("utf-8")


def decode_clip(payload: bytes, where: str = "clip dump") -> ClipDump:
    offset = len(CLIP_MAGIC) + _HEADER.size
    if len(payload) < offset or payload[:len(CLIP_MAGIC)] != CLIP_MAGIC:
        raise DatasetError(f"{where}: not a clip dump (bad magic)")
    version, *shape = _HEADER.unpack_from(payload, len(CLIP_MAGIC))
    if version != CLIP_VERSION:
        raise DatasetError(f"{where}: unsupported clip dump version {version}")
    count = int(np.prod(shape))
    end = offset + 4 * count
    if len(payload) < end:
        raise DatasetError(f"{where}: truncated frame data, expected {count} values")
    frames = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float64)
    records = parse_box_list(payload[end:].decode("utf-8"), where)
    clip_ids = {clip_id for clip_id, _ in records}
    if len(clip_ids) > 1:
        raise DatasetError(f"{where}: box section mixes clip ids {sorted(clip_ids)}")
    clip_id = clip_ids.pop() if clip_ids else Path(where).stem
    return ClipDump(clip_id=clip_id, frames=Tensor(frames), boxes=[box for _, box in records])


def write_clip(path: PathLike, clip_id: str, frames: Tensor, boxes: Iterable[ActorBox]) -> Path:
    path = Path(path)
    path.write_bytes(encode_clip(clip_id, frames, boxes))
    logger.debug(f"wrote clip dump {path}")
    return path


def read_clip(path: PathLike) -> ClipDump:
    path = Path(path)
    return decode_clip(path.read_bytes(), str(path))
