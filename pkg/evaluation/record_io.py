"""Text files of detection and ground-truth records.

detections:   clip_id,x1,y1,x2,y2,class_id,score
ground truth: clip_id,x1,y1,x2,y2,class_id
"""

from pathlib import Path
from typing import Iterable, List, Union

from core.errors import DatasetError, InvalidBoxError
from evaluation.detection_metrics import DetectionRecord, GroundTruthRecord
from model.features import ActorBox

PathLike = Union[str, Path]


def _box_fields(box: ActorBox) -> str:
    return f"{box.x1:.6f},{box.y1:.6f},{box.x2:.6f},{box.y2:.6f}"


def format_detection(record: DetectionRecord) -> str:
    return f"{record.clip_id},{_box_fields(record.box)},{record.class_id},{record.score!r}"


def format_ground_truth(record: GroundTruthRecord) -> str:
    return f"{record.clip_id},{_box_fields(record.box)},{record.class_id}"


def _split(line: str, expected: int, where: str) -> List[str]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != expected:
        raise DatasetError(f"{where}: expected {expected} fields, got {len(parts)}: {line!r}")
    return parts


def _parse_box(parts: List[str], where: str) -> ActorBox:
    try:
        return ActorBox(*(float(v) for v in parts[1:5]))
    except (ValueError, InvalidBoxError) as e:
        raise DatasetError(f"{where}: {e}") from e


def parse_detection(line: str, where: str = "detections") -> DetectionRecord:
    parts = _split(line, 7, where)
    try:
        class_id, score = int(parts[5]), float(parts[6])
    except ValueError as e:
        raise DatasetError(f"{where}: {e}") from e
    return DetectionRecord(parts[0], _parse_box(parts, where), class_id, score)


def parse_ground_truth(line: str, where: str = "ground truth") -> GroundTruthRecord:
    parts = _split(line, 6, where)
    try:
        class_id = int(parts[5])
    except ValueError as e:
        raise DatasetError(f"{where}: {e}") from e
    return GroundTruthRecord(parts[0], _parse_box(parts, where), class_id)


def _lines(path: Path):
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if line.strip() and not line.lstrip().startswith("#"):
            yield number, line


def write_detections(path: PathLike, records: Iterable[DetectionRecord]) -> None:
    Path(path).write_text("".join(format_detection(r) + "\n" for r in records), encoding="utf-8")


def read_detections(path: PathLike) -> List[DetectionRecord]:
    path = Path(path)
    return [parse_detection(line, f"{path}:{n}") for n, line in _lines(path)]


def write_ground_truth(path: PathLike, records: Iterable[GroundTruthRecord]) -> None:
    Path(path).write_text("".join(format_ground_truth(r) + "\n" for r in records), encoding="utf-8")


def read_ground_truth(path: PathLike) -> List[GroundTruthRecord]:
    path = Path(path)
    return [parse_ground_truth(line, f"{path}:{n}") for n, line in _lines(path)]
