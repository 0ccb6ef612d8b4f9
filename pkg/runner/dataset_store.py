"""Synthetic datasets on disk.

<data_dir>/
    manifest.csv        one row per clip: clip_id, split, seed, direction, textures, file
    clips/<id>.clip     clip dump (frames + that clip's boxes)
    boxes.txt           every box of every clip, box-list format
    ground_truth.txt    one record per (ground-truth actor, positive class)
"""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import DatasetError
from evaluation.detection_metrics import GroundTruthRecord
from evaluation.record_io import read_ground_truth, write_ground_truth
from model.features import ActorBox
from simulators.clip_io import read_box_list, read_clip, write_box_list, write_clip
from simulators.clip_simulator import CLASS_NAMES, LabeledActor, Scenario, SyntheticClip, WorldConfig, make_dataset

MANIFEST_COLUMNS = ["clip_id", "split", "seed", "direction", "texture_a", "texture_b", "file"]
SPLITS = ("train", "val")


def ground_truth_records(clips: Sequence[SyntheticClip]) -> List[GroundTruthRecord]:
    records = []
    for clip in clips:
        for actor in clip.actors:
            for class_id in np.flatnonzero(actor.labels):
                records.append(GroundTruthRecord(clip.clip_id, actor.box, int(class_id)))
    return records


class DatasetStore:
    """Reads and writes one dataset directory."""

    def __init__(self, data_dir: str):
        self.data_dir = Path(data_dir)
        self.logger = logging.getLogger(f"dataset.{self.data_dir.name}")

    @property
    def manifest_path(self) -> Path:
        return self.data_dir / "manifest.csv"

    @property
    def ground_truth_path(self) -> Path:
        return self.data_dir / "ground_truth.txt"

    @property
    def boxes_path(self) -> Path:
        return self.data_dir / "boxes.txt"

    def exists(self) -> bool:
        return self.manifest_path.exists()

    def write(self, train: Sequence[SyntheticClip], val: Sequence[SyntheticClip]) -> pd.DataFrame:
        clip_dir = self.data_dir / "clips"
        clip_dir.mkdir(parents=True, exist_ok=True)
        rows, boxes = [], []
        for split, clips in zip(SPLITS, (train, val)):
            for clip in clips:
                file = f"clips/{clip.clip_id}.clip"
                write_clip(self.data_dir / file, clip.clip_id, clip.frames, clip.boxes + clip.proposals)
                boxes.extend((clip.clip_id, b) for b in clip.boxes + clip.proposals)
                textures = clip.scenario.textures or ("", "")
                rows.append([clip.clip_id, split, clip.scenario.seed, clip.scenario.direction, *textures, file])
        manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
        manifest.to_csv(self.manifest_path, index=False)
        write_box_list(self.boxes_path, boxes)
        write_ground_truth(self.ground_truth_path, ground_truth_records(list(train) + list(val)))
        self.logger.info(f"wrote {len(rows)} clips to {self.data_dir}")
        return manifest

    def generate(self, num_clips: int, seed: int, split: Tuple[float, float], world: WorldConfig) -> pd.DataFrame:
        train, val = make_dataset(num_clips, seed, split, world)
        return self.write(train, val)

    def manifest(self) -> pd.DataFrame:
        if not self.exists():
            raise DatasetError(f"no dataset at {self.data_dir} (missing manifest.csv); run generate first")
        manifest = pd.read_csv(self.manifest_path, dtype={"clip_id": str, "texture_a": str, "texture_b": str},
                               keep_default_na=False)
        missing = [c for c in MANIFEST_COLUMNS if c not in manifest.columns]
        if missing:
            raise DatasetError(f"{self.manifest_path} lacks columns {missing}")
        return manifest

    def boxes_by_clip(self) -> Dict[str, List[ActorBox]]:
        if not self.boxes_path.exists():
            raise DatasetError(f"no box list at {self.boxes_path}")
        grouped: Dict[str, List[ActorBox]] = defaultdict(list)
        for clip_id, box in read_box_list(self.boxes_path):
            grouped[clip_id].append(box)
        return dict(grouped)

    def load(self, split: str) -> List[SyntheticClip]:
        if split not in SPLITS:
            raise DatasetError(f"unknown split {split!r}; expected one of {SPLITS}")
        manifest = self.manifest()
        labels_by_box: Dict[Tuple[str, Tuple[float, float, float, float]], np.ndarray] = defaultdict(
            lambda: np.zeros(len(CLASS_NAMES), dtype=np.int64)
        )
        listed = self.boxes_by_clip()
        for record in read_ground_truth(self.ground_truth_path):
            b = record.box
            labels_by_box[(record.clip_id, (b.x1, b.y1, b.x2, b.y2))][record.class_id] = 1

        clips = []
        for row in manifest[manifest["split"] == split].itertuples(index=False):
            dump = read_clip(self.data_dir / row.file)
            if dump.clip_id != row.clip_id:
                raise DatasetError(f"{row.file} holds clip {dump.clip_id!r}, manifest says {row.clip_id!r}")
            if listed.get(row.clip_id, []) != dump.boxes:
                raise DatasetError(f"{row.clip_id}: boxes in {self.boxes_path.name} disagree with {row.file}")
            actors = []
            for box in dump.ground_truth:
                key = (row.clip_id, (box.x1, box.y1, box.x2, box.y2))
                if key not in labels_by_box:
                    raise DatasetError(f"{row.clip_id}: ground-truth box {key[1]} has no labels")
                actors.append(LabeledActor(box, labels_by_box[key].copy()))
            textures = (row.texture_a, row.texture_b) if row.texture_a else None
            scenario = Scenario(direction=row.direction, seed=int(row.seed), textures=textures)
            clips.append(SyntheticClip(row.clip_id, dump.frames, actors, scenario, dump.proposals))
        self.logger.info(f"loaded {len(clips)} {split} clips from {self.data_dir}")
        return clips
