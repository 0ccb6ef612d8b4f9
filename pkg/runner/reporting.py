"""Run artifacts as tables and charts: training logs, eval reports, ablation results."""

import io
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import pandas as pd
import plotly.express as px

from model.params import VARIANTS

PathLike = Union[str, Path]

# AVA v2.2 frame mAP of the five wirings with a SlowFast R50 backbone
REFERENCE_MAP = dict(zip(VARIANTS, (24.80, 26.50, 26.75, 26.65, 27.02)))

ABLATION_ROW_COLUMNS = ["variant", "seed", "map", "direction_map", "temporal_sensitivity", "initial_loss", "final_loss"]


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    return path


def write_training_log(path: PathLike, log: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    log.to_csv(path, index=False)
    return path


def read_training_log(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


def parse_eval_report(text: str) -> pd.DataFrame:
    """Per-class rows of an eval report; the trailing mAP line is dropped."""
    lines = [line for line in text.splitlines() if line and not line.startswith("mAP,")]
    frame = pd.read_csv(io.StringIO("\n".join(lines)), na_values=["n/a"])
    return frame


def report_map(text: str) -> float:
    for line in text.splitlines():
        if line.startswith("mAP,"):
            return float(line.split(",", 1)[1])
    raise ValueError("eval report has no mAP line")


def ablation_table(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """One row per variant in canonical order: per-seed mAP columns, means and the reference value."""
    runs = pd.DataFrame(list(rows), columns=ABLATION_ROW_COLUMNS)
    per_seed = runs.pivot(index="variant", columns="seed", values="map")
    per_seed.columns = [f"map_seed_{s}" for s in per_seed.columns]
    means = runs.groupby("variant")[["map", "direction_map", "temporal_sensitivity"]].mean()
    means.columns = ["mean_map", "mean_direction_map", "mean_temporal_sensitivity"]
    table = per_seed.join(means)
    order = [v for v in VARIANTS if v in table.index]
    table = table.loc[order]
    table["reference_map"] = [REFERENCE_MAP[v] for v in order]
    return table.reset_index()


def format_ablation_report(table: pd.DataFrame) -> str:
    shown = table.copy()
    for column in shown.columns:
        if column.startswith(("map_seed_", "mean_map", "mean_direction_map")):
            shown[column] = (100.0 * shown[column]).round(2)
    shown["mean_temporal_sensitivity"] = shown["mean_temporal_sensitivity"].round(6)
    body = shown.to_csv(index=False)
    reference = " / ".join(f"{REFERENCE_MAP[v]:.2f}" for v in VARIANTS)
    footnote = (
        f"# reference frame mAP on AVA v2.2 with a SlowFast R50 backbone, same row order: {reference}\n"
        "# desk-scale numbers are mAP x100 on the synthetic give/receive world and are not comparable\n"
    )
    return body + footnote


def ablation_figure(table: pd.DataFrame):
    long = table.melt(
        id_vars="variant", value_vars=["mean_map", "mean_direction_map"], var_name="metric", value_name="ap"
    )
    long["ap"] = 100.0 * long["ap"]
    fig = px.bar(long, x="variant", y="ap", color="metric", barmode="group", title="Ablation: mean AP per wiring")
    fig.update_layout(yaxis_title="AP x100", xaxis_title="")
    return fig


def training_curve_figure(log: pd.DataFrame):
    fig = px.line(log, x="step", y="loss", title="Training loss")
    fig.update_layout(yaxis_title="BCE", xaxis_title="step")
    return fig


def validation_curve_figure(log: pd.DataFrame):
    points = log.dropna(subset=["val_map"]).melt(
        id_vars="step", value_vars=["val_map", "val_direction_map"], var_name="metric", value_name="ap"
    )
    return px.line(points, x="step", y="ap", color="metric", markers=True, title="Validation AP")


def per_class_figure(frame: pd.DataFrame):
    return px.bar(frame.dropna(subset=["ap"]), x="class", y="ap", title="Per-class AP")


def list_runs(report_dir: PathLike, pattern: str = "*_summary.json") -> List[Path]:
    return sorted(Path(report_dir).glob(pattern))
