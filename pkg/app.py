import json
import os
import subprocess
import sys

import streamlit as st
import pandas as pd

from runner.reporting import (
    ablation_figure,
    list_runs,
    parse_eval_report,
    per_class_figure,
    read_training_log,
    report_map,
    training_curve_figure,
    validation_curve_figure,
)


# =========================
# Config
# =========================
st.set_page_config(page_title="stcx dashboard", layout="wide")
REPORT_DIR_DEFAULT = "reports"
PLAN_DEFAULT = "configs/desk_default.yaml"

st.title("stcx: Spatio-Temporal Context Head")
st.caption("Synthetic give/receive world • training curves • per-class AP • wiring ablation")


# =========================
# Helpers
# =========================
def _read_json(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)

def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()

def _run_cli(command: str, plan: str, out_dir: str):
    cmd = [sys.executable, "main.py", command, "--config", plan, "--out", out_dir]
    p = subprocess.run(cmd, capture_output=True, text=True)
    return p.returncode, " ".join(cmd), p.stdout, p.stderr

def _status_color(status: str) -> str:
    if status == "PASS":
        return "background-color: rgba(46, 204, 113, 0.20);"
    return "background-color: rgba(231, 76, 60, 0.18);"

def _latest(folder: str, suffix: str):
    hits = list_runs(folder, f"*{suffix}")
    return str(hits[-1]) if hits else None


# =========================
# UI: Sidebar controls
# =========================
with st.sidebar:
    st.header("Run Configuration")
    report_dir = st.text_input("Report directory", REPORT_DIR_DEFAULT)
    plan = st.text_input("YAML run plan", PLAN_DEFAULT)
    command = st.selectbox("Command", ["gradcheck", "eval", "train", "ablate"], index=0)
    run = st.button("▶ Run", type="primary")
    st.caption("Runs the CLI with --out pointing at the report directory, then reloads the artifacts below.")

if run:
    with st.spinner(f"Running stcx {command}…"):
        rc, used_cmd, stdout, stderr = _run_cli(command, plan, report_dir)
    if rc == 0:
        st.success(f"{command} finished.")
    else:
        st.error(f"{command} exited with status {rc}.")
    st.code(used_cmd, language="bash")
    if stdout:
        st.text_area("stdout", stdout, height=150)
    if stderr:
        st.text_area("stderr", stderr, height=150)


# =========================
# Training curves
# =========================
st.divider()
st.subheader("Training")

log_path = _latest(report_dir, "_training_log.csv")
if log_path:
    log = read_training_log(log_path)
    m1, m2, m3 = st.columns(3)
    m1.metric("Steps", f"{len(log)}")
    m2.metric("Initial loss", f"{log['loss'].iloc[0]:.4f}" if len(log) else "n/a")
    m3.metric("Final loss", f"{log['loss'].iloc[-1]:.4f}" if len(log) else "n/a")
    st.plotly_chart(training_curve_figure(log), use_container_width=True)
    if log["val_map"].notna().any():
        st.plotly_chart(validation_curve_figure(log), use_container_width=True)
else:
    st.info("Training curves appear after `stcx train`.")


# =========================
# Evaluation report
# =========================
st.divider()
st.subheader("Per-class AP")

eval_path = os.path.join(report_dir, "eval_report.txt")
if os.path.isfile(eval_path):
    text = _read_text(eval_path)
    frame = parse_eval_report(text)
    st.metric("Frame mAP@0.5", f"{report_map(text):.2f}")
    col1, col2 = st.columns([0.55, 0.45], gap="large")
    with col1:
        st.plotly_chart(per_class_figure(frame), use_container_width=True)
    with col2:
        st.dataframe(frame, use_container_width=True, hide_index=True)
else:
    st.info("Per-class AP appears after `stcx eval`.")


# =========================
# Ablation
# =========================
st.divider()
st.subheader("Wiring ablation")

ablation_csv = os.path.join(report_dir, "ablation.csv")
if os.path.isfile(ablation_csv):
    table = pd.read_csv(ablation_csv)
    st.plotly_chart(ablation_figure(table), use_container_width=True)
    st.dataframe(table, use_container_width=True, hide_index=True)
    report_txt = os.path.join(report_dir, "ablation_report.txt")
    if os.path.isfile(report_txt):
        st.code(_read_text(report_txt))
else:
    st.info("Ablation results appear after `stcx ablate`.")


# =========================
# Gradient checks
# =========================
st.divider()
st.subheader("Gradient checks")

gradcheck_json = _latest(report_dir, "_gradcheck.json")
if gradcheck_json:
    results = _read_json(gradcheck_json)
    rows = [
        {"check": c["name"], "status": c["status"], "max_error": c.get("max_error"), "duration_sec": c.get("duration_sec")}
        for c in results["checks"]
    ]
    st.caption(f"Plan: {results['plan']} • eps {results['eps']} • {results['timestamp']}")
    styled = pd.DataFrame(rows).style.applymap(_status_color, subset=["status"])
    st.dataframe(styled, use_container_width=True, hide_index=True)
    if "failure_summary" in results:
        st.json(results["failure_summary"])
else:
    st.info("Gradient-check results appear after `stcx gradcheck`.")


# =========================
# Artifacts
# =========================
st.divider()
st.subheader("Generated Artifacts")

if os.path.isdir(report_dir):
    files = sorted(os.listdir(report_dir))
    if not files:
        st.info("No artifacts yet.")
    else:
        pick = st.selectbox("Select artifact file", files)
        path = os.path.join(report_dir, pick)
        if pick.endswith((".json", ".txt", ".log", ".csv")):
            st.code(_read_text(path)[:120000], language="json" if pick.endswith(".json") else None)
        else:
            st.caption("Binary/other file type.")
else:
    st.info("The report directory is created by the first CLI run.")
