"""Static HTML reports from eval result files."""
from __future__ import annotations

import base64
import html
import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .dataprep.dataset import DatasetArchive

_STYLE = """
body { font-family: sans-serif; margin: 1.5em; }
table.metrics { border-collapse: collapse; margin-bottom: 1.5em; }
table.metrics td, table.metrics th { border: 1px solid #999; padding: 3px 8px; }
div.ranking { display: flex; align-items: center; margin: 4px 0; }
div.ranking img { width: 64px; height: 64px; margin: 2px; border: 3px solid transparent; }
img.query { border-color: #333 !important; margin-right: 12px !important; }
img.hit { border-color: #2a2 !important; }
img.miss { border-color: #c22 !important; }
"""


def thumbnail(ds: DatasetArchive, object_id: str, view: int = 0) -> str:
    pixels = ds.tensor(object_id, "views")[view]
    img = Image.fromarray(np.round(pixels * 255).astype(np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode()


def _metrics_table(result: dict) -> str:
    rows = []
    for key, value in sorted(result.get("metrics", {}).items()):
        if key == "rankings":
            continue
        if isinstance(value, float):
            value = f"{value:.4f}"
        elif isinstance(value, (list, dict)):
            value = json.dumps(value)
        rows.append(f"<tr><th>{html.escape(str(key))}</th><td>{html.escape(str(value))}</td></tr>")
    return "<table class='metrics'>" + "".join(rows) + "</table>"


def _rankings(result: dict, ds: DatasetArchive | None, top: int = 10) -> str:
    out = []
    for r in result["metrics"].get("rankings", []):
        cells = []
        if ds is not None:
            cells.append(f"<img class='query' title='{html.escape(r['query'])}' src='{thumbnail(ds, r['query'])}'>")
        for gid, rel in list(zip(r["gallery"], r["relevant"]))[:top]:
            cls = "gallery hit" if rel else "gallery miss"
            src = thumbnail(ds, gid) if ds is not None else ""
            cells.append(f"<img class='{cls}' title='{html.escape(gid)}' src='{src}'>")
        out.append(f"<div class='ranking' data-query='{html.escape(r['query'])}'>{''.join(cells)}</div>")
    return "\n".join(out)


def render_report(results: list[dict], top: int = 10) -> str:
    parts = ["<!DOCTYPE html><html><head><meta charset='utf-8'><title>trimodal report</title>",
             f"<style>{_STYLE}</style></head><body>"]
    for res in results:
        title = res.get("task", "result")
        m = res.get("metrics", {})
        if title == "retrieval":
            title += f": {m.get('source')} &rarr; {m.get('target')} (views {m.get('views')})"
        parts.append(f"<h2>{title}</h2>")
        parts.append(_metrics_table(res))
        if m.get("rankings"):
            ds = None
            data = res.get("data")
            if data and Path(data, "manifest.jsonl").exists():
                ds = DatasetArchive(data)
            parts.append(f"<h3>Top-{top} ranked galleries</h3>")
            parts.append(_rankings(res, ds, top))
    parts.append("</body></html>")
    return "\n".join(parts)


def write_report(result_paths, out_path) -> Path:
    results = []
    for p in result_paths:
        data = json.loads(Path(p).read_text())
        results.extend(data if isinstance(data, list) else [data])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(render_report(results))
    return out_path
