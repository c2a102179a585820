"""Metrics streams (append-only CSV) and plot-data summaries."""

import csv
from pathlib import Path

import numpy as np

METRICS_FIELDS = ["step", "task", "success_rate", "return", "ppo_loss",
                  "si_loss", "smoothing_loss"]


class MetricsWriter:
    def __init__(self, path, fields=None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fields = fields or METRICS_FIELDS
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.DictWriter(self._fh, fieldnames=self.fields)
        self._writer.writeheader()

    def write_row(self, row: dict) -> None:
        self._writer.writerow(row)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path):
    """Rows of a metrics CSV; malformed rows are skipped and counted.

    Returns (rows, skipped_count)."""
    rows, skipped = [], 0
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for raw in reader:
            try:
                rows.append({
                    "step": int(raw["step"]), "task": raw["task"],
                    "success_rate": float(raw["success_rate"]),
                    "return": float(raw["return"]),
                })
            except (KeyError, TypeError, ValueError):
                skipped += 1
    return rows, skipped


def smooth_series(values, window: int):
    """Trailing moving average; window 1 returns the input unchanged."""
    if window < 1:
        raise ValueError("window must be >= 1")
    out = []
    acc = []
    for v in values:
        acc.append(v)
        if len(acc) > window:
            acc.pop(0)
        out.append(sum(acc) / len(acc))
    return out


def plot_data(metric_paths, window: int, out_dir) -> dict:
    """Smoothed per-task success curves and a final-performance table.

    Each input CSV is treated as one seed. Outputs one curve file per task
    (step, per-seed smoothed success, mean, std) and ``final.csv`` with the
    last smoothed value per task and seed plus mean and std.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_seed = []
    skipped_total = 0
    for p in metric_paths:
        rows, skipped = read_metrics(p)
        skipped_total += skipped
        series: dict = {}
        for r in rows:
            series.setdefault(r["task"], []).append((r["step"], r["success_rate"]))
        per_seed.append(series)

    tasks = sorted({t for s in per_seed for t in s})
    final_rows = []
    for task in tasks:
        seed_curves = []
        for series in per_seed:
            pts = series.get(task, [])
            steps = [s for s, _ in pts]
            vals = smooth_series([v for _, v in pts], window)
            seed_curves.append((steps, vals))
        n_pts = min(len(c[0]) for c in seed_curves)
        path = out_dir / f"curve_{task}.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            header = ["step"] + [f"seed{i}" for i in range(len(seed_curves))]
            header += ["mean", "std"]
            w.writerow(header)
            for i in range(n_pts):
                vals = [c[1][i] for c in seed_curves]
                arr = np.array(vals)
                w.writerow([seed_curves[0][0][i], *vals,
                            float(arr.mean()), float(arr.std())])
        finals = [c[1][-1] if c[1] else 0.0 for c in seed_curves]
        arr = np.array(finals)
        final_rows.append([task, *finals, float(arr.mean()), float(arr.std())])

    with open(out_dir / "final.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["task"] + [f"seed{i}" for i in range(len(per_seed))]
                   + ["mean", "std"])
        w.writerows(final_rows)
    return {"tasks": tasks, "skipped_rows": skipped_total,
            "seeds": len(per_seed)}
