"""Turn metric, reward and eval logs into delimited column files for plotting."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from ..active import moving_average
from .evaluation import MetricsTable, reduction_ratios, reduction_text


class LogFormatError(ValueError):
    pass


def parse_reward_log(text: str, source: str = "<rewards>") -> list[tuple[int, int, float, str]]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("episode\t"):
            continue
        parts = line.split("\t")
        try:
            if len(parts) != 4:
                raise ValueError
            rows.append((int(parts[0]), int(parts[1]), float(parts[2]), parts[3]))
        except ValueError:
            raise LogFormatError(f"{source}:{lineno}: malformed reward line {line!r}") from None
    return rows


def parse_metrics_log(text: str, source: str = "<metrics>") -> list[dict[str, float]]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        row = {}
        for field in line.split("\t"):
            key, sep, value = field.partition("=")
            try:
                if not sep:
                    raise ValueError
                row[key] = float(value)
            except ValueError:
                raise LogFormatError(f"{source}:{lineno}: malformed metrics field {field!r}") from None
        if "stage" not in row or "epoch" not in row:
            raise LogFormatError(f"{source}:{lineno}: missing stage/epoch")
        rows.append(row)
    return rows


def reward_curve_text(rows, window: int = 100) -> str:
    if not rows:
        return ""
    ma = moving_average([r[2] for r in rows], window)
    return "episode\treward\tmoving_average\n" + "".join(
        f"{r[0]}\t{r[2]:.9g}\t{m:.9g}\n" for r, m in zip(rows, ma))


def loss_curve_text(rows) -> str:
    if not rows:
        return ""
    keys = sorted({k for r in rows for k in r} - {"stage", "epoch"})
    out = ["stage\tepoch\t" + "\t".join(keys)]
    for r in rows:
        out.append(f"{int(r['stage'])}\t{int(r['epoch'])}\t" + "\t".join(f"{r.get(k, np.nan):.9g}" for k in keys))
    return "\n".join(out) + "\n"


def run_report(out_dir, rewards=None, metrics=None, eval_off=None, eval_on=None) -> list[Path]:
    """Write whichever column files the given logs allow; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, text, what):
        if not text:
            print(f"warning: {what} is empty; nothing written for {name}", file=sys.stderr)
        path = out / name
        path.write_text(text)
        written.append(path)

    if rewards is not None:
        rows = parse_reward_log(Path(rewards).read_text(), str(rewards))
        emit("reward_curve.tsv", reward_curve_text(rows), str(rewards))
        if rows:
            ma = moving_average([r[2] for r in rows])
            q = max(len(rows) // 4, 1)
            print(f"reward moving average: first quarter {ma[:q].mean():.4f}, last quarter {ma[-q:].mean():.4f}")
    if metrics is not None:
        rows = parse_metrics_log(Path(metrics).read_text(), str(metrics))
        emit("loss_curve.tsv", loss_curve_text(rows), str(metrics))
    if eval_off is not None and eval_on is not None:
        a = MetricsTable.from_text(Path(eval_off).read_text(), str(eval_off))
        b = MetricsTable.from_text(Path(eval_on).read_text(), str(eval_on))
        text = reduction_text(reduction_ratios(a, b)) if a.rows else ""
        emit("reduction.tsv", text, str(eval_off))
    return written
