"""Run independent sweep cells, optionally in worker processes, with resume.

Each cell is a picklable task with a stable ``key``. When ``cache_dir`` is
given, a finished cell's JSON result is written to ``<cache_dir>/<key>.json``
and reused on the next run, so an interrupted sweep picks up where it left
off. Results always come back in task order, whatever the worker count.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence


def stable_key(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


def _write_atomic(path: Path, record: dict) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(record, sort_keys=True))
    os.replace(tmp, path)


def run_cells(
    fn: Callable[[object], dict],
    tasks: Sequence,
    keys: Sequence[str],
    workers: int = 1,
    cache_dir=None,
) -> list[dict]:
    if len(tasks) != len(keys):
        raise ValueError("one key per task required")
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
    results: list[dict | None] = [None] * len(tasks)
    todo = []
    for idx, key in enumerate(keys):
        if cache is not None and (cache / f"{key}.json").exists():
            results[idx] = json.loads((cache / f"{key}.json").read_text())
        else:
            todo.append(idx)

    def finish(idx, record):
        results[idx] = record
        if cache is not None:
            _write_atomic(cache / f"{keys[idx]}.json", record)

    if workers <= 1 or len(todo) <= 1:
        for idx in todo:
            finish(idx, fn(tasks[idx]))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {idx: pool.submit(fn, tasks[idx]) for idx in todo}
            # the parent is the single writer of cache files
            for idx in todo:
                finish(idx, futures[idx].result())
    return results
