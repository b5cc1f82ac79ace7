"""Run every canned configuration in configs/ and collect the exit codes.

Usage:
  1) optionally fill .env (LDP_WORKERS, LDP_PLOTS, ...)
  2) python -m scripts.run_configs [--configs configs] [--out runs/all] [--workers N]

What it does:
 - runs `ldpchain.main` once per `*.json` in the config directory, task taken from the file
 - writes each run's artifacts to `<out>/<config name>/`
 - writes `<out>/exit_codes.json` and prints one status line per config
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any

from ldpchain import main as cli
from ldpchain.config import settings

STATUS = {cli.EXIT_OK: "ok", cli.EXIT_FAIL: "FAIL", cli.EXIT_CONFIG: "config error"}


def _dump_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")


def _p(s: str) -> None:
    print(s, flush=True)


def run_configs(config_dir: Path, out_dir: Path, workers: int | None = None) -> dict[str, int]:
    out_dir.mkdir(parents=True, exist_ok=True)
    codes: dict[str, int] = {}
    for path in sorted(config_dir.glob("*.json")):
        try:
            task = json.loads(path.read_text(encoding="utf-8")).get("task")
        except json.JSONDecodeError as e:
            _p(f"{path.name}: unreadable ({e.msg})")
            codes[path.stem] = cli.EXIT_CONFIG
            continue
        if task not in cli.TASK_RUNNERS:
            _p(f"{path.name}: unknown task {task!r}")
            codes[path.stem] = cli.EXIT_CONFIG
            continue
        argv = [task, "--config", str(path), "--out", str(out_dir / path.stem)]
        if workers is not None:
            argv += ["--workers", str(workers)]
        codes[path.stem] = cli.main(argv)
        _p(f"{path.name}: {task} -> {STATUS.get(codes[path.stem], codes[path.stem])}")
    _dump_json(out_dir / "exit_codes.json", codes)
    return codes


def main() -> int:
    parser = argparse.ArgumentParser(description="Run all canned ldpchain configurations")
    parser.add_argument("--configs", default="configs")
    parser.add_argument("--out", default=str(Path(settings.ldp_output_dir) / "all"))
    parser.add_argument("--workers", type=int)
    args = parser.parse_args()
    codes = run_configs(Path(args.configs), Path(args.out), args.workers)
    return max(codes.values(), default=cli.EXIT_OK)


if __name__ == "__main__":
    raise SystemExit(main())
