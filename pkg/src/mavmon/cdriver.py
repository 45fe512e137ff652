"""Bridge to the compiled engine: build the trace driver against an emitted
monitor and run JSON-line traces through it in a subprocess."""

from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

from .errors import BuildFailed
from .interp import DecodedMessage
from .synth import SourceUnit

STRICT_CFLAGS = ["-std=c99", "-Wall", "-Wextra", "-Werror", "-pedantic", "-O2"]

_SUPPORT_DIR = Path(__file__).parent / "csupport"


def find_cc() -> str | None:
    for cc in ("cc", "gcc", "clang"):
        path = shutil.which(cc)
        if path:
            return path
    return None


def write_unit(unit: SourceUnit, out_dir: str | Path, with_support: bool = True) -> dict[str, Path]:
    """Write the emitted sources (and the support header) into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "header": out / unit.header_name,
        "impl": out / unit.impl_name,
    }
    paths["header"].write_text(unit.header_text)
    paths["impl"].write_text(unit.impl_text)
    if with_support:
        support = out / "monitor_support.h"
        support.write_text((_SUPPORT_DIR / "monitor_support.h").read_text())
        paths["support"] = support
    return paths


def build_driver(unit: SourceUnit, work_dir: str | Path,
                 cc: str | None = None) -> Path:
    """One compiler invocation: driver + emitted unit + support header.

    Raises BuildFailed on any diagnostic (the pinned flag set makes every
    warning an error, so success implies a warning-clean build).
    """
    cc = cc or find_cc()
    if cc is None:
        raise BuildFailed("no C compiler on PATH")
    work = Path(work_dir)
    paths = write_unit(unit, work)
    driver_src = work / "trace_driver.c"
    driver_src.write_text((_SUPPORT_DIR / "trace_driver.c").read_text())
    exe = work / "trace_driver"
    cmd = [cc, *STRICT_CFLAGS, str(driver_src), str(paths["impl"]), "-I", str(work), "-o", str(exe)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0 or proc.stderr.strip():
        raise BuildFailed(f"{' '.join(cmd)}\n{proc.stdout}{proc.stderr}")
    return exe


def trace_line(direction: int, msg: DecodedMessage, trunc: int | None = None) -> str:
    """Canonical trace-line JSON (fixed key order; integer field values)."""
    fields = {k: int(v) for k, v in msg.fields.items() if isinstance(v, (int, bool))}
    doc = f'{{"dir": {direction}, "msg": {msg.msg_id}, "fields": {json.dumps(fields)}'
    if trunc is not None:
        doc += f', "trunc": {trunc}'
    return doc + "}"


RESET_LINE = '{"reset": true}'


def run_driver(exe: str | Path, lines: list[str], timing: bool = False) -> list[str]:
    """Feed lines on stdin, collect one token per line from stdout."""
    cmd = [str(exe)] + (["--timing"] if timing else [])
    proc = subprocess.run(cmd, input="\n".join(lines) + "\n",
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise BuildFailed(f"trace driver exited {proc.returncode}: {proc.stderr}")
    return proc.stdout.splitlines()
