"""Host inspection for the info endpoint and streaming stats.

Reads /proc directly; falls back to neutral values on platforms without
it so imports never fail.
"""

from __future__ import annotations

import os
import platform
from dataclasses import dataclass

from . import __version__

CPUINFO_PATH = "/proc/cpuinfo"
MEMINFO_PATH = "/proc/meminfo"


@dataclass(frozen=True)
class ServerSpecs:
    cpu_model: str
    cores: int
    mem_mb: int
    version: str

    def to_dict(self) -> dict:
        return {
            "cpu_model": self.cpu_model,
            "cores": self.cores,
            "mem_mb": self.mem_mb,
            "version": self.version,
        }


def cpu_model(path: str = CPUINFO_PATH) -> str:
    try:
        with open(path) as f:
            for line in f:
                key, _, value = line.partition(":")
                if key.strip() in ("model name", "Processor", "cpu model"):
                    return value.strip()
    except OSError:
        pass
    return platform.processor() or platform.machine() or "unknown"


def total_memory_mb(path: str = MEMINFO_PATH) -> int:
    try:
        with open(path) as f:
            for line in f:
                if line.startswith("MemTotal:"):
                    kb = int(line.split()[1])
                    return kb // 1024
    except (OSError, ValueError, IndexError):
        pass
    return 0


def server_specs() -> ServerSpecs:
    return ServerSpecs(
        cpu_model=cpu_model(),
        cores=os.cpu_count() or 1,
        mem_mb=total_memory_mb(),
        version=__version__,
    )
