# Run registry: append-only JSON-lines log of completed commands

import json
import logging
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Tuple

from app.core.errors import RegistryError

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    command: str
    config_digest: str
    verdict: str
    elapsed_seconds: float
    summary: Dict = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))

    def to_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True) + "\n"


class RunRegistry:
    """Append and query the runs file"""
    def __init__(self, path: str = "runs.jsonl"):
        self.path = path

    def append(self, record: RunRecord) -> None:
        data = record.to_line().encode("utf-8")
        try:
            # one write per record on an O_APPEND descriptor keeps concurrent appends whole
            fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
            try:
                os.write(fd, data)
            finally:
                os.close(fd)
        except OSError as e:
            logger.error(f"Error appending to registry {self.path}: {e}")
            raise RegistryError(f"cannot append to {self.path}: {e}")

    def read(self) -> Tuple[List[RunRecord], List[int]]:
        """Records in file order plus the line numbers that did not parse"""
        records, bad_lines = [], []
        if not os.path.exists(self.path):
            return records, bad_lines
        with open(self.path, "r", encoding="utf-8", errors="replace") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(RunRecord(**json.loads(line)))
                except (ValueError, TypeError):
                    bad_lines.append(line_no)
        for line_no in bad_lines:
            logger.warning(f"Registry {self.path}: line {line_no} is corrupted")
        return records, bad_lines

    def recent(self, hours: int = 24, command: Optional[str] = None) -> List[RunRecord]:
        since = datetime.now() - timedelta(hours=hours)
        records, _ = self.read()
        recent = []
        for record in records:
            try:
                when = datetime.fromisoformat(record.timestamp)
            except ValueError:
                continue
            if when >= since and (command is None or record.command == command):
                recent.append(record)
        return list(reversed(recent))

    def statistics(self) -> Dict:
        records, bad_lines = self.read()
        return {
            "total_runs": len(records),
            "by_command": dict(Counter(r.command for r in records)),
            "by_verdict": dict(Counter(r.verdict for r in records)),
            "total_seconds": round(sum(r.elapsed_seconds for r in records), 3),
            "corrupted_lines": bad_lines,
        }


def append_run(record: RunRecord, registry_path: str) -> None:
    RunRegistry(registry_path).append(record)
