"""
Event trace log.

One tab-separated line per handled event:

    time  kind  src  dst  diff_id  payload_size

Times are written with repr() so the text (and its hash) is exact. Missing fields
are "-". For "done" lines the dst column holds the task id.
"""

import hashlib
from typing import IO

TRACE_HEADER = "time\tkind\tsrc\tdst\tdiff_id\tpayload_size"


class TraceLog:
    """
    Running sha256 of the trace, with optional line retention and file output.

    Args:
        stream: Text stream the lines are written to, if any.
        keep_lines: Keep lines in memory (for replay in tests and metrics).
    """

    def __init__(self, stream: IO[str] | None = None, keep_lines: bool = False):
        self._digest = hashlib.sha256()
        self._stream = stream
        self.lines: list[str] | None = [] if keep_lines else None
        if stream is not None:
            stream.write(TRACE_HEADER + "\n")

    def record(self, time: float, kind: str, src=None, dst=None, diff_id=None, size=None) -> None:
        line = "\t".join([repr(float(time)), kind, *("-" if v is None else str(v) for v in (src, dst, diff_id, size))])
        self._digest.update(line.encode())
        self._digest.update(b"\n")
        if self.lines is not None:
            self.lines.append(line)
        if self._stream is not None:
            self._stream.write(line + "\n")

    @property
    def hexdigest(self) -> str:
        return self._digest.hexdigest()


def parse_line(line: str) -> tuple[float, str, str, str, str, str]:
    """Split one trace line into (time, kind, src, dst, diff_id, payload_size)."""
    time, kind, src, dst, diff_id, size = line.rstrip("\n").split("\t")
    return float(time), kind, src, dst, diff_id, size
