"""All-or-nothing output staging: files appear only when a run completes."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from types import TracebackType


class OutputStage:
    """Collect output files as hidden temporaries and rename them on success.

    On an exception every temporary is removed, so no output file is ever
    left partially written and earlier outputs stay untouched.
    """

    def __init__(self, out_dir: str | Path) -> None:
        self.out_dir = Path(out_dir)
        self._pending: list[tuple[Path, Path]] = []

    def __enter__(self) -> OutputStage:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def path(self, name: str) -> Path:
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.out_dir)
        os.close(fd)
        self._pending.append((Path(tmp), self.out_dir / name))
        return Path(tmp)

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)

    @property
    def names(self) -> list[str]:
        return [final.name for _, final in self._pending]

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if exc_type is None:
            for tmp, final in self._pending:
                os.replace(tmp, final)
        else:
            for tmp, _ in self._pending:
                tmp.unlink(missing_ok=True)
        self._pending.clear()


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    with OutputStage(path.parent) as stage:
        stage.write_text(path.name, text)
