import logging
from pathlib import Path
from typing import Callable, Iterator

import pytest
import yaml


@pytest.fixture(autouse=True)
def restore_logging() -> Iterator[None]:
    """cli.main перенастраивает корневой логгер; возвращаем обработчики pytest."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    def write(sections: dict[str, object], name: str = "run.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(sections), encoding="utf-8")
        return path

    return write
