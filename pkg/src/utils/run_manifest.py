"""
Run manifests: what was run, on which inputs, with which configuration.
"""
import os
import json
import time
import logging
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional
from pydantic import BaseModel, Field

from src.utils.config import TOOL_VERSION
from src.utils.path_utils import ensure_dir_exists, input_digests

logger = logging.getLogger('run_manifest')


class RunManifest(BaseModel):
    """
    Record emitted for every CLI run; enough to reproduce the outputs.
    """
    command: str
    argv: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    input_digests: Dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str = TOOL_VERSION
    started_at: str = Field(default_factory=lambda: datetime.now().isoformat())
    wall_time_s: float = 0.0
    outputs: List[str] = Field(default_factory=list)
    exit_code: int = 0


class ManifestRecorder:
    """
    Collects manifest fields while a command runs and persists them at the end.
    """
    def __init__(self, command: str, argv: Iterable[str], seed: Optional[int] = None, max_retries: int = 3):
        """
        Start timing a run.

        Args:
            command: Subcommand name
            argv: Full argument vector
            seed: Random seed used by the run, if any
            max_retries: Retries for the final write
        """
        self.manifest = RunManifest(command=command, argv=list(argv), seed=seed)
        self.max_retries = max_retries
        self._t0 = time.perf_counter()

    def add_inputs(self, *paths: Optional[str]) -> None:
        """Hash input files into the manifest."""
        self.manifest.input_digests.update(input_digests(paths))

    def set_config(self, config: Dict[str, Any]) -> None:
        self.manifest.config = config

    def add_output(self, path: str) -> None:
        self.manifest.outputs.append(os.path.abspath(path))

    def save(self, path: str, exit_code: int = 0) -> bool:
        """
        Write the manifest atomically (temp file + rename).

        Args:
            path: Destination JSON file
            exit_code: Exit code of the run

        Returns:
            bool: True if successful, False otherwise
        """
        self.manifest.exit_code = exit_code
        self.manifest.wall_time_s = time.perf_counter() - self._t0
        payload = self.manifest.model_dump()

        for attempt in range(self.max_retries):
            try:
                ensure_dir_exists(os.path.dirname(os.path.abspath(path)))
                temp_file = f"{path}.tmp"
                with open(temp_file, 'w', encoding='utf-8') as f:
                    json.dump(payload, f, indent=2, sort_keys=True)
                os.replace(temp_file, path)
                logger.info(f"Saved run manifest to {path}")
                return True
            except OSError as e:
                logger.error(f"Error saving manifest (attempt {attempt+1}/{self.max_retries}): {str(e)}")
                if attempt < self.max_retries - 1:
                    time.sleep(0.2)

        logger.error(f"Failed to save manifest after {self.max_retries} attempts")
        return False


def load_manifest(path: str) -> RunManifest:
    """Read a manifest written by ManifestRecorder.save."""
    with open(path, 'r', encoding='utf-8') as f:
        return RunManifest.model_validate(json.load(f))
