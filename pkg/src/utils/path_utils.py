"""
Path utilities: output directories and content digests of input files.
"""
import os
import hashlib
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional

logger = logging.getLogger('path_utils')


def ensure_dir_exists(directory):
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        directory: The directory path to check/create

    Returns:
        bool: True if directory exists or was created, False on failure
    """
    try:
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        return True
    except Exception as e:
        logger.error(f"Error creating directory {directory}: {str(e)}")
        return False


def get_output_path(out_dir: str, filename: str) -> str:
    """
    Join an output directory and a file name, creating the directory.

    Args:
        out_dir: Output directory
        filename: File name inside it

    Returns:
        str: Full path of the output file
    """
    if not ensure_dir_exists(out_dir):
        raise OSError(f"Cannot create output directory {out_dir}")
    return str(Path(out_dir) / filename)


def file_digest(path: str, chunk_size: int = 1 << 16) -> str:
    """
    SHA-256 content hash of a file.

    Args:
        path: File to hash
        chunk_size: Read size

    Returns:
        str: Hex digest
    """
    sha = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            sha.update(chunk)
    return sha.hexdigest()


def input_digests(paths: Iterable[Optional[str]]) -> Dict[str, str]:
    """Digest every existing input file, keyed by its absolute path."""
    digests = {}
    for path in paths:
        if path and os.path.isfile(path):
            digests[os.path.abspath(path)] = file_digest(path)
    return digests
