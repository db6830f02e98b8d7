import os
import uuid

from defs import ROOT_DIR
from utils.date_utils import get_now_datetime_as_string

DEFAULT_DATA_DIR = os.path.join(ROOT_DIR, "data")
DEFAULT_RUNS_DIR = os.path.join(ROOT_DIR, "runs")


def mkdir_p(path: str):
    if path:
        os.makedirs(path, exist_ok=True)


def ensure_path(*file_path_parts) -> str:
    """ Absolute path with ~ expanded, parent directory created. """
    file_path = os.path.abspath(os.path.expanduser(os.path.join(*file_path_parts)))
    mkdir_p(os.path.dirname(file_path))
    return file_path


def make_run_dir(command: str, where: str = DEFAULT_RUNS_DIR) -> str:
    """ Per-run output directory, e.g. runs/train_2023-06-11--12-21-37_1a2b3c4d/ """
    run_dir = ensure_path(where, f"{command}_{get_now_datetime_as_string()}_{uuid.uuid4().hex[:8]}")
    os.makedirs(run_dir)
    return run_dir


def fresh_file_path(file_path: str) -> str:
    """ Never reuse a file: if the path exists, suffix it with .1, .2, ... """
    file_path = ensure_path(file_path)
    if not os.path.exists(file_path):
        return file_path

    stem, ext = os.path.splitext(file_path)
    i = 1
    while os.path.exists(f"{stem}.{i}{ext}"):
        i += 1
    return f"{stem}.{i}{ext}"
