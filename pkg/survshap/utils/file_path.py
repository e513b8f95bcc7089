import os
from datetime import datetime

from survshap.pydantic_models import RunManifest

MANIFEST_NAME = "manifest.json"


def get_file_path(out_dir: str, name: str, extension: str = "csv") -> str:
    return os.path.join(out_dir, f"{name}.{extension}")


def get_manifest_path(output: str) -> str:
    """manifest.json inside an output directory, or next to an output file"""
    directory = output if os.path.isdir(output) or not os.path.splitext(output)[1] else None
    if directory is None:
        directory = os.path.dirname(os.path.abspath(output))
    return os.path.join(directory, MANIFEST_NAME)


def write_manifest(manifest: RunManifest, output: str) -> str:
    path = get_manifest_path(output)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(manifest.model_dump_json(indent=2))
        f.write("\n")
    return path


def read_manifest(path: str) -> RunManifest:
    with open(path) as f:
        return RunManifest.model_validate_json(f.read())


def elapsed_seconds(started_at: datetime) -> float:
    return max((datetime.now() - started_at).total_seconds(), 0.0)
