"""Direct entanglement detection by structural physical approximation, simulated."""
import subprocess
from functools import lru_cache
from pathlib import Path

__version__ = "0.1.0"


@lru_cache(maxsize=1)
def version_string() -> str:
    """Package version with a git-describe suffix when run from a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--abbrev=10"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    if out.returncode != 0 or not out.stdout.strip():
        return __version__
    return f"{__version__}-g{out.stdout.strip()}"
