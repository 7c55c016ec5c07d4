"""
Bootstrap script for heatframe
Prepares logs/ and reports/, writes a default .env and installs the pinned stack
"""
import sys
import subprocess
import platform
from pathlib import Path

WORK_DIRS = ("logs", "reports")

DEFAULT_ENV = {
    "LOG_LEVEL": "INFO",
    "LOG_DIR": "logs",
    "REPORT_DIR": "reports",
    "DEFAULT_SEED": "0",
    "NOISE_FLOOR": "1e-12",
    "CUTOFF_EPSILON": "1.0",
    "DEFAULT_BASE": "2.0",
    "GAMMA_EPSILON": "0.1",
}

IGNORED = (
    "__pycache__/", "*.py[cod]", "*.egg-info/", ".pytest_cache/",
    "venv/", ".venv/", ".vscode/", ".idea/",
    "logs/", "reports/", "*.hkf", ".env",
)


def make_work_dirs():
    for name in WORK_DIRS:
        Path(name).mkdir(parents=True, exist_ok=True)
        print(f"Ready: {name}/")


def write_env():
    """Default settings; an existing .env is kept as is"""
    target = Path(".env")
    if target.exists():
        print("Keeping existing .env")
        return
    lines = ["# heatframe settings"] + [f"{key}={value}" for key, value in DEFAULT_ENV.items()]
    target.write_text("\n".join(lines) + "\n")
    print(f"Wrote .env ({len(DEFAULT_ENV)} keys)")


def write_gitignore():
    Path(".gitignore").write_text("\n".join(IGNORED) + "\n")
    print("Wrote .gitignore")


def install_requirements() -> bool:
    if sys.version_info < (3, 9):
        print(f"heatframe needs Python 3.9+, found {platform.python_version()}")
        return False
    print("Installing requirements.txt ...")
    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
    except subprocess.CalledProcessError as e:
        print(f"pip failed: {e}")
        return False
    return True


def main():
    print(f"heatframe bootstrap on {platform.system()} {platform.release()}")

    make_work_dirs()
    write_env()
    write_gitignore()
    installed = install_requirements()

    print("\nNext steps:")
    print("  python -m heatframe build --space torus --N 512 --levels 6 --variant tight --out torus.hkf")
    print("  python -m heatframe verify torus.hkf --suite all")
    print("  pytest heatframe/tests")

    if not installed:
        print("\nWarning: dependencies were not installed")
        sys.exit(1)


if __name__ == "__main__":
    main()
