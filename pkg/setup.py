"""
Setup script for the Moment Bound Calculator
Creates a virtual environment, installs the numerical stack and runs the
fast self-checks.
"""

import platform
import subprocess
import sys
from pathlib import Path

MIN_PYTHON = (3, 9)
SELF_CHECKS = (
    ["main.py", "parse-check", "min(x1, 2*x2) - 1"],
    ["main.py", "bound", "hoeffding-mean", "--mu", "0.5", "--theta", "0.6", "--m", "10"],
    ["main.py", "verify", "golden"],
    ["main.py", "verify", "lp", "--reps", "100"],
)


def check_python_version():
    """Check if Python version is compatible"""
    version = sys.version_info
    if version[:2] < MIN_PYTHON:
        print(f"❌ Python {MIN_PYTHON[0]}.{MIN_PYTHON[1]} or higher is required")
        print(f"Current version: {version.major}.{version.minor}.{version.micro}")
        return False

    print(f"✅ Python {version.major}.{version.minor}.{version.micro} detected")
    return True


def venv_python():
    if platform.system() == "Windows":
        return Path("venv") / "Scripts" / "python"
    return Path("venv") / "bin" / "python"


def create_virtual_environment():
    """Create Python virtual environment"""
    if Path("venv").exists():
        print("✅ Virtual environment already exists")
        return True

    try:
        print("Creating virtual environment...")
        subprocess.run([sys.executable, "-m", "venv", "venv"], check=True)
        print("✅ Virtual environment created")
        return True
    except subprocess.CalledProcessError:
        print("❌ Failed to create virtual environment")
        return False


def install_python_dependencies():
    """Install numpy, scipy and the test tools"""
    python_path = str(venv_python())
    try:
        print("Upgrading pip...")
        subprocess.run([python_path, "-m", "pip", "install", "--upgrade", "pip"], check=True)
        print("Installing Python dependencies...")
        subprocess.run([python_path, "-m", "pip", "install", "-r", "requirements.txt"], check=True)
        print("✅ Python dependencies installed")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ Failed to install Python dependencies: {e}")
        return False


def run_self_checks():
    """Fast CLI smoke runs; the full suite is `pytest`"""
    python_path = str(venv_python())
    for command in SELF_CHECKS:
        result = subprocess.run([python_path, *command], capture_output=True, text=True)
        label = " ".join(command[1:])
        if result.returncode != 0:
            print(f"❌ {label} exited with {result.returncode}")
            print(result.stderr.strip())
            return False
        print(f"✅ {label}")
    return True


def main():
    """Main setup function"""
    print("=" * 60)
    print("🚀 MOMENT BOUND CALCULATOR - SETUP")
    print("=" * 60)
    print()

    if not check_python_version():
        return False
    if not create_virtual_environment():
        return False
    if not install_python_dependencies():
        return False

    print()
    if not run_self_checks():
        return False

    print()
    print("=" * 60)
    print("✅ SETUP COMPLETE!")
    print("=" * 60)
    print()
    print("Next steps:")
    print("1. Run: venv/bin/python -m pytest -m 'not slow'")
    print("2. Run: venv/bin/python main.py stability")
    print("   (certified instability bound for the uncertain plant)")
    print()
    return True


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
