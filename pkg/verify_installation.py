"""
Verification script to test package installation and imports
"""

# verify_installation.py

import importlib
import shutil
import sys


def check_package(package_name):
    """Try to import a package and print its location if successful."""
    try:
        module = importlib.import_module(package_name)
        print(f"✅ Successfully imported {package_name} from {getattr(module, '__file__', '?')}")
        return True
    except ImportError as e:
        print(f"❌ Failed to import {package_name}: {e}")
        return False


def check_function(package_name, function_name):
    """Try to import a specific function from a package."""
    try:
        getattr(importlib.import_module(package_name), function_name)
        print(f"✅ Successfully imported {function_name} from {package_name}")
        return True
    except (ImportError, AttributeError) as e:
        print(f"❌ Failed to import {function_name} from {package_name}: {e}")
        return False


def check_command(command):
    """Report whether a console script is on PATH."""
    path = shutil.which(command)
    if path:
        print(f"✅ Command '{command}' found at: {path}")
        return True
    print(f"❌ Command '{command}' not found in PATH")
    return False


def main():
    """Run verification checks."""
    print("\n=== Package Import Verification ===\n")
    results = [check_package(name) for name in ("edf_fair", "app_utils", "numpy", "scipy", "pandas", "tomli")]

    print("\n=== Function Import Verification ===\n")
    functions = [
        ("edf_fair", "main"),
        ("edf_fair", "run_experiment"),
        ("edf_fair", "fit_linear"),
        ("app_utils", "ConfigManager"),
        ("app_utils", "LoggingManager"),
    ]
    results += [check_function(package, function) for package, function in functions]

    print("\n=== Entry Point Verification ===\n")
    results += [check_command("edf-fair"), check_command("edf_fair")]

    print(f"\nPython {sys.version.split()[0]}; {sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
