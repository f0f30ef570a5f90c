#!/usr/bin/env python3
"""Verify installation and configuration."""
import sys
from pathlib import Path

# Color codes for output
GREEN = '\033[92m'
RED = '\033[91m'
YELLOW = '\033[93m'
RESET = '\033[0m'

def check(condition, message):
    """Print check result."""
    if condition:
        print(f"{GREEN}✓{RESET} {message}")
        return True
    else:
        print(f"{RED}✗{RESET} {message}")
        return False

def warn(message):
    """Print warning."""
    print(f"{YELLOW}⚠{RESET} {message}")

def main():
    """Run verification checks."""
    print("=" * 60)
    print("clipscore - Installation Verification")
    print("=" * 60)

    checks_passed = 0
    total_checks = 0
    project_root = Path(__file__).parent.parent

    # Check 1: Project structure
    print("\n1. Checking project structure...")
    total_checks += 1

    required_dirs = [
        'config', 'config/experiments', 'src', 'scripts', 'docs', 'tests',
        'src/autodiff', 'src/nn', 'src/models', 'src/data', 'src/training',
        'src/database', 'src/reporting', 'src/utils'
    ]

    structure_ok = True
    for dir_name in required_dirs:
        if not (project_root / dir_name).exists():
            print(f"   Missing directory: {dir_name}")
            structure_ok = False

    if check(structure_ok, "Project structure"):
        checks_passed += 1

    # Check 2: Configuration files
    print("\n2. Checking configuration files...")
    total_checks += 1

    config_files = [
        'config/config.yaml',
        'config/experiments/default.json',
        'requirements.txt',
        'pytest.ini',
        'README.md'
    ]

    config_ok = True
    for file_name in config_files:
        if not (project_root / file_name).exists():
            print(f"   Missing file: {file_name}")
            config_ok = False

    if check(config_ok, "Configuration files"):
        checks_passed += 1

    # Check 3: Python version
    print("\n3. Checking Python version...")
    total_checks += 1

    py_version = sys.version_info
    version_ok = py_version.major == 3 and py_version.minor >= 8

    if check(version_ok, f"Python version ({py_version.major}.{py_version.minor}.{py_version.micro})"):
        checks_passed += 1
    else:
        print(f"   Requires Python 3.8+, found {py_version.major}.{py_version.minor}.{py_version.micro}")

    # Check 4: Dependencies
    print("\n4. Checking dependencies...")
    total_checks += 1

    required_packages = [
        'numpy', 'scipy', 'pandas', 'tqdm', 'dotenv', 'yaml',
        'sqlalchemy', 'jinja2', 'colorlog', 'pytest'
    ]

    missing_packages = []
    for package in required_packages:
        try:
            __import__(package)
        except ImportError:
            missing_packages.append(package)

    if check(len(missing_packages) == 0, "All dependencies installed"):
        checks_passed += 1
    else:
        print(f"   Missing packages: {', '.join(missing_packages)}")
        warn("Run 'pip install -r requirements.txt' to install dependencies")
        # The remaining checks import the package
        print(f"\n{RED}✗ Installation has issues, please review errors above{RESET}")
        return False

    sys.path.insert(0, str(project_root))

    # Check 5: Configuration loads
    print("\n5. Loading configuration...")
    total_checks += 1

    config = None
    try:
        from src.utils.config_loader import ConfigLoader
        config = ConfigLoader()
        if check(True, f"config.yaml loads ({config.get_threads()} thread(s))"):
            checks_passed += 1
    except Exception as e:
        check(False, f"config.yaml loads: {e}")

    # Check 6: Backbone geometry
    print("\n6. Tracing backbone geometry...")
    total_checks += 1

    try:
        from src.models.backbone import BackboneConfig, build_backbone
        backbone = build_backbone(BackboneConfig('34', 'conv2plus1d', 16), seed=0)
        feature = backbone.trace_shapes([1, 3, 16, 112, 112])[-1][1]
        if check(feature == [1, 128], f"34-layer (2+1)D clip feature shape {feature}"):
            checks_passed += 1
    except Exception as e:
        check(False, f"backbone geometry: {e}")

    # Check 7: Gradient oracle (primitives only)
    print("\n7. Checking primitive gradients...")
    total_checks += 1

    try:
        from src.training.gradcheck_suite import GradientChecker
        results = GradientChecker().run(include_pipeline=False)
        failed = [r.name for r in results if not r.passed]
        if check(not failed, f"{len(results)} gradient checks"):
            checks_passed += 1
        else:
            print(f"   Failing: {', '.join(failed)}")
    except Exception as e:
        check(False, f"gradient checks: {e}")

    # Check 8: Run registry
    print("\n8. Checking run registry...")
    total_checks += 1

    db_path = config.get_database_path() if config else None
    if check(db_path is not None and db_path.exists(), "Run registry exists"):
        checks_passed += 1
    else:
        warn("Run registry will be created on first train/eval/matrix run")

    # Summary
    print("\n" + "=" * 60)
    print(f"Verification Summary: {checks_passed}/{total_checks} checks passed")
    print("=" * 60)

    if checks_passed == total_checks:
        print(f"\n{GREEN}✓ Installation looks good!{RESET}")
        print("\nNext steps:")
        print("1. Run: python3 -m pytest")
        print("2. Run: python3 scripts/manual_run.py")
        return True
    elif checks_passed >= total_checks - 1:
        print(f"\n{YELLOW}⚠ Installation mostly complete, check warnings above{RESET}")
        return True
    else:
        print(f"\n{RED}✗ Installation has issues, please review errors above{RESET}")
        return False

if __name__ == '__main__':
    success = main()
    sys.exit(0 if success else 1)
