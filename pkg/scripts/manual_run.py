#!/usr/bin/env python3
"""Manual smoke run: small synthetic dataset, gradient checks and a short training run."""
import json
import sys
import tempfile
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.main import main as clipscore

SMOKE_SPEC = {
    'name': 'smoke',
    'backbone': {'depth': 'tiny', 'conv_type': 'conv2plus1d', 'clip_len': 16},
    'aggregation': {'kind': 'weight_decider'},
    'train': {'epochs': 2, 'lr_backbone': 1e-3, 'lr_fresh': 1e-2, 'seed': 0},
    'data': {},
    'output': {'directory': str(project_root / 'data' / 'runs' / 'smoke')},
}


def step(title: str):
    print("\n" + "=" * 80)
    print(title)
    print("=" * 80)


def main():
    """Run every command once on a desk-sized problem."""
    print("=" * 80)
    print("clipscore - Manual Smoke Run")
    print("=" * 80)
    print("\nThis generates two small synthetic datasets, runs the primitive gradient")
    print("checks and trains a tiny (2+1)D model for two epochs under data/.\n")

    input("Press Enter to continue or Ctrl+C to cancel...")

    try:
        data_dir = project_root / 'data' / 'datasets'
        train_path, test_path = data_dir / 'smoke_train.aqad', data_dir / 'smoke_test.aqad'

        step("Step 1: Generating datasets")
        for path, count, seed in ((train_path, 8, 0), (test_path, 4, 1)):
            code = clipscore(['synth', '--count', str(count), '--seed', str(seed), '--out', str(path),
                              '--frame-size', '32', '43', '--id-prefix', path.stem])
            if code != 0:
                return False

        step("Step 2: Gradient checks")
        if clipscore(['gradcheck', '--no-pipeline']) != 0:
            return False

        step("Step 3: Training")
        spec = dict(SMOKE_SPEC, data={'train_path': str(train_path), 'test_path': str(test_path)})
        with tempfile.NamedTemporaryFile('w', suffix='.json', delete=False) as f:
            json.dump(spec, f)
        if clipscore(['train', '--spec', f.name]) != 0:
            return False

        step("Step 4: Recorded runs")
        clipscore(['runs', '--limit', '5'])

        print("\n" + "=" * 80)
        print("Manual run completed successfully!")
        print("=" * 80)
        print(f"\nArtifacts: {SMOKE_SPEC['output']['directory']}")

        return True

    except KeyboardInterrupt:
        print("\n\nCancelled by user")
        return False

    except Exception as e:
        print(f"\n✗ Error: {e}")
        import traceback
        traceback.print_exc()
        return False


if __name__ == '__main__':
    success = main()
    sys.exit(0 if success else 1)
