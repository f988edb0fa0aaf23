"""Manual-placement baseline: F1 of the full installed sensor set on a CASAS log"""

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import get_config
from schemas.config_files import ClassifierConfig, ReplayConfig
from services.dataset import load_casas_file, rasterize
from services.objective import Placement, ReplayEvaluator
from utils.seeding import query_rng


def evaluate_full_inventory(casas_path: Path, reps: int = 100, seed: int = 0,
                            replay: Optional[ReplayConfig] = None,
                            classifier: Optional[ClassifierConfig] = None) -> np.ndarray:
    """Macro-F1 of every originally installed motion sensor, once per repetition"""
    replay = replay or ReplayConfig()
    events, inventory, diagnostics = load_casas_file(casas_path)
    print(f"✓ Parsed {diagnostics.events} events from {inventory.size} motion sensors "
          f"({diagnostics.malformed} malformed, {diagnostics.dropped} dropped)")

    dataset = rasterize(events, inventory, replay.period_seconds,
                        extra_annotations=diagnostics.orphan_annotations, unlabeled=replay.unlabeled)
    evaluator = ReplayEvaluator.from_dataset(dataset, replay.train_fraction, classifier)
    placement = Placement(tuple(range(inventory.size)))
    return np.array([evaluator(placement, query_rng(seed, "manual", rep)) for rep in range(reps)])


def main():
    parser = argparse.ArgumentParser(description="Evaluate the full installed sensor set of a CASAS log.")
    parser.add_argument("--casas", default=None, help="CASAS log (default: GREYPLACE_ARUBA_PATH).")
    parser.add_argument("--reps", type=int, default=100, help="Number of repetitions.")
    parser.add_argument("--seed", type=int, default=0, help="Base seed.")
    args = parser.parse_args()

    casas = Path(args.casas) if args.casas else get_config().aruba_path
    if casas is None or not casas.exists():
        print("✗ No CASAS log given and GREYPLACE_ARUBA_PATH not set")
        return 1

    print(f"→ Evaluating {casas} over {args.reps} repetitions...")
    scores = evaluate_full_inventory(casas, args.reps, args.seed)
    print(f"\n{'─' * 50}")
    print(f"Manual placement F1: {100 * scores.mean():.1f} ± {100 * scores.std(ddof=1 if len(scores) > 1 else 0):.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
