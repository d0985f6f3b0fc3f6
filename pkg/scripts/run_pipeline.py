#!/usr/bin/env python3
"""
Seq2Peak Experiment Pipeline

Runs the experiment suite from data to final tables through the CLI.

Usage:
    python scripts/run_pipeline.py                          # Run all steps
    python scripts/run_pipeline.py --config configs/etth1.json
    python scripts/run_pipeline.py --step 3                 # Run from step 3 onwards
    python scripts/run_pipeline.py --only 5                 # Run only step 5
    python scripts/run_pipeline.py --validate               # Acceptance checks only
"""

import argparse
import json
import subprocess
import sys
import time
from datetime import datetime
from pathlib import Path

from tqdm import tqdm

SCRIPTS_DIR = Path('scripts')
DEFAULT_CONFIG = Path('configs') / 'synth.json'

# Pipeline steps in execution order; 'args' are appended to `seq2peak <command>`
PIPELINE_STEPS = [
    {
        'step': 1,
        'name': 'Fetch Dataset',
        'command': 'fetch',
        'description': 'Download and cache the configured benchmark CSV',
        'needs_registry': True,
    },
    {
        'step': 2,
        'name': 'Gradient Check',
        'command': 'check-grads',
        'args': ['--seed', '0'],
        'description': 'Finite-difference check of every pipeline gradient',
        'required': True,  # Must pass for pipeline to continue
    },
    {
        'step': 3,
        'name': 'Peak-Series ACF',
        'command': 'acf',
        'args': ['--max-lag', '96', '--plot'],
        'description': 'Autocorrelation of the full and daily-peak series',
    },
    {
        'step': 4,
        'name': 'Paradigm Comparison',
        'command': 'compare',
        'args': ['--plot'],
        'description': 'PFP, SFP, SFS and Seq2Peak on shared data and seeds',
    },
    {
        'step': 5,
        'name': 'Module Ablation',
        'command': 'ablate',
        'description': 'Baseline, +Decoder, +CyclicNorm, +Seq2Peak',
    },
    {
        'step': 6,
        'name': 'Alpha Sweep',
        'command': 'sweep-alpha',
        'args': ['--plot'],
        'description': 'Hybrid-loss weight sweep over the configured alphas',
    },
    {
        'step': 7,
        'name': 'Acceptance Checks',
        'script': 'validate_acceptance.py',
        'description': 'Directional acceptance checks with OK/ERROR output',
    },
]


def print_header(text, char='='):
    """Print formatted header."""
    width = 70
    print()
    print(char * width)
    print(f" {text}")
    print(char * width)


def print_step(step_info, status='RUNNING'):
    """Print step info."""
    icons = {'RUNNING': '...', 'DONE': 'OK', 'SKIP': 'SKIP', 'FAIL': 'FAIL'}
    icon = icons.get(status, '-')
    print(f"\n[{icon}] Step {step_info['step']}: {step_info['name']}")
    print(f"   {step_info['description']}")


def run_command(cmd):
    """Run a subprocess and return success status."""
    try:
        result = subprocess.run(cmd)
    except OSError as e:
        print(f"   Exception: {e}")
        return False
    return result.returncode == 0


def step_command(step_info, config_path, jobs):
    if step_info.get('script'):
        script_path = SCRIPTS_DIR / step_info['script']
        return [sys.executable, str(script_path), '--config', str(config_path)]
    cmd = [sys.executable, '-m', 'seq2peak.cli', step_info['command'], '--config', str(config_path)]
    cmd += step_info.get('args', [])
    if step_info['command'] in ('compare', 'ablate', 'sweep-alpha') and jobs:
        cmd += ['--jobs', str(jobs)]
    return cmd


def uses_registry(config_path):
    """True when the config names a dataset to download."""
    data = json.loads(Path(config_path).read_text())
    data = data.get('config', data)
    return data.get('dataset', {}).get('name') is not None


def run_pipeline(config_path, start_step=1, only_step=None, validate_only=False, jobs=None):
    """Run the complete pipeline."""
    print_header("SEQ2PEAK EXPERIMENT PIPELINE")
    print(f"\nStarted: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"Config: {config_path}")

    if validate_only:
        print("\nVAL MODE: Running acceptance checks only")
        only_step = 7

    if only_step:
        print(f"\nSINGLE STEP MODE: Running step {only_step} only")
    elif start_step > 1:
        print(f"\nRESUME MODE: Starting from step {start_step}")

    results = []
    start_time = time.time()

    steps_to_run = [s for s in PIPELINE_STEPS
                    if s['step'] >= start_step and (only_step is None or s['step'] == only_step)]
    pbar = tqdm(steps_to_run, desc="Pipeline Progress", unit="step", ncols=80,
                disable=len(steps_to_run) <= 1)

    for step_info in pbar:
        step_num = step_info['step']
        pbar.set_description(f"Step {step_num}: {step_info['name'][:25]}")
        print_step(step_info, 'RUNNING')
        step_start = time.time()

        if step_info.get('needs_registry') and not uses_registry(config_path):
            print("   Config uses a local or synthetic series, skipping...")
            print_step(step_info, 'SKIP')
            results.append({'step': step_num, 'status': 'SKIPPED', 'time': 0})
            continue

        success = run_command(step_command(step_info, config_path, jobs))
        elapsed = time.time() - step_start

        if success:
            print_step(step_info, 'DONE')
            print(f"   Completed in {elapsed:.1f}s")
            results.append({'step': step_num, 'status': 'SUCCESS', 'time': elapsed})
        else:
            print_step(step_info, 'FAIL')
            results.append({'step': step_num, 'status': 'FAILED', 'time': elapsed})
            if step_info.get('required'):
                print("\nHALTED: Required step failed")
                break

    total_time = time.time() - start_time
    print_header("PIPELINE SUMMARY")

    print("\nResults:")
    for r in results:
        status_icon = {'SUCCESS': 'OK  ', 'FAILED': 'FAIL', 'SKIPPED': 'SKIP'}[r['status']]
        step_name = next(s['name'] for s in PIPELINE_STEPS if s['step'] == r['step'])
        print(f"  [{status_icon}] Step {r['step']}: {step_name} ({r['time']:.1f}s)")

    failed = [r for r in results if r['status'] == 'FAILED']

    print(f"\nTotal time: {total_time:.1f}s ({total_time/60:.1f} min)")
    print(f"Completed: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    if failed:
        print(f"\nFAILED: {len(failed)} step(s) failed")
        return 1
    print("\nCOMPLETED SUCCESSFULLY")
    return 0


def main():
    parser = argparse.ArgumentParser(
        description='Seq2Peak Experiment Pipeline',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python scripts/run_pipeline.py                               # Synthetic suite
  python scripts/run_pipeline.py --config configs/etth1.json   # ETTh1 suite
  python scripts/run_pipeline.py --step 4                      # Resume from step 4
  python scripts/run_pipeline.py --validate                    # Acceptance checks only
        """
    )
    parser.add_argument('--config', type=Path, default=DEFAULT_CONFIG,
                        help='Experiment config passed to every step')
    parser.add_argument('--step', type=int, default=1,
                        help=f'Start from this step (1-{len(PIPELINE_STEPS)})')
    parser.add_argument('--only', type=int,
                        help='Run only this step')
    parser.add_argument('--validate', action='store_true',
                        help='Run acceptance checks only (step 7)')
    parser.add_argument('--jobs', type=int,
                        help='Worker processes for experiment steps')
    parser.add_argument('--list', action='store_true',
                        help='List all pipeline steps')

    args = parser.parse_args()

    if args.list:
        print_header("PIPELINE STEPS")
        for step in PIPELINE_STEPS:
            print(f"\n  Step {step['step']}: {step['name']}")
            print(f"         {step['description']}")
            print(f"         Runs: {step.get('script') or 'seq2peak ' + step['command']}")
        print()
        return 0

    return run_pipeline(
        args.config,
        start_step=args.step,
        only_step=args.only,
        validate_only=args.validate,
        jobs=args.jobs,
    )


if __name__ == '__main__':
    sys.exit(main())
