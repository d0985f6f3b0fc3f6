#!/usr/bin/env python3
"""
Acceptance Validation

Directional checks of the full framework: numerical identities, the
peak-series ACF gap, paradigm ordering, the Seq2Peak gain over SFS, the
ablation pattern, the alpha-sweep shape and manifest determinism.

Usage:
    python scripts/validate_acceptance.py                       # ETTh1 if cached, else synthetic
    python scripts/validate_acceptance.py --config configs/etth1.json
    python scripts/validate_acceptance.py --skip-experiments    # Criteria 1-5 and 10 only
"""

import argparse
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from seq2peak.analysis import experiments
from seq2peak.analysis.acf import compare_full_vs_peak
from seq2peak.analysis.gradcheck import run_gradient_suite
from seq2peak.analysis.training import TrainConfig, train
from seq2peak.cli import main as cli_main
from seq2peak.config import DatasetConfig, from_dict, load_config
from seq2peak.core import cyclicnorm as cn
from seq2peak.core import gradengine as ge
from seq2peak.core.paradigms import build_pipeline, hybrid_loss, peak_decode
from seq2peak.core.windows import SyntheticSpec, extract_peak, gen_synthetic, make_windows
from seq2peak.utils.data_loader import DATASETS, fetch_dataset, load_csv
from seq2peak.utils.validators import Seq2PeakError

ETTH1_CSV = Path('data') / 'raw' / 'ETTh1.csv'

# Criterion 5 noise and jitter; the level makes the hourly series more informative than the peaks
DEFAULT_SYNTHETIC = {'length': 24 * 400, 'noise_std': 0.5, 'peak_jitter_std': 0.5}
LEVEL_SYNTHETIC = {**DEFAULT_SYNTHETIC, 'daily_amplitude': 4.0,
                   'level_std': 2.0, 'level_persistence': 0.9}
ERRORS = []
WARNINGS = []


def error(msg):
    ERRORS.append(msg)
    print(f"ERROR: {msg}")


def warning(msg):
    WARNINGS.append(msg)
    print(f"WARNING: {msg}")


def ok(msg):
    print(f"OK: {msg}")


def check(condition, msg):
    if condition:
        ok(msg)
    else:
        error(msg)


def section(title):
    print(f"\n{'='*60}")
    print(f" {title}")
    print(f"{'='*60}")


def brute_force_peaks(y):
    days = y.shape[0] // 24
    out = np.empty((days, y.shape[1]))
    for d in range(days):
        for j in range(y.shape[1]):
            out[d, j] = max(y[d * 24:(d + 1) * 24, j])
    return out


def check_roundtrip():
    section("1. CYCLICNORM ROUND TRIP")
    rng = np.random.default_rng(0)
    worst, worst_mean, worst_std = 0.0, 0.0, 0.0
    for _ in range(100):
        X = rng.normal(size=(720, 7)) * rng.uniform(0.5, 5, size=7) + rng.normal(size=7)
        anchor = int(rng.integers(0, 24))
        stats = cn.compute_phase_stats(X, anchor)
        Xn = cn.normalize(X, stats)
        back = cn.denormalize_nodes(Xn, stats.means, stats.stds, anchor).value
        worst = max(worst, np.max(np.abs(back - X)))
        per_phase = Xn.reshape(30, 24, 7)
        worst_mean = max(worst_mean, np.max(np.abs(per_phase.mean(axis=0))))
        worst_std = max(worst_std, np.max(np.abs(per_phase.std(axis=0) - 1.0)))
    check(worst < 1e-10, f"Reconstruction max abs error {worst:.2e} (< 1e-10)")
    check(worst_mean < 1e-10, f"Per-phase normalized mean {worst_mean:.2e} (< 1e-10)")
    check(worst_std < 1e-8, f"Per-phase normalized std deviation from 1 {worst_std:.2e} (< 1e-8)")


def check_peak_oracle():
    section("2. PEAK ORACLE EQUIVALENCE")
    rng = np.random.default_rng(0)
    mismatches = 0
    for _ in range(1000):
        m = int(rng.choice([24, 48, 120]))
        c = int(rng.choice([1, 7]))
        y = rng.normal(size=(m, c))
        expected = brute_force_peaks(y)
        if not (np.array_equal(extract_peak(y), expected)
                and np.array_equal(peak_decode(ge.const(y)).value, expected)):
            mismatches += 1
    check(mismatches == 0, f"extract_peak and peak_decode match the linear scan on 1000 matrices "
                           f"({mismatches} mismatches)")


def check_gradients():
    section("3. GRADIENT CORRECTNESS")
    worst = 0.0
    failed = 0
    for seed in range(10):
        passed, results = run_gradient_suite(seed=seed)
        failed += sum(not r['passed'] for r in results)
        worst = max(worst, max(r['max_rel_error'] for r in results))
    check(failed == 0, f"linear/dlinear/mlp x alpha {{0, 0.3, 0.5, 1}} x 10 seeds "
                       f"(max rel error {worst:.2e}, {failed} failures)")


def check_loss_endpoints():
    section("4. LOSS ENDPOINTS")
    rng = np.random.default_rng(0)
    y_hat, y = ge.const(rng.normal(size=(4, 48, 2))), rng.normal(size=(4, 48, 2))
    p_hat, p = ge.const(rng.normal(size=(4, 2, 2))), rng.normal(size=(4, 2, 2))
    seq, peak = ge.mse(y_hat, y).value, ge.mse(p_hat, p).value
    check(hybrid_loss(y_hat, y, p_hat, p, 1.0).value == seq, "alpha = 1 equals the sequence MSE")
    check(hybrid_loss(y_hat, y, p_hat, p, 0.0).value == peak, "alpha = 0 equals the peak MSE")

    frame = gen_synthetic(SyntheticSpec(length=24 * 30, channels=2, seed=0))
    tr = make_windows(frame.slice(0, 480), 96, 48, stride=8)
    va = make_windows(frame.slice(480, 720), 96, 48, stride=8)
    config = TrainConfig(max_epochs=3, batch_size=16, learning_rate=1e-2, seed=7)
    states = []
    for kind, alpha in (("sfs", None), ("seq2peak", 1.0)):
        pipe = build_pipeline(kind, 96, 48, 2, cyclicnorm={"enabled": True, "shift": "identity"},
                              alpha=alpha, seed=3)
        train(pipe, tr, va, config)
        states.append(pipe.state_dict())
    same = states[0].keys() == states[1].keys() and all(
        np.array_equal(states[0][k], states[1][k]) for k in states[0]
    )
    check(same, "seq2peak at alpha = 1 trains bit-identically to SFS")


def check_acf():
    section("5. PEAK-SERIES ACF GAP")
    for label, params in (('Synthetic', DEFAULT_SYNTHETIC), ('Synthetic with level', LEVEL_SYNTHETIC)):
        wins = 0
        for seed in range(10):
            frame = gen_synthetic(SyntheticSpec(**params, seed=seed))
            result = compare_full_vs_peak(frame, "ch0", 96)
            wins += result['full_r24'] > result['peak_r1']
        check(wins >= 9, f"{label}: full r(24) > peak r(1) in {wins}/10 seeds (need >= 9)")

    if ETTH1_CSV.exists():
        result = compare_full_vs_peak(load_csv(ETTH1_CSV), "OT", 96)
        check(result['full_r24'] > result['peak_r1'],
              f"ETTh1 OT: full r(24) = {result['full_r24']:.3f}, peak r(1) = {result['peak_r1']:.3f}")
    else:
        warning(f"{ETTH1_CSV} not found; ETTh1 ACF check skipped")


def paradigm_config():
    return from_dict({
        "dataset": {"synthetic": LEVEL_SYNTHETIC},
        "input_hours": 720,
        "horizons": [5],
        "paradigms": ["pfp", "sfp", "sfs"],
        "model": "linear",
        "train": {"max_epochs": 50, "patience": 10, "stride": 4},
        "seeds": [0, 1, 2, 3, 4],
    })


def check_paradigm_ordering(out_dir, jobs):
    section("6. PARADIGM ORDERING")
    rows, _, _ = experiments.run_paradigm_comparison(paradigm_config(), out_dir / 'paradigms', jobs=jobs)
    table = rows.pivot_table(index='seed', columns='paradigm', values='mse')
    wins = int((table['sfs'] < table[['pfp', 'sfp']].min(axis=1)).sum())
    means = ', '.join(f"{k} {table[k].mean():.4f}" for k in ('pfp', 'sfp', 'sfs'))
    check(wins >= 4, f"SFS beats PFP and SFP in {wins}/5 seeds (need >= 4; means {means})")


def main_setup(config_path):
    """The dlinear, 5-day setup on ETTh1, or on the synthetic series when offline."""
    config = load_config(config_path) if config_path else None
    if config is None:
        config = from_dict({"dataset": {"name": "ETTh1"}, "input_hours": 720, "horizons": [5],
                            "train": {"max_epochs": 30, "patience": 5, "stride": 4}})
    ds = config.dataset
    if ds.name is not None:
        try:
            if ds.url is None and ds.name not in DATASETS:
                raise Seq2PeakError(f"unknown dataset {ds.name}")
            fetch_dataset(ds.name, ds.url, ds.cache_dir, ds.sha256)
        except Seq2PeakError as e:
            warning(f"{ds.name} unavailable ({e}); using the synthetic series")
            config = replace(config, dataset=DatasetConfig(synthetic=DEFAULT_SYNTHETIC))
    if config.cyclicnorm.shift is None:
        config = replace(config, cyclicnorm=replace(config.cyclicnorm, shift="affine"))
    return replace(config, model="dlinear", horizons=(5,), seeds=(0, 1, 2, 3, 4))


def check_experiments(config, out_dir, jobs):
    data = experiments.prepare_data(config)

    section("7. SEQ2PEAK GAIN OVER SFS")
    rows, _ = experiments.run_ablation(config, out_dir / 'ablation', data, jobs=jobs)
    table = rows.pivot_table(index='seed', columns='variant', values='mse')
    gain = 1.0 - table['+Seq2Peak'].mean() / table['baseline'].mean()
    check(gain >= 0.10, f"Mean peak-MSE {table['baseline'].mean():.4f} -> "
                        f"{table['+Seq2Peak'].mean():.4f} ({gain:.1%} lower, need >= 10%)")

    section("8. ABLATION PATTERN")
    best = int((table.idxmin(axis=1) == '+Seq2Peak').sum())
    check(best >= 3, f"+Seq2Peak is lowest in {best}/5 seeds (need >= 3)")
    for row in ('+Decoder', '+CyclicNorm'):
        check(table[row].mean() <= table['baseline'].mean(),
              f"{row} mean {table[row].mean():.4f} <= baseline {table['baseline'].mean():.4f}")

    section("9. ALPHA SWEEP SHAPE")
    curve, _ = experiments.run_alpha_sweep(config, out_dir / 'alpha', (0.0, 0.25, 0.5, 0.75, 1.0),
                                           data, jobs=jobs)
    mse = dict(zip(curve['alpha'], curve['mse']))
    interior = min(mse[a] for a in (0.25, 0.5, 0.75))
    check(interior < min(mse[0.0], mse[1.0]),
          f"Best interior alpha MSE {interior:.4f} vs endpoints {mse[0.0]:.4f} / {mse[1.0]:.4f}")


def check_determinism(out_dir):
    section("10. MANIFEST DETERMINISM")
    config = out_dir / 'tiny.json'
    config.write_text(
        '{"dataset": {"synthetic": {"length": 1440}}, "input_hours": 96, "horizons": [2],'
        ' "train": {"max_epochs": 3, "stride": 6}, "seeds": [0, 1]}'
    )
    first, second = out_dir / 'first', out_dir / 'second'
    code = cli_main(['compare', '--config', str(config), '--out', str(first), '--jobs', '1', '--quiet'])
    code |= cli_main(['compare', '--config', str(first / 'run.json'), '--out', str(second),
                      '--jobs', '1', '--quiet'])
    if code:
        error("compare exited with a non-zero status")
        return
    names = ['compare_metrics.json', 'compare_metrics.md'] + sorted(p.name for p in first.glob('traces_*.csv'))
    differing = [n for n in names if (first / n).read_bytes() != (second / n).read_bytes()]
    check(not differing, f"Re-running run.json reproduces {len(names)} metric files"
                         + (f" (differs: {differing})" if differing else ""))


def main():
    parser = argparse.ArgumentParser(description='Seq2Peak acceptance checks')
    parser.add_argument('--config', type=Path, help='Config for the dlinear experiments (criteria 7-9)')
    parser.add_argument('--out', type=Path, help='Keep experiment outputs here')
    parser.add_argument('--jobs', type=int, default=1)
    parser.add_argument('--skip-experiments', action='store_true',
                        help='Skip the training-heavy criteria 6-9')
    args = parser.parse_args()

    started = time.time()
    with tempfile.TemporaryDirectory() as tmp:
        out_dir = args.out or Path(tmp)
        out_dir.mkdir(parents=True, exist_ok=True)

        check_roundtrip()
        check_peak_oracle()
        check_gradients()
        check_loss_endpoints()
        check_acf()
        if not args.skip_experiments:
            check_paradigm_ordering(out_dir, args.jobs)
            check_experiments(main_setup(args.config), out_dir, args.jobs)
        check_determinism(out_dir)

    section("SUMMARY")
    print(f"Elapsed: {time.time() - started:.1f}s")
    print(f"Errors: {len(ERRORS)}")
    print(f"Warnings: {len(WARNINGS)}")
    if ERRORS:
        print("\nVALIDATION FAILED")
        return 1
    print("\nALL CHECKS PASSED")
    return 0


if __name__ == '__main__':
    sys.exit(main())
