"""Acceptance criteria 1-10, each checked at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL ...`` line; the lines are
also collected and repeated in the terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import hashlib
import math
import time
from itertools import product

import numpy as np
import pytest
from scipy.stats import spearmanr

from abcd_quant import cli, dataset, evolution, fileio, metrics, synth
from abcd_quant.dataset import DatasetRecord
from abcd_quant.errors import NoLesionFound, TinyLesionError
from abcd_quant.features import CalibrationParams, analyze_lesion, calibrate_p6mm, max_feret_diameter, score_lesion

from conftest import ACCEPTANCE_LINES


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_symmetry_suite():
    t0 = time.perf_counter()
    worst = np.zeros(3)
    for seed in range(50):
        rng = np.random.default_rng(seed)
        color = (int(rng.integers(20, 160)), int(rng.integers(10, 120)), int(rng.integers(5, 100)))
        spec = synth.SynthSpec(shape="disk", r=float(rng.uniform(25, 80)), colors=(color,))
        res = analyze_lesion(synth.render(spec, seed), CalibrationParams(), seed)
        worst = np.maximum(worst, (res.scores.a, res.border.b_shape, res.scores.c))
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(worst <= 0.05)) and elapsed < 10.0
    report(1, ok, f"max A={worst[0]:.4f} b_shape={worst[1]:.4f} C={worst[2]:.4f} (<=0.05), {elapsed:.2f}s (<10s)")


def test_criterion_2_monotone_irregularity():
    amps = [round(0.1 * k, 1) for k in range(10)]
    a_vals, bs_vals = [], []
    for amp in amps:
        spec = synth.SynthSpec(shape="star_blob", r=50, amplitude=amp, lobes=5)
        res = analyze_lesion(synth.render(spec, 0), CalibrationParams(), 0)
        a_vals.append(res.scores.a)
        bs_vals.append(res.border.b_shape)
    rho_a = spearmanr(amps, a_vals)[0]
    rho_b = spearmanr(amps, bs_vals)[0]
    report(2, rho_a >= 0.9 and rho_b >= 0.9, f"spearman(amp, A)={rho_a:.3f} spearman(amp, b_shape)={rho_b:.3f} (>=0.9)")


def test_criterion_3_border_formula_exact():
    rng = np.random.default_rng(2024)
    scored = skipped = 0
    worst = 0.0
    for case in range(200):
        n_colors = int(rng.integers(1, 7))
        spec = synth.SynthSpec(
            shape=str(rng.choice(synth.SHAPES)),
            r=float(rng.uniform(20, 75)),
            amplitude=float(rng.uniform(0, 0.6)),
            lobes=int(rng.integers(3, 9)),
            colors=tuple(tuple(int(v) for v in rng.integers(0, 150, 3)) for _ in range(n_colors)),
            edge_blur_sigma=float(rng.uniform(0, 4)),
        )
        try:
            res = analyze_lesion(synth.render(spec, case), CalibrationParams(120), case)
        except (NoLesionFound, TinyLesionError):
            skipped += 1
            continue
        scored += 1
        bb = res.border
        worst = max(worst, abs(res.scores.b - (0.5 * bb.b_shape + 0.5 * (1.0 - bb.b_grad))))
    report(3, worst == 0.0 and scored > 0, f"max |b - formula| = {worst:.1e} over {scored} scored ({skipped} unsegmentable)")


def test_criterion_4_color_point_masses():
    two = synth.SynthSpec(r=50, colors=((90, 60, 40), (30, 20, 10)))
    four = synth.SynthSpec(r=60, colors=((150, 100, 70), (90, 55, 35), (45, 30, 25), (120, 70, 110)))
    c2 = score_lesion(synth.render(two), seed=1).c
    c4 = score_lesion(synth.render(four), seed=1).c
    ok = abs(c2 - 0.10) <= 0.02 and abs(c4 - 0.30) <= 0.02
    report(4, ok, f"C(2 colors)={c2:.4f} (0.10+-0.02), C(4 colors)={c4:.4f} (0.30+-0.02)")


def _all_pairs_feret(mask):
    # every corner of every set pixel, all pairs: the O(n^2) oracle
    ys, xs = np.nonzero(mask)
    pts = np.array([(x + ox, y + oy) for x, y in zip(xs, ys) for ox, oy in product((-0.5, 0.5), repeat=2)])
    pts = np.unique(pts, axis=0)
    best = 0.0
    for i in range(len(pts)):
        best = max(best, float(np.max(np.hypot(*(pts[i + 1 :] - pts[i]).T), initial=0.0)))
    return best


def test_criterion_5_diameter_and_calibration():
    mask = np.zeros((60, 70), bool)
    mask[10:40, 15:55] = True  # 30 x 40
    feret = max_feret_diameter(mask)
    oracle = _all_pairs_feret(mask)
    diam = list(range(10, 1001, 10))
    p6 = calibrate_p6mm(diam).p6mm_px
    d = np.minimum(np.array(diam) / p6, 1.0)
    n_high = int(np.sum(d >= 0.95))
    n_sat = int(np.sum(d >= 1.0))
    top5 = int(round(0.05 * len(diam)))
    ok_feret = abs(feret - 50) <= 0.5 and abs(feret - oracle) <= 1e-9
    ok_p6 = abs(p6 - 950.5) <= 0.5
    ok_top = n_high == top5
    report(
        5,
        ok_feret and ok_p6 and ok_top,
        f"feret={feret:.3f} oracle={oracle:.3f} (50+-0.5); p6mm={p6:.2f} (950.5+-0.5); "
        f"lesions with D>=0.95: {n_high} (want exactly {top5}; D=1.0 for {n_sat})",
    )


def test_criterion_6_split_and_weights():
    recs = [DatasetRecord(f"i{k:03d}", f"l{k:03d}", "nv" if k < 60 else "mel") for k in range(100)]
    out = dataset.split_dataset(recs, seed=42)
    got, ok = {}, True
    for dx, n in (("nv", 60), ("mel", 40)):
        counts = [sum(r.diagnosis == dx and r.split == s for r in out) for s in dataset.SPLITS]
        want = [0.7 * n, 0.1 * n, 0.2 * n]
        ok &= all(abs(c - w) <= 1 for c, w in zip(counts, want))
        got[dx] = counts
    w = dataset.inverse_frequency_weights({"a": 30, "b": 10})
    ok &= w == {"a": 0.5, "b": 1.5}
    report(6, ok, f"splits nv={got['nv']} mel={got['mel']} (42/6/12, 28/4/8 +-1); weights={w}")


def test_criterion_7_metric_oracles():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 1001))
        y = rng.random(n) < rng.uniform(0.1, 0.9)
        y[0], y[1] = True, False
        s = np.round(rng.random(n), int(rng.integers(1, 4)))
        auc, curve = metrics.roc_auc(y, s)
        # independent pair count: positives beating negatives, ties at one half
        pos, neg = s[y], s[~y]
        wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
        pair = wins / (pos.size * neg.size)
        trap = metrics.trapezoid_auc(curve[:, 0], curve[:, 1])
        worst = max(worst, abs(pair - trap), abs(auc - pair))
    r = metrics.pearson((1, 2, 3), (1, 2, 4))
    loss = metrics.combined_loss(np.full(7, 1 / 7), "mel", [0.2] * 4, [0.2] * 4)
    ok = worst <= 1e-12 and abs(r - 0.98198) <= 1e-5 and abs(loss - math.log(7)) <= 1e-9
    report(7, ok, f"max AUC disagreement={worst:.1e} (<=1e-12); pearson={r:.6f}; loss-ln7={loss - math.log(7):.1e}")


def test_criterion_8_drift_recovery():
    rng = np.random.default_rng(8)
    t = np.array([0.8, 0.2, 0.9, 0.7])
    starts = rng.uniform(0, 1, (50, 4))
    model = evolution.fit_drift([(z, z + 0.1 * (t - z)) for z in starts])
    err_w = float(np.max(np.abs(model.W + 0.1 * np.eye(4))))
    err_b = float(np.max(np.abs(model.bias - 0.1 * t)))
    z0 = np.array([0.1, 0.1, 0.1, 0.2])
    traj = evolution.rollout(model, z0, K=6)
    ratio = np.linalg.norm(traj.steps[-1] - t) / np.linalg.norm(z0 - t)
    ok = err_w <= 1e-6 and err_b <= 1e-6 and abs(ratio - 0.9**6) <= 1e-6
    report(8, ok, f"|W+0.1I|={err_w:.1e} |bias-0.1t|={err_b:.1e} ratio={ratio:.8f} (0.9^6={0.9**6:.8f})")


def test_criterion_9_trajectory_shape():
    traj = evolution.abcd_trajectory((0.1, 0.1, 0.1, 0.2), (0.8, 0.1, 0.9, 0.9), K=5)
    a, b, c, d = traj.steps.T
    inc = all(bool(np.all(np.diff(v) > 0)) for v in (a, c, d))
    flat = bool(np.all(b == b[0]))
    report(9, inc and flat and len(traj) == 6, f"A,C,D strictly increasing={inc}; B constant={flat}; steps={len(traj)}")


@pytest.fixture(scope="module")
def thousand_images(tmp_path_factory):
    root = tmp_path_factory.mktemp("perf")
    img_dir = root / "images"
    img_dir.mkdir()
    rng = np.random.default_rng(10)
    rows = []
    for k in range(1000):
        spec = synth.SynthSpec(
            shape=str(rng.choice(synth.SHAPES)),
            r=float(rng.uniform(25, 70)),
            amplitude=float(rng.uniform(0, 0.5)),
            colors=tuple(tuple(int(v) for v in rng.integers(10, 150, 3)) for _ in range(int(rng.integers(1, 5)))),
            edge_blur_sigma=float(rng.uniform(0, 3)),
        )
        image_id = f"SYN_{k:04d}"
        fileio.write_png(img_dir / f"{image_id}.png", synth.render(spec, k))
        rows.append((image_id, f"L{k // 2:04d}", dataset.CLASSES[k % 7]))
    meta = root / "meta.csv"
    fileio.write_csv(meta, ("image_id", "lesion_id", "dx"), rows)
    cal = root / "cal.json"
    fileio.write_json(cal, {"p6mm_px": 120.0})
    return root, img_dir, meta, cal


def test_criterion_10_performance(thousand_images):
    root, img_dir, meta, cal = thousand_images
    img = synth.render(synth.malignant_prototype(150), 3)
    score_lesion(img)  # warm-up
    times = []
    for _ in range(7):
        t0 = time.perf_counter()
        score_lesion(img, CalibrationParams(150), 3)
        times.append(time.perf_counter() - t0)
    per_score = float(np.median(times))

    digests, walls = [], []
    for run in range(2):
        out = root / f"labels{run}.csv"
        t0 = time.perf_counter()
        code = cli.run(["--quiet", "label-dataset", "--images", str(img_dir), "--metadata", str(meta),
                        "--calibration", str(cal), "--out", str(out)])
        walls.append(time.perf_counter() - t0)
        assert code == 0
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    n_rows = len(fileio.read_csv(root / "labels0.csv"))
    ok = per_score < 0.100 and max(walls) < 120.0 and digests[0] == digests[1] and n_rows == 1000
    report(
        10,
        ok,
        f"score_lesion median {per_score * 1e3:.1f} ms (<100); label-dataset x1000 "
        f"{walls[0]:.1f}s/{walls[1]:.1f}s (<120s, jobs={dataset.default_jobs()}); "
        f"hashes equal={digests[0] == digests[1]}",
    )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
