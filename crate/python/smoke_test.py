"""Exercise the diffprobe extension end to end on a planted dataset.

    pip install --no-build-isolation -e crates/py
    python python/smoke_test.py
"""

import math
import os
import tempfile

import diffprobe


def main():
    acts, labels = diffprobe.plant_direction_set(
        n=120, d=16, layers=3, positions=2, target_cell=(1, -2), snr=6.0, seed=3
    )
    print(acts)
    assert len(acts) == 120 and acts.layer_ids == [0, 1, 2]
    assert acts.header()["P"] == 2

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "set.actv")
        acts.write(path)
        again = diffprobe.ActivationSet.read(path)
        assert again.to_bytes() == acts.to_bytes()
    try:
        diffprobe.ActivationSet.from_bytes(b"NOPE" + acts.to_bytes()[4:])
    except diffprobe.DiffprobeError as e:
        assert "not an ACTV1 file" in str(e)
    else:
        raise AssertionError("bad magic accepted")

    grid = diffprobe.sweep_grid(acts, labels)
    layer, position, score = grid.best()
    print(f"best cell ({layer}, {position}) mean spearman {score:.4f}")
    assert (layer, position) == (1, -2) and score > 0.9
    assert grid.to_csv().startswith("layer,position,fold1")

    rows = acts.slice(layer, position)
    y = labels.ratings_for(acts.problem_ids)
    cv = diffprobe.cross_validate(rows, y, k=5, seed=0)
    assert len(cv["fold_scores"]) == 5

    probe = diffprobe.fit_ridge(rows, y, 1.0)
    preds = probe.predict(rows)
    assert diffprobe.spearman(preds, y) > 0.9

    vec = diffprobe.build_steering_vector(grid.weights(layer, position), rows, acts.model_id, "synthetic")
    assert abs(sum(v * v for v in vec.direction) - 1.0) < 1e-12
    off = vec.offset(2.0)
    assert all(abs(o - 2.0 * vec.sigma * d) < 1e-12 for o, d in zip(off, vec.direction))

    sizes = [10 ** (8 + 0.5 * i) for i in range(7)]
    perf = [1 - 2.0 * n ** -0.05 for n in sizes]
    fit = diffprobe.fit_power_law(sizes, perf)
    assert abs(fit["alpha"] - 0.05) < 1e-9 and abs(fit["C"] - 2.0) < 1e-6
    assert abs(diffprobe.predict_perf(fit["C"], fit["alpha"], sizes[3]) - perf[3]) < 1e-9

    steps = [float(s) for s in range(10)]
    scores = [0.8 - 0.01 * s + 0.02 * math.sin(s) for s in steps]
    pass1 = [2.0 * p + 0.01 * s for p, s in zip(scores, steps)]
    rep = diffprobe.residual_slope(scores, pass1, steps)
    assert abs(rep["beta"] - 2.0) < 1e-9
    print("residual:", rep["summary"])
    print("smoke test ok")


if __name__ == "__main__":
    main()
