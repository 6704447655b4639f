"""Smoke test for the Python bindings: a miniature poison -> train ->
detect -> neutralize round trip plus the numeric helpers."""

import _poisonguard as pg


def main():
    shape = pg.Shape(16, 16, 1)
    clean = pg.make_synthetic_image_task(6, shape, 100, 10.0, 1)
    spec = pg.make_dot_poison(shape, 4, 4, [255.0], 0, 5, 0.1)
    mask = list(spec.mask)
    pattern = list(spec.pattern)
    for dy in range(4):
        for dx in range(4):
            i = (4 + dy) * 16 + (4 + dx)
            mask[i] = 0.6
            pattern[i] = 255.0
    spec.mask = mask
    spec.pattern = pattern
    data = pg.poison_dataset(clean, spec, 2)
    assert data.poisoned_flags.count(1) == 10

    net = pg.make_mlp([256, 64, 6], 3)
    tc = pg.TrainConfig()
    tc.learning_rate = 1e-5
    tc.epochs = 5
    tc.seed = 4
    history = pg.train(net, data, tc)
    assert history[-1] < history[0]
    assert pg.evaluate(net, data).accuracy > 0.5

    ids = data.indices_of_class(0)
    gm = pg.gradient_matrix(net, data, ids, 0)
    sig = pg.extract_signal(gm)
    scores = pg.principal_scores(gm, sig)
    assert len(scores) == len(ids)

    fit = pg.gap_split_fit(scores)
    assert len(fit.assignments) == len(scores)
    w2 = pg.wasserstein2_gaussians(fit.components[0], fit.components[1])
    assert w2 >= 0.0

    rep = pg.detect_poison_classes(net, data, pg.DetectConfig())
    assert isinstance(rep.flagged, bool)

    nc = pg.NeutralizeConfig()
    nc.seed = 4
    res = pg.neutralize(net, data, nc, clean, None)
    assert res.clean_after.accuracy >= 0.0

    print("python smoke ok")


if __name__ == "__main__":
    main()
