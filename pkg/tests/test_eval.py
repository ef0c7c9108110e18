import shutil

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from trimodal import archive
from trimodal.dataprep import DatasetArchive
from trimodal.encoders import EncoderConfig, build_model
from trimodal.eval import (
    FeatureTable,
    extract_feature_table,
    few_shot_probe,
    linear_probe,
    permutation_chance,
    segmentation_metrics,
)
from trimodal.eval.features import backbone_features, pick_views
from trimodal.eval.segmentation import (
    SegmentationRecord,
    category_parts,
    make_part_dataset,
    part_segmentation,
    select_fraction,
)


def table(features, labels, modality="point"):
    return FeatureTable([f"o{i}" for i in range(len(labels))], np.asarray(labels), modality, 1, np.asarray(features, float))


def blobs(n_per, seed, sep=4.0, dim=5):
    g = np.random.default_rng(seed)
    labels = np.repeat([0, 1, 2], n_per)
    centers = np.eye(3, dim) * sep
    return centers[labels] + g.normal(size=(len(labels), dim)), labels


@pytest.fixture(scope="module")
def model():
    return build_model(EncoderConfig(width=0.125, k=4, faces=64), seed=0)


# --- probes -----------------------------------------------------------------


def test_separable_probe():
    x = np.array([[-2.0, 0.3], [-1.5, -0.2], [-3.0, 1.0], [2.0, 0.1], [1.2, -1.0], [2.5, 0.4]])
    y = np.array([0, 0, 0, 1, 1, 1])
    assert linear_probe(table(x, y), table(x * 1.1, y)) == 1.0


def test_shuffled_labels_near_chance():
    g = np.random.default_rng(0)
    xtr, ytr = blobs(100, 1)
    xte, yte = blobs(100, 2)
    acc = linear_probe(table(xtr, g.permutation(ytr)), table(xte, yte))
    se = np.sqrt((1 / 3) * (2 / 3) / 300)
    assert abs(acc - 1 / 3) <= 3 * se


def test_duplication_invariance_on_separable_data():
    # with every slack at zero the hinge solution does not depend on C, so doubling rows changes nothing
    xtr, ytr = blobs(20, 3, sep=12.0)
    xte, _ = blobs(50, 4, sep=3.0)
    from trimodal.eval.probe import fit_svm

    once = fit_svm(xtr, ytr)
    twice = fit_svm(np.vstack([xtr, xtr]), np.concatenate([ytr, ytr]))
    np.testing.assert_array_equal(once.predict(xte), twice.predict(xte))


def test_probe_errors():
    x, y = blobs(5, 0)
    with pytest.raises(ValueError):
        linear_probe(table(x, y), table(x, y, "mesh"))
    with pytest.raises(ValueError):
        linear_probe(table(x[y < 2], y[y < 2]), table(x, y))


def test_permutation_chance_reproducible():
    xtr, ytr = blobs(20, 5)
    xte, yte = blobs(20, 6)
    a = permutation_chance(table(xtr, ytr), table(xte, yte), n_perm=5, seed=1)
    assert a == permutation_chance(table(xtr, ytr), table(xte, yte), n_perm=5, seed=1)
    assert 0 <= a[0] <= 1


def test_few_shot_contract():
    xtr, ytr = blobs(20, 7, sep=2.0)
    xte, yte = blobs(30, 8, sep=2.0)
    tr, te = table(xtr, ytr), table(xte, yte)
    full = few_shot_probe(tr, te, shots=20, rounds=1, seed=0)
    assert full["mean"] == pytest.approx(linear_probe(tr, te))
    a = few_shot_probe(tr, te, shots=5, rounds=2, seed=3)
    b = few_shot_probe(tr, te, shots=5, rounds=2, seed=3)
    assert a["rounds"] == b["rounds"] and len(a["rounds"]) == 2
    assert a["std"] == pytest.approx(np.std(a["rounds"]))
    with pytest.raises(ValueError):
        few_shot_probe(tr, te, shots=21)


# --- features ---------------------------------------------------------------


def test_feature_table_shapes_and_persistence(model, tiny_archive, tmp_path):
    t = extract_feature_table(model, tiny_archive, "train", "point")
    ds = DatasetArchive(tiny_archive)
    assert t.ids == ds.ids("train") and t.features.shape == (len(t.ids), model.point.out_dim)
    assert np.isfinite(t.features).all()
    for mod in ("mesh", "image"):
        assert extract_feature_table(model, tiny_archive, "test", mod, views=2).features.shape[0] == len(ds.ids("test"))
    t.save(tmp_path)
    back = FeatureTable.load(tmp_path)
    assert back.ids == t.ids and back.features.tobytes() == t.features.tobytes()
    np.testing.assert_array_equal(back.labels, t.labels)


def test_single_view_mean_is_that_view(model, tiny_archive):
    ds = DatasetArchive(tiny_archive)
    oid = ds.ids()[0]
    (v,) = pick_views(oid, ds.num_views(oid), 1, seed=0)
    with torch.no_grad():
        model.eval()
        direct = model.encode_image(torch.as_tensor(ds.tensor(oid, "views")[v : v + 1])).double().numpy()
    got = backbone_features(model, ds, [oid], "image", views=1, aggregate="mean")
    np.testing.assert_allclose(got, direct, atol=1e-6)


def test_identical_views_and_max_symmetry(model, tiny_archive, tmp_path):
    root = tmp_path / "dup"
    shutil.copytree(tiny_archive, root)
    ds = DatasetArchive(root)
    oid = ds.ids()[0]
    raw = archive.load_tensor(root / ds.records[0]["blobs"]["views"])
    raw[:] = raw[1]
    archive.save_tensor(root / ds.records[0]["blobs"]["views"], raw)
    ds = DatasetArchive(root)
    one = backbone_features(model, ds, [oid], "image", views=1)
    two = backbone_features(model, ds, [oid], "image", views=2, aggregate="mean")
    np.testing.assert_allclose(two, one, atol=1e-5)
    # max over views does not depend on their order
    views = torch.as_tensor(DatasetArchive(tiny_archive).tensor(oid, "views"))
    with torch.no_grad():
        f = model.encode_image(views)
        f_rev = model.encode_image(views.flip(0))
    assert torch.allclose(f.max(0).values, f_rev.max(0).values, atol=1e-6)


def test_too_many_views(model, tiny_archive):
    with pytest.raises(ValueError):
        extract_feature_table(model, tiny_archive, "test", "image", views=99)


def test_feature_extraction_deterministic(model, tiny_archive):
    a = extract_feature_table(model, tiny_archive, "test", "image", views=2, seed=4)
    b = extract_feature_table(model, tiny_archive, "test", "image", views=2, seed=4)
    assert a.features.tobytes() == b.features.tobytes()


# --- segmentation metrics ---------------------------------------------------

CMAP = {"cat": [0, 1], "dog": [2, 3, 4]}


def test_metrics_examples():
    assert segmentation_metrics([[0, 1, 1]], [[0, 1, 1]], ["cat"], CMAP) == {"overall_acc": 1.0, "class_miou": 1.0, "instance_miou": 1.0}
    assert segmentation_metrics([[0, 0]], [[0, 1]], ["cat"], CMAP)["overall_acc"] == 0.5
    m = segmentation_metrics([[0, 1, 1, 1]], [[0, 0, 1, 1]], ["cat"], CMAP)
    assert m["instance_miou"] == pytest.approx(7 / 12)
    assert m["class_miou"] == pytest.approx(7 / 12)
    assert m["overall_acc"] == 0.75
    assert segmentation_metrics([[3, 3, 3]], [[3, 3, 3]], ["dog"], CMAP)["instance_miou"] == 1.0


def test_class_miou_is_pooled():
    # part 0 pooled over both shapes: inter 1+2, union 2+2
    m = segmentation_metrics([[0, 1], [0, 0]], [[0, 0], [0, 0]], ["cat", "cat"], CMAP)
    assert m["class_miou"] == pytest.approx((3 / 4 + 0 / 1) / 2)
    assert m["instance_miou"] == pytest.approx(((1 / 2 + 0) / 2 + 1.0) / 2)


def test_metrics_errors():
    with pytest.raises(ValueError):
        segmentation_metrics([[2, 0]], [[0, 0]], ["cat"], CMAP)
    with pytest.raises(ValueError):
        segmentation_metrics([[0]], [[0, 0]], ["cat"], CMAP)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_metrics_bounded_and_relabel_symmetric(seed):
    g = np.random.default_rng(seed)
    cats = g.choice(["cat", "dog"], size=4).tolist()
    truth = [g.choice(CMAP[c], size=12) for c in cats]
    pred = [g.choice(CMAP[c], size=12) for c in cats]
    m = segmentation_metrics(pred, truth, cats, CMAP)
    assert all(0 <= m[k] <= 1 for k in m)
    relabel = {0: 1, 1: 0, 2: 4, 3: 2, 4: 3}
    swap = lambda arrs: [np.vectorize(relabel.get)(a) for a in arrs]  # noqa: E731
    m2 = segmentation_metrics(swap(pred), swap(truth), cats, CMAP)
    for k in m:
        assert m2[k] == pytest.approx(m[k])


# --- part segmentation plumbing ------------------------------------------------


def test_part_dataset_labels_in_category():
    recs = make_part_dataset(per_category=2, num_points=64, seed=0)
    cmap = category_parts({r.category for r in recs})
    assert len(recs) == 6
    for r in recs:
        assert r.points.shape == (64, 3) and r.labels.shape == (64,)
        assert set(np.unique(r.labels)) <= set(cmap[r.category])
    with pytest.raises(ValueError):
        SegmentationRecord(np.zeros((3, 3)), np.zeros(2), "cone")


def test_select_fraction():
    recs = make_part_dataset(per_category=10, num_points=16, seed=0)
    sub = select_fraction(recs, 0.2, seed=1)
    assert len(sub) == 6 and sorted({r.category for r in sub}) == ["cone", "cylinder", "lamp"]
    assert [id(r) for r in sub] == [id(r) for r in select_fraction(recs, 0.2, seed=1)]
    with pytest.raises(ValueError):
        select_fraction(recs, 0.01)


def test_part_segmentation_modes_run(model):
    recs = make_part_dataset(per_category=4, num_points=64, seed=0)
    test = make_part_dataset(per_category=2, num_points=64, seed=1)
    before = [p.detach().clone() for p in model.point.parameters()]
    for mode in ("frozen", "unfrozen", "scratch"):
        m = part_segmentation(model.point, recs, test, 0.5, mode, seed=0, steps=3, hidden=(16, 16, 8))
        assert all(0 <= m[k] <= 1 for k in ("overall_acc", "class_miou", "instance_miou"))
        assert m["train_shapes"] == 6
    # the caller's backbone is never modified
    for p, q in zip(model.point.parameters(), before):
        assert torch.equal(p.detach(), q)
    with pytest.raises(ValueError):
        part_segmentation(model.point, recs, test, 0.5, "partial")
