import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcascade import dataset, features
from semcascade.dataset import DetectionLabel, LabeledImage, SyntheticSpec
from semcascade.errors import ContractError, EmptyClassError, InvalidSpecError, MalformedInputError
from semcascade.features import Color


def _random_images(n, seed=0):
    rng = np.random.default_rng(seed)
    return [LabeledImage(rng.integers(0, 256, (32, 32, 3)).astype(np.uint8), int(rng.integers(0, 10)))
            for _ in range(n)]


def test_cifar_round_trip(tmp_path):
    images = _random_images(5)
    blob = dataset.serialize_cifar10(images)
    assert len(blob) == 5 * 3073
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(blob)
    loaded = dataset.load_cifar10(path)
    assert [im.class_id for im in loaded] == [im.class_id for im in images]
    for a, b in zip(images, loaded):
        assert np.array_equal(a.pixels, b.pixels)


def test_cifar_channel_planes():
    # record layout: label, 1024 red, 1024 green, 1024 blue, row-major
    rec = bytearray([3]) + bytes([200]) * 1024 + bytes([100]) * 1024 + bytes([0]) * 1024
    (im,) = dataset.parse_cifar10(bytes(rec))
    assert im.class_id == 3
    assert im.pixels[5, 7].tolist() == [200, 100, 0]


def test_cifar_truncated_record():
    with pytest.raises(MalformedInputError):
        dataset.parse_cifar10(b"\x00" * 3072)


def test_cifar_bad_label():
    with pytest.raises(MalformedInputError):
        dataset.parse_cifar10(bytes([10]) + b"\x00" * 3072)


def test_cifar_dir(tmp_path):
    sub = tmp_path / "cifar-10-batches-bin"
    sub.mkdir()
    (sub / "data_batch_1.bin").write_bytes(dataset.serialize_cifar10(_random_images(4, 1)))
    (sub / "test_batch.bin").write_bytes(dataset.serialize_cifar10(_random_images(3, 2)))
    assert len(dataset.load_cifar10_dir(tmp_path)) == 7
    assert len(dataset.load_cifar10_dir(tmp_path, max_images=5)) == 5
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(MalformedInputError):
        dataset.load_cifar10_dir(empty)


def test_labeled_image_validation():
    with pytest.raises(ContractError):
        LabeledImage(np.zeros((4, 4, 3), dtype=np.uint8), 0)
    with pytest.raises(ContractError):
        LabeledImage(np.zeros((8, 8)), 0)
    with pytest.raises(ContractError):
        LabeledImage(np.full((8, 8, 3), 300), 0)
    im = LabeledImage(np.zeros((8, 8, 3)), 0)
    assert im.pixels.dtype == np.uint8 and not im.pixels.flags.writeable


def test_synthetic_is_deterministic():
    spec = SyntheticSpec(count=20, palette=("red", "green"), orientations=(0, 90), seed=7)
    a, b = dataset.generate_synthetic(spec), dataset.generate_synthetic(spec)
    assert all(np.array_equal(x.pixels, y.pixels) and x.class_id == y.class_id for x, y in zip(a, b))
    c = dataset.generate_synthetic(SyntheticSpec(count=20, palette=("red", "green"),
                                                 orientations=(0, 90), seed=8))
    assert not all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, c))


def test_synthetic_class_ids_follow_product_order():
    spec = SyntheticSpec(count=1, palette=("red", "green"), orientations=(0, 90))
    assert spec.classes == [(Color.RED, 0.9, 0.0), (Color.RED, 0.9, 90.0),
                            (Color.GREEN, 0.9, 0.0), (Color.GREEN, 0.9, 90.0)]


def test_red_images_are_at_least_30_percent_red():
    images = dataset.generate_synthetic(SyntheticSpec(count=40, palette=("red",), seed=3))
    for im in images:
        frac = features.extract_color_feature(im, Color.RED, grid=1).values[0]
        assert frac >= 0.30


def test_grating_energy_follows_orientation():
    spec = SyntheticSpec(count=40, palette=("red",), orientations=(0, 90), seed=2)
    p0, p90 = (features.GaborParams.from_wavelength(spec.grating_wavelength, t) for t in (0, 90))
    for im in dataset.generate_synthetic(spec):
        e0 = features.extract_texture_feature(im, p0).values.mean()
        e90 = features.extract_texture_feature(im, p90).values.mean()
        assert (e0 > e90) == (im.class_id == 0)


def test_speckle_fill_controls_density():
    full = (0.97, 1.0)
    dense = dataset.generate_synthetic(SyntheticSpec(count=10, shape_size=full, fill=1.0, seed=1))
    half = dataset.generate_synthetic(SyntheticSpec(count=10, shape_size=full, fill=0.5, seed=1))
    red = lambda im: features.extract_color_feature(im, Color.RED, grid=1).values[0]
    assert min(map(red, dense)) > 0.9
    assert all(0.4 < red(im) < 0.7 for im in half)


def test_synthetic_spec_errors():
    with pytest.raises(InvalidSpecError):
        dataset.generate_synthetic(SyntheticSpec(count=3, size=4))
    with pytest.raises(InvalidSpecError):
        SyntheticSpec(count=3, palette=("chartreuse",))
    with pytest.raises(InvalidSpecError):
        SyntheticSpec(count=3, fill=0.0)


def test_synthetic_spec_file(tmp_path):
    path = tmp_path / "spec.cfg"
    path.write_text("count = 6\npalette = red, blue\norientations = 0, 45\nseed = 9\n# comment\n")
    spec = SyntheticSpec.from_file(path)
    assert spec.count == 6 and spec.palette == (Color.RED, Color.BLUE)
    assert spec.orientations == (0.0, 45.0) and spec.seed == 9
    with pytest.raises(InvalidSpecError):
        SyntheticSpec.from_kv({"palette": "red"})


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 1000))
def test_test_set_hits_requested_clutter(fraction, seed):
    images = _random_images(60, seed)
    task = dataset.make_detection_task(images, target_class=images[0].class_id,
                                       clutter_fraction=fraction, seed=seed, test_size=40)
    assert len(task.test_set) == 40
    n_clutter = min(max(round(fraction * 40), 1), 39)
    assert abs(task.measured_clutter_fraction - n_clutter / 40) < 1e-12
    assert all(im.detection_label is not None for im in task.train_set + task.test_set)


def test_train_split_independent_of_clutter_fraction():
    images = _random_images(80, 5)
    a = dataset.make_detection_task(images, 3, 0.6, seed=1, test_size=30)
    b = dataset.make_detection_task(images, 3, 0.9, seed=1, test_size=30)
    assert [id(im.pixels) for im in a.train_set] == [id(im.pixels) for im in b.train_set]


def test_task_errors():
    images = _random_images(30, 1)
    with pytest.raises(EmptyClassError):
        dataset.make_detection_task(images, target_class=42, clutter_fraction=0.5, seed=0)
    with pytest.raises(ContractError):
        dataset.make_detection_task(images, images[0].class_id, clutter_fraction=0.99, seed=0)
    same = [im for im in images if im.class_id == images[0].class_id]
    with pytest.raises(EmptyClassError):
        dataset.make_detection_task(same, images[0].class_id, 0.5, seed=0)


def test_holdout_split_is_stratified():
    labeled = [im.with_label(DetectionLabel.OBJECT if i % 4 == 0 else DetectionLabel.CLUTTER)
               for i, im in enumerate(_random_images(100, 2))]
    fit, val = dataset.holdout_split(labeled, 0.2, 0)
    assert len(val) == 20 and sum(im.is_object for im in val) == 5


@pytest.mark.parametrize("name", dataset.PROFILE_NAMES)
def test_profiles_render(name):
    prof = dataset.synthetic_profile(name, count=40, seed=0)
    images = dataset.render_profile(prof)
    assert 35 <= len(images) <= 45
    ids = {im.class_id for im in images}
    assert prof.target_class in ids and len(ids) > 1


def test_unknown_profile():
    with pytest.raises(InvalidSpecError):
        dataset.synthetic_profile("nope")
