"""Image ingestion and binary detection-task construction."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import features
from .errors import EmptyClassError, InvalidSpecError, MalformedInputError, ContractError
from .kvconfig import as_float, as_float_list, as_int, as_str_list, read_kv

CIFAR_RECORD = 3073
CIFAR_SIDE = 32
CIFAR_CLASSES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)


class DetectionLabel(enum.Enum):
    OBJECT = "object"
    CLUTTER = "clutter"


@dataclass(frozen=True, eq=False)
class LabeledImage:
    pixels: np.ndarray
    class_id: int
    detection_label: DetectionLabel | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ContractError(f"pixels must be HxWx3, got {px.shape}")
        if px.shape[0] < 8 or px.shape[1] < 8:
            raise ContractError("images must be at least 8x8")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ContractError("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]

    @property
    def is_object(self) -> bool:
        return self.detection_label is DetectionLabel.OBJECT

    def with_label(self, label: DetectionLabel) -> "LabeledImage":
        return replace(self, detection_label=label)


@dataclass(frozen=True)
class DetectionTask:
    train_set: list
    test_set: list
    target_class: int
    clutter_fraction: float
    seed: int

    @property
    def measured_clutter_fraction(self) -> float:
        return clutter_fraction_of(self.test_set)


def clutter_fraction_of(images) -> float:
    n = len(images)
    return sum(not im.is_object for im in images) / n if n else 0.0


# ------------------------------------------------------------------ CIFAR-10


def parse_cifar10(data: bytes) -> list[LabeledImage]:
    if len(data) % CIFAR_RECORD != 0:
        raise MalformedInputError(
            f"CIFAR-10 batch size {len(data)} is not a multiple of {CIFAR_RECORD}"
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0]
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise MalformedInputError(f"record {bad} has label byte {labels[bad]} > 9")
    planes = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE).transpose(0, 2, 3, 1)
    return [LabeledImage(planes[i], int(labels[i])) for i in range(len(records))]


def load_cifar10(path) -> list[LabeledImage]:
    """Read one CIFAR-10 binary batch file."""
    return parse_cifar10(Path(path).read_bytes())


def serialize_cifar10(images) -> bytes:
    """Inverse of :func:`parse_cifar10`."""
    out = bytearray()
    for im in images:
        if im.shape != (CIFAR_SIDE, CIFAR_SIDE):
            raise ContractError("CIFAR-10 records are 32x32")
        out.append(im.class_id)
        out.extend(im.pixels.transpose(2, 0, 1).tobytes())
    return bytes(out)


def load_cifar10_dir(directory, max_images: int | None = None) -> list[LabeledImage]:
    """Load ``data_batch_*.bin`` and ``test_batch.bin`` from a directory."""
    directory = Path(directory)
    candidates = sorted(directory.glob("data_batch_*.bin")) + sorted(directory.glob("test_batch.bin"))
    if not candidates:
        sub = directory / "cifar-10-batches-bin"
        if sub.is_dir():
            return load_cifar10_dir(sub, max_images)
        raise MalformedInputError(f"no CIFAR-10 batch files under {directory}")
    images = []
    for path in candidates:
        images.extend(load_cifar10(path))
        if max_images is not None and len(images) >= max_images:
            return images[:max_images]
    return images


# ----------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for :func:`generate_synthetic`.

    Classes are the product ``palette x values x orientations`` in that order
    (an empty orientation list means plain noise backgrounds); each image draws
    its class uniformly.
    """

    count: int
    size: int = 32
    palette: tuple = ("red",)
    orientations: tuple = ()
    seed: int = 0
    values: tuple = (0.9,)
    wavelength: float | None = None
    shape_size: tuple = (0.55, 0.75)
    fill: float = 1.0  # probability that a shape pixel is painted

    def __post_init__(self):
        if not 0.0 < float(self.fill) <= 1.0:
            raise InvalidSpecError("fill must lie in (0, 1]")
        object.__setattr__(self, "fill", float(self.fill))
        object.__setattr__(self, "palette", tuple(features.parse_color(c) for c in self.palette))
        object.__setattr__(self, "orientations", tuple(float(o) for o in self.orientations))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "shape_size", tuple(float(v) for v in self.shape_size))

    @property
    def grating_wavelength(self) -> float:
        if self.wavelength is not None:
            return float(self.wavelength)
        return 32.0 * math.sqrt(2.0) * self.size / 256.0

    @property
    def classes(self) -> list[tuple]:
        orients = self.orientations or (None,)
        return list(itertools.product(self.palette, self.values, orients))

    @classmethod
    def from_kv(cls, kv: dict) -> "SyntheticSpec":
        if "count" not in kv:
            raise InvalidSpecError("synthetic spec needs a count")
        args = {"count": as_int(kv["count"], "count")}
        if "size" in kv:
            args["size"] = as_int(kv["size"], "size")
        if "seed" in kv:
            args["seed"] = as_int(kv["seed"], "seed")
        if "palette" in kv:
            args["palette"] = tuple(as_str_list(kv["palette"]))
        if "orientations" in kv:
            args["orientations"] = tuple(as_float_list(kv["orientations"]))
        if "values" in kv:
            args["values"] = tuple(as_float_list(kv["values"]))
        if "wavelength" in kv:
            args["wavelength"] = as_float(kv["wavelength"], "wavelength")
        if "shape_size" in kv:
            args["shape_size"] = tuple(as_float_list(kv["shape_size"]))
        if "fill" in kv:
            args["fill"] = as_float(kv["fill"], "fill")
        return cls(**args)

    @classmethod
    def from_file(cls, path) -> "SyntheticSpec":
        return cls.from_kv(read_kv(path))


def _hsv_to_rgb_array(h, s, v) -> np.ndarray:
    h6 = (h / 60.0) % 6.0
    i = np.floor(h6).astype(int)
    f = h6 - i
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    choices = [
        np.stack([v, t, p], -1), np.stack([q, v, p], -1), np.stack([p, v, t], -1),
        np.stack([p, q, v], -1), np.stack([t, p, v], -1), np.stack([v, p, q], -1),
    ]
    out = np.zeros(h.shape + (3,))
    for k, c in enumerate(choices):
        out[i == k] = c[i == k]
    return out


def render_image(rng: np.random.Generator, spec: SyntheticSpec, color, value, orientation):
    n = spec.size
    y, x = np.mgrid[0:n, 0:n].astype(np.float64)
    hue = rng.uniform(0.0, 360.0, (n, n))
    sat = rng.uniform(0.25, 0.6, (n, n))
    if orientation is None:
        val = rng.uniform(0.3, 0.8, (n, n))
    else:
        theta = math.radians(orientation)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        wave = np.cos(2.0 * math.pi * (x * math.cos(theta) + y * math.sin(theta))
                      / spec.grating_wavelength + phase)
        val = 0.55 + 0.3 * wave + rng.uniform(-0.03, 0.03, (n, n))
    rgb = _hsv_to_rgb_array(hue, sat, val)
    lo, hi = spec.shape_size
    sh = min(n, math.ceil(rng.uniform(lo, hi) * n))
    sw = min(n, math.ceil(rng.uniform(lo, hi) * n))
    r0 = int(rng.integers(0, n - sh + 1))
    c0 = int(rng.integers(0, n - sw + 1))
    rgb = np.round(rgb * 255.0)
    if spec.fill >= 1.0:
        rgb[r0 : r0 + sh, c0 : c0 + sw] = features.color_rgb(color, value)
    else:
        patch = rgb[r0 : r0 + sh, c0 : c0 + sw]
        patch[rng.random((sh, sw)) < spec.fill] = features.color_rgb(color, value)
    return np.clip(rgb, 0, 255).astype(np.uint8)


def generate_synthetic(spec: SyntheticSpec) -> list[LabeledImage]:
    """Render solid rectangles over colored noise and optional oriented gratings."""
    if spec.size < 8:
        raise InvalidSpecError("image_size must be at least 8")
    if spec.count < 1:
        raise InvalidSpecError("count must be at least 1")
    if not spec.palette or not spec.values:
        raise InvalidSpecError("palette and values must be non-empty")
    rng = np.random.default_rng(spec.seed)
    classes = spec.classes
    out = []
    for _ in range(spec.count):
        cid = int(rng.integers(0, len(classes)))
        color, value, orientation = classes[cid]
        out.append(LabeledImage(render_image(rng, spec, color, value, orientation), cid))
    return out


def relabel(images, class_id: int) -> list[LabeledImage]:
    return [replace(im, class_id=class_id) for im in images]


# ------------------------------------------------------------ task building


def _stratified_split(images, labels, train_fraction: float, rng: np.random.Generator):
    train_idx, test_idx = [], []
    for flag in (True, False):
        idx = np.flatnonzero(labels == flag)
        idx = idx[rng.permutation(idx.size)]
        n_train = int(round(train_fraction * idx.size))
        if idx.size >= 2:
            n_train = min(max(n_train, 1), idx.size - 1)
        train_idx.extend(idx[:n_train].tolist())
        test_idx.extend(idx[n_train:].tolist())
    return sorted(train_idx), sorted(test_idx)


def _draw(pool: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if n <= pool.size:
        return rng.choice(pool, size=n, replace=False)
    return np.concatenate([rng.permutation(pool), rng.choice(pool, size=n - pool.size, replace=True)])


def make_detection_task(
    images,
    target_class: int,
    clutter_fraction: float,
    seed: int,
    train_fraction: float = 0.8,
    test_size: int | None = None,
) -> DetectionTask:
    """Label images object-vs-clutter, split, and resample the test set.

    The train/test split depends only on ``seed`` and ``train_fraction``, so
    tasks built at different clutter fractions share one training set. The
    test set has ``test_size`` items (default: the held-out pool size) with
    ``round(clutter_fraction * test_size)`` clutter; pools are sampled without
    replacement when large enough and topped up with replacement otherwise.
    """
    if not 0.05 <= clutter_fraction <= 0.95:
        raise ContractError("clutter_fraction must lie in [0.05, 0.95]")
    if not 0.0 < train_fraction < 1.0:
        raise ContractError("train_fraction must lie in (0, 1)")
    flags = np.array([im.class_id == target_class for im in images], dtype=bool)
    if not flags.any():
        raise EmptyClassError(f"no images of target class {target_class}")
    if flags.all():
        raise EmptyClassError("no clutter images besides the target class")
    labeled = [
        im.with_label(DetectionLabel.OBJECT if f else DetectionLabel.CLUTTER)
        for im, f in zip(images, flags)
    ]
    split_rng = np.random.default_rng([seed, 0])
    train_idx, held_idx = _stratified_split(labeled, flags, train_fraction, split_rng)
    held = np.array(held_idx)
    obj_pool = held[flags[held]]
    clu_pool = held[~flags[held]]
    if obj_pool.size == 0 or clu_pool.size == 0:
        raise EmptyClassError("held-out split lacks one of the labels")
    size = held.size if test_size is None else int(test_size)
    if size < 2:
        raise ContractError("test set needs at least two items")
    n_clutter = int(round(clutter_fraction * size))
    n_clutter = min(max(n_clutter, 1), size - 1)
    sample_rng = np.random.default_rng([seed, 1, size, n_clutter])
    picked = np.concatenate([_draw(clu_pool, n_clutter, sample_rng),
                             _draw(obj_pool, size - n_clutter, sample_rng)])
    picked = picked[sample_rng.permutation(picked.size)]
    return DetectionTask(
        train_set=[labeled[i] for i in train_idx],
        test_set=[labeled[i] for i in picked],
        target_class=target_class,
        clutter_fraction=clutter_fraction,
        seed=seed,
    )


def holdout_split(images, fraction: float, seed: int):
    """Stratified (fit, validation) split of already-labeled images."""
    flags = np.array([im.is_object for im in images], dtype=bool)
    rng = np.random.default_rng([seed, 2])
    fit_idx, val_idx = _stratified_split(images, flags, 1.0 - fraction, rng)
    return [images[i] for i in fit_idx], [images[i] for i in val_idx]


# ------------------------------------------------------- built-in corpora


@dataclass(frozen=True)
class SyntheticProfile:
    """A named synthetic corpus with its target class and search spaces."""

    name: str
    parts: tuple  # (SyntheticSpec, class_id or None to keep generated ids)
    target_class: int
    colors: tuple = ()
    use_texture: bool = False
    notes: str = ""


def _profile_parts(name: str, count: int, size: int, seed: int):
    spec = lambda n, **kw: SyntheticSpec(count=max(1, int(round(n))), size=size, **kw)
    if name == "color":
        # objects are uniformly red; clutter is any other hue
        return (
            (spec(count, palette=("red", "yellow", "green", "cyan", "blue", "purple"), seed=seed), None),
            0, ("red", "yellow", "green", "blue", "cyan", "purple"), False,
        )
    if name == "or-pair":
        return (
            (spec(count / 3, palette=("red", "yellow"), seed=seed), 0),
            (spec(2 * count / 3, palette=("green", "cyan", "blue", "purple"), seed=seed + 1), 1),
            0, ("red", "yellow", "green", "blue", "cyan", "purple"), False,
        )
    if name == "no-signal":
        # objects differ from clutter only by the brightness of the shape
        return (
            (spec(count, palette=("red",), values=(0.95, 0.45, 0.5, 0.55), seed=seed), None),
            0, ("red", "yellow", "green", "blue", "cyan", "purple"), False,
        )
    if name == "combo":
        # color rejects the green half, texture rejects the 90-degree half
        return (
            (spec(count, palette=("red", "green"), orientations=(0.0, 90.0), seed=seed), None),
            0, ("red", "green", "blue", "yellow"), True,
        )
    if name == "redundant":
        # texture separates the classes too, but only what color already rejects
        return (
            (spec(count / 2, palette=("red",), orientations=(0.0,), seed=seed), 0),
            (spec(count / 2, palette=("green",), orientations=(90.0,), seed=seed + 1), 1),
            0, ("red", "green", "blue", "yellow"), True,
        )
    if name == "band":
        # objects are speckled with red at medium density; clutter carries
        # sparse or dense speckle, so no single monotone score separates them
        full = (0.97, 1.0)
        return (
            (spec(count / 2, palette=("red",), shape_size=full, fill=0.5, seed=seed), 0),
            (spec(count / 4, palette=("red",), shape_size=full, fill=1.0, seed=seed + 1), 1),
            (spec(count / 4, palette=("red",), shape_size=full, fill=0.1, seed=seed + 2), 2),
            0, ("red",), False,
        )
    raise InvalidSpecError(f"unknown synthetic profile {name!r}")


PROFILE_NAMES = ("color", "or-pair", "no-signal", "combo", "redundant", "band")


def synthetic_profile(name: str, count: int = 2000, size: int = 32, seed: int = 0) -> SyntheticProfile:
    *parts, target, colors, texture = _profile_parts(name, count, size, seed)
    return SyntheticProfile(name, tuple(parts), target, tuple(colors), texture)


def render_profile(profile: SyntheticProfile) -> list[LabeledImage]:
    images = []
    for spec, cid in profile.parts:
        batch = generate_synthetic(spec)
        images.extend(batch if cid is None else relabel(batch, cid))
    return images
