"""Shared phantom scene builders for the test suite."""

from __future__ import annotations

from limis.backends import ORGAN_HU
from limis.core import ORGAN_LABELS
from limis.volume_io import PhantomScene, PhantomShape


def single_organ_scene(label: str, *, kind: str = "ellipse",
                       center=(32.0, 30.0), size=(12.0, 10.0),
                       dims=(64, 64, 1), hu: float | None = None,
                       sigma: float = 0.0, seed: int = 0,
                       background: float = -1000.0) -> PhantomScene:
    return PhantomScene(
        dims=dims,
        background_hu=background,
        seed=seed,
        shapes=(
            PhantomShape(kind, label, center=center, size=size,
                         mean_hu=ORGAN_HU[label] if hu is None else hu,
                         noise_sigma=sigma),
        ),
    )


def two_organ_scene(seed: int = 0) -> PhantomScene:
    """Liver ellipse and a clearly separated spleen rectangle."""
    return PhantomScene(
        dims=(96, 96, 1),
        seed=seed,
        shapes=(
            PhantomShape("ellipse", "liver", center=(30, 34), size=(14, 11),
                         mean_hu=ORGAN_HU["liver"]),
            PhantomShape("rectangle", "spleen", center=(72, 62), size=(16, 12),
                         mean_hu=ORGAN_HU["spleen"]),
        ),
    )


def lobed_scene(label: str = "liver", lobe_hu_offset: float = 30.0,
                seed: int = 0) -> PhantomScene:
    """Main organ body plus an adjacent same-label lobe whose HU sits outside
    the detector band but within region-growing tolerance. The detector box
    covers only the main body, so enlarging the box recovers more lobe."""
    mu = ORGAN_HU[label]
    return PhantomScene(
        dims=(96, 96, 1),
        seed=seed,
        shapes=(
            PhantomShape("rectangle", label, center=(40, 48), size=(24, 24), mean_hu=mu),
            # abuts the main body on the right: x in [52, 76)
            PhantomShape("rectangle", label, center=(64, 48), size=(24, 16),
                         mean_hu=mu + lobe_hu_offset),
        ),
    )


def disconnected_lobes_scene(label: str = "liver", seed: int = 0) -> PhantomScene:
    """Two same-label, same-HU lobes separated by background."""
    mu = ORGAN_HU[label]
    return PhantomScene(
        dims=(96, 96, 1),
        seed=seed,
        shapes=(
            PhantomShape("rectangle", label, center=(30, 48), size=(20, 20), mean_hu=mu),
            PhantomShape("rectangle", label, center=(66, 48), size=(16, 16), mean_hu=mu),
        ),
    )


def low_hu_scene(label: str = "liver", hu: float = -400.0, seed: int = 0) -> PhantomScene:
    """Organ painted far below its canonical HU (fails band detection and
    drowns in a soft-tissue window, which clamps it onto the background)."""
    return single_organ_scene(label, center=(44, 44), size=(16, 13),
                              dims=(96, 96, 1), hu=hu, seed=seed)


def _organ_cycle():
    while True:
        yield from ORGAN_LABELS


def acceptance_corpus(n: int = 30) -> list[tuple[PhantomScene, str]]:
    """Deterministic noiseless scenes cycling through all organ labels with
    varying geometry; one target label per scene."""
    labels = _organ_cycle()
    out = []
    for i in range(n):
        label = next(labels)
        kind = "ellipse" if i % 2 == 0 else "rectangle"
        cx = 24 + (i * 7) % 40
        cy = 26 + (i * 11) % 36
        a = 8 + (i % 5) * 2
        b = 7 + (i % 4) * 2
        scene = single_organ_scene(
            label, kind=kind, center=(float(cx), float(cy)),
            size=(float(a), float(b)), dims=(96, 96, 1), seed=1000 + i,
        )
        out.append((scene, label))
    return out
