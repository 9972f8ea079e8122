import numpy as np
from PIL import Image


def write_image_folder(root, classes=("cat", "dog", "owl"), per_class=3,
                       size=64, seed=0):
    rng = np.random.default_rng(seed)
    for c in classes:
        (root / c).mkdir(parents=True)
        for i in range(per_class):
            pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
            Image.fromarray(pixels).save(root / c / f"img_{i}.png")
    return root
