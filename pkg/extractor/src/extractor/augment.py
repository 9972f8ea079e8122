"""Image transforms.

The original pass is deterministic (resize to the target square, tensor,
ImageNet pixel normalization). View passes prepend the enabled random
augmentations; determinism across runs comes from seeding torch's global
RNG once per view pass (see extract.py), so identical seed + recipe gives
bitwise-identical views.
"""

from torchvision import transforms

from .job import AugmentationRecipe

_NORMALIZE = transforms.Normalize(mean=[0.485, 0.456, 0.406],
                                  std=[0.229, 0.224, 0.225])


def base_transform(image_size: int) -> transforms.Compose:
    return transforms.Compose([
        transforms.Resize((image_size, image_size)),
        transforms.ToTensor(),
        _NORMALIZE,
    ])


def view_transform(image_size: int, recipe: AugmentationRecipe) -> transforms.Compose:
    ops = []
    if recipe.crop:
        ops.append(transforms.RandomResizedCrop(image_size, scale=(0.5, 1.0),
                                                antialias=True))
    else:
        ops.append(transforms.Resize((image_size, image_size)))
    if recipe.flip:
        ops.append(transforms.RandomHorizontalFlip(p=0.5))
    if recipe.jitter:
        ops.append(transforms.ColorJitter(0.4, 0.4, 0.4, 0.1))
    if recipe.grayscale:
        ops.append(transforms.RandomGrayscale(p=0.2))
    if recipe.blur:
        kernel = max(3, (image_size // 20) * 2 + 1)
        ops.append(transforms.GaussianBlur(kernel, sigma=(0.1, 2.0)))
    ops += [transforms.ToTensor(), _NORMALIZE]
    return transforms.Compose(ops)
