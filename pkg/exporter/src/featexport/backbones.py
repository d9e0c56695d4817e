"""Catalog of supported backbones and where each one is tapped.

The published networks differ in what sits between the last convolution and
the classifier, so the exact flatten point is documented per entry instead
of assumed globally:

- resnet18, resnet50: output of the global average pool, flattened, i.e. the
  input the original ``fc`` layer would have seen (512 and 2048 wide).
- mobilenet_v3_small: the flatten between ``avgpool`` and the classifier
  MLP (576 wide).
- vgg16: the flatten after ``features`` and ``avgpool``, before the
  three-layer classifier (25088 wide).

In every case the classifier is replaced with an identity so a forward pass
yields the tapped activations directly.
"""

from dataclasses import dataclass
from typing import Callable

import torch
from torch import nn
from torchvision import models
from torchvision.transforms import functional as TF

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class Backbone:
    name: str
    width: int
    tap: str
    build: Callable[[bool], nn.Module]


def _resnet(ctor, weights_enum):
    def build(pretrained):
        net = ctor(weights=weights_enum.DEFAULT if pretrained else None)
        net.fc = nn.Identity()
        return net

    return build


def _classifier_tap(ctor, weights_enum):
    def build(pretrained):
        net = ctor(weights=weights_enum.DEFAULT if pretrained else None)
        net.classifier = nn.Identity()
        return net

    return build


CATALOG = {
    "resnet18": Backbone(
        "resnet18",
        512,
        "global average pool output, flattened (input of the original fc layer)",
        _resnet(models.resnet18, models.ResNet18_Weights),
    ),
    "resnet50": Backbone(
        "resnet50",
        2048,
        "global average pool output, flattened (input of the original fc layer)",
        _resnet(models.resnet50, models.ResNet50_Weights),
    ),
    "mobilenet_v3_small": Backbone(
        "mobilenet_v3_small",
        576,
        "flatten between avgpool and the classifier MLP",
        _classifier_tap(models.mobilenet_v3_small, models.MobileNet_V3_Small_Weights),
    ),
    "vgg16": Backbone(
        "vgg16",
        25088,
        "flatten after features and avgpool, before the classifier MLP",
        _classifier_tap(models.vgg16, models.VGG16_Weights),
    ),
}


def get_backbone(name: str) -> Backbone:
    try:
        return CATALOG[name]
    except KeyError:
        supported = ", ".join(sorted(CATALOG))
        raise ValueError(f"unknown backbone {name!r}; supported: {supported}") from None


def load_model(spec: Backbone, pretrained: bool) -> nn.Module:
    """Instantiate the tapped network in eval mode.

    Without pretrained weights the init is pinned to a fixed torch seed so
    two runs produce the same random backbone.
    """
    if not pretrained:
        torch.manual_seed(0)
    net = spec.build(pretrained)
    net.eval()
    return net


def preprocess(image) -> torch.Tensor:
    """Resize to 256 on the short side, center-crop 224, normalize.

    The standard published pipeline for every catalog entry; all four were
    trained with the same input statistics.
    """
    image = TF.resize(image, 256, antialias=True)
    image = TF.center_crop(image, 224)
    tensor = TF.to_tensor(image)
    return TF.normalize(tensor, IMAGENET_MEAN, IMAGENET_STD)
