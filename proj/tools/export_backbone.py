#!/usr/bin/env python3
"""Export a torchvision backbone as a TorchScript bundle for signflow.

The runtime adapter expects a scripted module whose forward returns
``(logits, features)`` where ``features`` is the last convolutional feature
map (the Grad-CAM probe layer). The classifier head is replaced so the output
dimension matches ``--classes``.

Usage:
    python tools/export_backbone.py mobilenet_v3 --classes 32 --out backbones/
    python tools/export_backbone.py resnet50 --classes 32 --out backbones/
    python tools/export_backbone.py efficientnet_b2 --classes 32 --out backbones/
"""

import argparse
import pathlib

import torch
import torch.nn as nn
import torchvision.models as tvm


class _WithFeatures(nn.Module):
    """Wraps (features -> pool -> head) so forward exposes the feature map."""

    def __init__(self, features: nn.Module, pool: nn.Module, head: nn.Module):
        super().__init__()
        self.features = features
        self.pool = pool
        self.head = head

    def forward(self, x):
        feats = self.features(x)
        pooled = torch.flatten(self.pool(feats), 1)
        return self.head(pooled), feats


def _resnet_features(model: nn.Module) -> nn.Module:
    return nn.Sequential(
        model.conv1, model.bn1, model.relu, model.maxpool,
        model.layer1, model.layer2, model.layer3, model.layer4,
    )


def build(name: str, num_classes: int, pretrained: bool) -> nn.Module:
    if name == "mobilenet_v3":
        weights = tvm.MobileNet_V3_Large_Weights.DEFAULT if pretrained else None
        m = tvm.mobilenet_v3_large(weights=weights)
        in_dim = m.classifier[0].in_features
        head = nn.Sequential(
            nn.Linear(in_dim, 1280), nn.Hardswish(), nn.Dropout(0.2),
            nn.Linear(1280, num_classes),
        )
        return _WithFeatures(m.features, nn.AdaptiveAvgPool2d(1), head)
    if name == "resnet50":
        weights = tvm.ResNet50_Weights.DEFAULT if pretrained else None
        m = tvm.resnet50(weights=weights)
        head = nn.Linear(m.fc.in_features, num_classes)
        return _WithFeatures(_resnet_features(m), nn.AdaptiveAvgPool2d(1), head)
    if name == "efficientnet_b2":
        weights = tvm.EfficientNet_B2_Weights.DEFAULT if pretrained else None
        m = tvm.efficientnet_b2(weights=weights)
        in_dim = m.classifier[1].in_features
        head = nn.Sequential(nn.Dropout(0.3), nn.Linear(in_dim, num_classes))
        return _WithFeatures(m.features, nn.AdaptiveAvgPool2d(1), head)
    raise SystemExit(f"unknown backbone: {name}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("backbone", choices=["mobilenet_v3", "resnet50", "efficientnet_b2"])
    ap.add_argument("--classes", type=int, required=True, help="output dimension of the head")
    ap.add_argument("--out", default="backbones", help="bundle directory")
    ap.add_argument("--no-pretrained", action="store_true",
                    help="export randomly initialized weights (offline/testing)")
    args = ap.parse_args()

    model = build(args.backbone, args.classes, not args.no_pretrained).eval()
    scripted = torch.jit.script(model)
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.backbone}.pt"
    scripted.save(str(path))

    with torch.no_grad():
        logits, feats = scripted(torch.zeros(1, 3, 224, 224))
    print(f"wrote {path} (logits {tuple(logits.shape)}, features {tuple(feats.shape)})")


if __name__ == "__main__":
    main()
