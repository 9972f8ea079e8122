import numpy as np
import pytest
import torch
from pedcc.io import read_embd

from extractor.backbones import apply_strategy, build_backbone, load_checkpoint
from extractor.dataset import scan_folder
from extractor.extract import extract
from extractor.finetune import _barlow_twins, _mae_loss, _nt_xent, finetune
from extractor.job import ExtractionJob


def make_job(image_folder, ckpt, out, **overrides):
    base = dict(dataset=str(image_folder), backbone="simclr", weights=ckpt,
                out=out, image_size=64, batch_size=4, finetune_epochs=1,
                finetune_lr=1e-3)
    base.update(overrides)
    return ExtractionJob(**base)


class TestStrategies:
    def test_frozen_trains_nothing(self):
        backbone = build_backbone("simclr")
        n_train, n_frozen = apply_strategy(backbone, "frozen")
        assert n_train == 0 and n_frozen > 0

    def test_all_layers_trains_everything(self):
        backbone = build_backbone("simclr")
        n_train, n_frozen = apply_strategy(backbone, "all-layers")
        assert n_frozen == 0 and n_train > 0

    def test_last_two_conv_resnet(self):
        backbone = build_backbone("barlow-twins")
        apply_strategy(backbone, "last-two-conv")
        flags = {name: p.requires_grad for name, p in backbone.named_parameters()}
        assert not flags["encoder.conv1.weight"]
        assert not any(v for k, v in flags.items() if k.startswith("encoder.layer2."))
        assert all(v for k, v in flags.items() if k.startswith("encoder.layer3."))
        assert all(v for k, v in flags.items() if k.startswith("encoder.layer4."))
        assert all(v for k, v in flags.items() if k.startswith("head."))

    def test_last_two_conv_vit(self):
        backbone = build_backbone("mae")
        apply_strategy(backbone, "last-two-conv")
        flags = {name: p.requires_grad for name, p in backbone.named_parameters()}
        assert not flags["encoder.conv_proj.weight"]
        assert not any(v for k, v in flags.items()
                       if "encoder_layer_0." in k or "encoder_layer_9." in k)
        assert all(v for k, v in flags.items()
                   if "encoder_layer_10." in k or "encoder_layer_11." in k)
        assert all(v for k, v in flags.items() if k.startswith("head."))


class TestObjectives:
    def test_nt_xent_matched_pairs_beat_shuffled(self):
        torch.manual_seed(0)
        za = torch.randn(8, 16)
        aligned = _nt_xent(za, za + 0.01 * torch.randn(8, 16))
        shuffled = _nt_xent(za, za[torch.randperm(8)])
        assert aligned < shuffled

    def test_barlow_identity_correlation_is_minimal(self):
        torch.manual_seed(0)
        za = torch.randn(64, 8)
        assert _barlow_twins(za, za) < _barlow_twins(za, torch.randn(64, 8))

    def test_mae_loss_finite_and_differentiable(self):
        torch.manual_seed(0)
        backbone = build_backbone("mae")
        apply_strategy(backbone, "last-two-conv")
        images = torch.randn(2, 3, 224, 224)
        loss = _mae_loss(backbone, images)
        assert torch.isfinite(loss)
        loss.backward()
        grads = [p.grad for p in backbone.parameters() if p.requires_grad]
        assert any(g is not None and torch.any(g != 0) for g in grads)


class TestFinetune:
    def test_frozen_is_noop(self, image_folder, simclr_ckpt):
        backbone = build_backbone("simclr")
        load_checkpoint(backbone, simclr_ckpt)
        before = {k: v.clone() for k, v in backbone.state_dict().items()}
        job = make_job(image_folder, simclr_ckpt, "unused", strategy="frozen")
        assert finetune(backbone, scan_folder(str(image_folder)), job) == 0
        after = backbone.state_dict()
        assert all(torch.equal(before[k], after[k]) for k in before)

    def test_last_two_conv_updates_only_unfrozen(self, image_folder, simclr_ckpt,
                                                 tmp_path):
        backbone = build_backbone("simclr")
        load_checkpoint(backbone, simclr_ckpt)
        before = {k: v.clone() for k, v in backbone.state_dict().items()}
        job = make_job(image_folder, simclr_ckpt, str(tmp_path / "o"),
                       strategy="last-two-conv")
        assert finetune(backbone, scan_folder(str(image_folder)), job) == 1
        after = backbone.state_dict()
        assert torch.equal(before["encoder.conv1.weight"],
                           after["encoder.conv1.weight"])
        assert torch.equal(before["encoder.layer2.0.conv1.weight"],
                           after["encoder.layer2.0.conv1.weight"])
        assert not torch.equal(before["encoder.layer4.0.conv1.weight"],
                               after["encoder.layer4.0.conv1.weight"])

    def test_finetuned_embeddings_differ_from_frozen(self, image_folder,
                                                     barlow_ckpt, tmp_path):
        frozen_out = str(tmp_path / "frozen.embd")
        tuned_out = str(tmp_path / "tuned.embd")
        extract(make_job(image_folder, barlow_ckpt, frozen_out,
                         backbone="barlow-twins", strategy="frozen"))
        manifest = extract(make_job(image_folder, barlow_ckpt, tuned_out,
                                    backbone="barlow-twins",
                                    strategy="all-layers"))
        assert manifest["checkpoint_epoch"] == 1
        a, b = read_embd(frozen_out), read_embd(tuned_out)
        assert not np.array_equal(a.data, b.data)
        assert open(frozen_out, "rb").read() != open(tuned_out, "rb").read()

    def test_divergence_aborts_with_checkpoint(self, image_folder, simclr_ckpt,
                                               tmp_path, monkeypatch):
        import importlib
        ft = importlib.import_module("extractor.finetune")
        monkeypatch.setattr(ft, "_nt_xent",
                            lambda *a, **k: torch.tensor(float("nan"),
                                                         requires_grad=True))
        backbone = build_backbone("simclr")
        load_checkpoint(backbone, simclr_ckpt)
        out = str(tmp_path / "o.embd")
        job = make_job(image_folder, simclr_ckpt, out, strategy="all-layers")
        with pytest.raises(ft.FinetuneDivergedError, match="abort.ckpt"):
            finetune(backbone, scan_folder(str(image_folder)), job)
        recovered = build_backbone("simclr")
        assert load_checkpoint(recovered, out + ".abort.ckpt") == 0
