from __future__ import annotations

import json
import re
import shutil

import numpy as np
import pytest
from PIL import Image

from fairsplit.errors import ConfigError, TemplateError
from fairsplit.manifest import DatasetManifest, ImageRecord, QuadAnnotation, load_manifest
from fairsplit.synthgen import (
    AugmentConfig,
    PlatePattern,
    Slot,
    augment,
    augment_manifest,
    bundled_templates_dir,
    generate_batch,
    generate_plate_text,
    load_registry,
    load_template,
    render_plate,
)
from fairsplit.synthgen.augment import hsv_to_rgb, rgb_to_hsv
from fairsplit.synthgen.batch import write_rows
from fairsplit.synthgen.text import DIGIT, LITERAL


@pytest.fixture(scope="module")
def registry():
    return load_registry()


class TestPatterns:
    def test_literal_prefix(self):
        pattern = PlatePattern((Slot(LITERAL, "A"), Slot(LITERAL, "B"), Slot(DIGIT)), "x")
        for seed in range(20):
            assert re.fullmatch(r"AB[0-9]", generate_plate_text(pattern, np.random.default_rng(seed)))

    def test_all_literal_independent_of_seed(self):
        pattern = PlatePattern.parse("京AB", "x")
        assert {generate_plate_text(pattern, np.random.default_rng(s)) for s in range(10)} == {"京AB"}

    def test_digit_slot_uniform(self):
        pattern = PlatePattern.parse("#", "x")
        rng = np.random.default_rng(0)
        draws = [generate_plate_text(pattern, rng) for _ in range(10_000)]
        counts = np.array([draws.count(str(d)) for d in range(10)])
        sigma = np.sqrt(10_000 * 0.1 * 0.9)
        assert np.all(np.abs(counts - 1000) < 5 * sigma)
        chi2 = float(((counts - 1000) ** 2 / 1000).sum())
        assert chi2 < 27.9  # 9 dof, p = 0.999

    def test_excluded_letters_never_drawn(self):
        pattern = PlatePattern.parse("??????", "x")
        rng = np.random.default_rng(1)
        letters = "ABCDEFGHJKLMNPQRSTUVWXYZ"
        text = "".join(generate_plate_text(pattern, rng, letters) for _ in range(500))
        assert "I" not in text and "O" not in text

    def test_empty_alphabet(self):
        with pytest.raises(ConfigError):
            generate_plate_text(PlatePattern.parse("?#", "x"), np.random.default_rng(0), "")

    def test_parse_round_trip_and_matches(self):
        p = PlatePattern.parse("皖?*#", "mainland")
        assert str(p) == "皖?*#"
        assert len(p) == 4
        assert p.matches("皖AZ9") and p.matches("皖A99")
        assert not p.matches("京AZ9") and not p.matches("皖1Z9") and not p.matches("皖AZ")

    def test_invalid_slots(self):
        with pytest.raises(ConfigError):
            Slot(LITERAL, "ab")
        with pytest.raises(ConfigError):
            Slot(LITERAL, "-")
        with pytest.raises(ConfigError):
            PlatePattern((), "x")


class TestRender:
    def test_bundled_templates(self, registry):
        assert set(registry) == {"taiwan", "mainland"}
        for tpl in registry.values():
            for p in tpl.plate_patterns():
                assert len(p) == tpl.slots

    def test_deterministic(self, registry):
        tpl = registry["taiwan"]
        a = render_plate("AB1234", tpl)
        assert np.array_equal(a, render_plate("AB1234", tpl))
        assert a.shape == tpl.image.shape and a.dtype == np.uint8

    @pytest.mark.parametrize("name, label, other", [
        ("taiwan", "AB1234", "AB1734"),
        ("mainland", "皖A12345", "皖A12845"),
        ("mainland", "皖A12345", "京A12345"),
    ])
    def test_one_char_change_stays_in_box(self, registry, name, label, other):
        tpl = registry[name]
        diff = np.any(render_plate(label, tpl) != render_plate(other, tpl), axis=2)
        k = next(i for i, (a, b) in enumerate(zip(label, other)) if a != b)
        x, y, w, h = tpl.boxes[k]
        allowed = np.zeros_like(diff)
        allowed[max(0, y - 2):y + h + 2, max(0, x - 2):x + w + 2] = True
        assert diff.any()
        assert not np.any(diff & ~allowed)

    def test_too_long_label(self, registry):
        with pytest.raises(TemplateError, match="slots"):
            render_plate("AB12345", registry["taiwan"])

    def test_missing_glyph_named(self, registry):
        with pytest.raises(TemplateError, match="'#'"):
            render_plate("AB12#4", registry["taiwan"])

    def test_template_box_outside_image(self, tmp_path):
        src = bundled_templates_dir()
        for f in ("taiwan.png", "block.font.json"):
            shutil.copy(src / f, tmp_path / f)
        meta = json.loads((src / "taiwan.json").read_text(encoding="utf-8"))
        meta["boxes"][0] = [190, 0, 50, 50]
        (tmp_path / "taiwan.json").write_text(json.dumps(meta), encoding="utf-8")
        with pytest.raises(TemplateError, match="box"):
            load_template(tmp_path, "taiwan")

    def test_empty_registry(self, tmp_path):
        with pytest.raises(TemplateError):
            load_registry(tmp_path)


class TestAugment:
    def test_identity_config(self, registry):
        img = render_plate("AB1234", registry["taiwan"])
        out, log = augment(img, np.random.default_rng(0), AugmentConfig.identity())
        assert np.array_equal(out, img / 255.0)
        assert [e["name"] for e in log] == ["perspective", "shadow", "hsv", "noise"]

    def test_fixed_seed_reproducible(self, registry):
        img = render_plate("AB1234", registry["taiwan"])
        a = augment(img, np.random.default_rng(5))
        b = augment(img, np.random.default_rng(5))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_noise_only_std(self):
        img = np.full((120, 120), 0.5)
        out, log = augment(img, np.random.default_rng(3), AugmentConfig.noise_only(0.05))
        assert out.size >= 10_000
        assert 0.04 <= out.std(ddof=1) <= 0.06
        assert log[-1] == {"name": "noise", "sigma": 0.05}

    @pytest.mark.parametrize("seed", range(10))
    def test_shape_and_range(self, registry, seed):
        cfg = AugmentConfig(0.15, (0.0, 0.6), 0.05, 0.3, 0.3, (0.0, 0.1))
        img = render_plate("皖A12345", registry["mainland"])
        out, _ = augment(img, np.random.default_rng(seed), cfg)
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0

    @pytest.mark.parametrize("kwargs", [
        {"perspective": 0.2}, {"noise_sigma": (0.0, 0.11)}, {"shadow_opacity": (0.0, 0.7)},
        {"hue": 0.06}, {"saturation": 0.31}, {"value": -0.1}, {"noise_sigma": (0.05, 0.01)},
    ])
    def test_out_of_range_config(self, kwargs):
        with pytest.raises(ConfigError):
            AugmentConfig(**kwargs)

    def test_hsv_round_trip(self):
        rgb = np.random.default_rng(4).random((50, 3))
        np.testing.assert_allclose(hsv_to_rgb(rgb_to_hsv(rgb)), rgb, atol=1e-12)

    def test_hsv_matches_colorsys(self):
        import colorsys

        rgb = np.random.default_rng(5).random((40, 3))
        ref = np.array([colorsys.rgb_to_hsv(*p) for p in rgb])
        np.testing.assert_allclose(rgb_to_hsv(rgb), ref, atol=1e-12)


class TestBatch:
    def test_three_records_written(self, registry, tmp_path):
        records, rows = generate_batch(3, list(registry.values()), seed=7, out_dir=tmp_path)
        assert len(records) == 3 and len(rows) == 3
        files = sorted(p.name for p in (tmp_path / "images").iterdir())
        assert files == ["synth_000000.png", "synth_000001.png", "synth_000002.png"]
        write_rows(rows, tmp_path / "synthetic.csv")
        m = load_manifest(tmp_path / "synthetic.csv")
        for rec, r in zip(records, m):
            assert r.label == rec.label and r.subset == "synthetic"
            tpl = registry[rec.template]
            assert PlatePattern.parse(rec.pattern, tpl.name).matches(rec.label, tpl.letters)
            assert np.array_equal(np.asarray(Image.open(m.resolve(r))), rec.image)

    def test_same_seed_byte_identical(self, registry, tmp_path):
        for name in ("a", "b"):
            _, rows = generate_batch(5, list(registry.values()), seed=3, out_dir=tmp_path / name)
            write_rows(rows, tmp_path / name / "synthetic.csv")
        for f in ["synthetic.csv"] + [f"images/synth_{i:06d}.png" for i in range(5)]:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_records_independent_of_batch_size(self, registry):
        small, _ = generate_batch(3, list(registry.values()), seed=11)
        big, _ = generate_batch(6, list(registry.values()), seed=11)
        for a, b in zip(small, big):
            assert a.label == b.label and np.array_equal(a.image, b.image)

    def test_parallel_matches_serial(self, registry):
        serial, _ = generate_batch(8, list(registry.values()), seed=2)
        parallel, _ = generate_batch(8, list(registry.values()), seed=2, jobs=2)
        for a, b in zip(serial, parallel):
            assert a.label == b.label and np.array_equal(a.image, b.image) and a.transform_log == b.transform_log

    def test_rerender_reproduces_base(self, registry):
        records, _ = generate_batch(30, list(registry.values()), seed=4)
        for r in records:
            assert np.array_equal(render_plate(r.label, registry[r.template]), r.base)

    def test_weights(self, registry):
        records, _ = generate_batch(20, list(registry.values()), seed=0, weights={"mainland": 1.0})
        assert {r.template for r in records} == {"mainland"}
        with pytest.raises(ConfigError):
            generate_batch(2, list(registry.values()), weights={"nope": 1.0})
        with pytest.raises(ConfigError):
            generate_batch(2, list(registry.values()), weights={"mainland": 0.0})

    def test_custom_patterns(self, registry):
        pats = [PlatePattern.parse("AB####", "taiwan")]
        records, _ = generate_batch(10, [registry["taiwan"]], seed=0, patterns=pats)
        assert all(r.label.startswith("AB") for r in records)
        with pytest.raises(ConfigError):
            generate_batch(2, [registry["taiwan"]], patterns=[PlatePattern.parse("AB#", "taiwan")])

    def test_n_must_be_positive(self, registry):
        with pytest.raises(ConfigError):
            generate_batch(0, list(registry.values()))


def test_augment_real_images_keeps_labels(tmp_path):
    rng = np.random.default_rng(0)
    (tmp_path / "src").mkdir()
    Image.fromarray(rng.integers(0, 256, size=(40, 90, 3), dtype=np.uint8)).save(tmp_path / "src" / "a.png")
    quad = QuadAnnotation(((5, 5), (80, 6), (79, 35), (6, 34)))
    m = DatasetManifest((ImageRecord("a", "a.png", "XY123", "AC", quad),), root=tmp_path / "src")
    rows = augment_manifest(m, tmp_path / "out", seed=1, copies=2, size=(24, 48))
    assert [r[0] for r in rows] == ["a__aug0", "a__aug1"]
    assert all(r[2] == "XY123" and r[3] == "AC" for r in rows)
    img = np.asarray(Image.open(tmp_path / "out" / rows[0][1]))
    assert img.shape == (24, 48, 3)
