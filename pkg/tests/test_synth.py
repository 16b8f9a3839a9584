"""Synthetic clip generation, baseline models, and experiment running."""

import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skelfuse import formats, metrics, synth
from skelfuse.model import (
    OBJECT_INDEX,
    EncodedImage,
    FormatError,
    HeatmapVolume,
    UnknownClassError,
    ValidationError,
)

# Reference outputs computed with a separate straight-line implementation
# of the documented recurrences (64-bit add, xorshift-multiply chain).
GOLDEN_U64 = (6457827717110365317, 3203168211198807973, 9817491932198370423)
GOLDEN_UNIFORM = (0.3500795420214081, 0.17364409667091263)
GOLDEN_NORMAL = 0.6687418474759118
GOLDEN_RANDINT = (7, 3, 3, 1)


class TestSplitMix64:
    def test_u64_stream_matches_reference(self):
        gen = synth.SplitMix64(1234567)
        assert tuple(gen.next_u64() for _ in range(3)) == GOLDEN_U64

    def test_uniform_matches_reference(self):
        gen = synth.SplitMix64(1234567)
        assert (gen.uniform(), gen.uniform()) == GOLDEN_UNIFORM

    def test_normal_matches_reference(self):
        assert synth.SplitMix64(1234567).normal() == GOLDEN_NORMAL

    def test_randint_matches_reference(self):
        gen = synth.SplitMix64(1234567)
        assert tuple(gen.randint(10) for _ in range(4)) == GOLDEN_RANDINT

    def test_seed_wraps_to_64_bits(self):
        a = synth.SplitMix64(5)
        b = synth.SplitMix64(2**64 + 5)
        assert [a.next_u64() for _ in range(4)] == [b.next_u64() for _ in range(4)]

    def test_randint_rejects_empty_range(self):
        with pytest.raises(ValidationError):
            synth.SplitMix64(1).randint(0)

    @given(st.integers(0, 2**64 - 1), st.floats(-5, 5), st.floats(0, 5))
    def test_uniform_stays_in_bounds(self, seed, low, width):
        value = synth.SplitMix64(seed).uniform(low, low + width)
        assert low <= value <= low + width

    @given(st.integers(0, 2**64 - 1), st.integers(1, 97))
    def test_randint_stays_in_bounds(self, seed, n):
        assert 0 <= synth.SplitMix64(seed).randint(n) < n


class TestMixSeed:
    def test_matches_reference(self):
        assert synth.mix_seed(7, 0) == 13987929773127838879
        assert synth.mix_seed(7, 1) == 15247205984814549539
        assert synth.mix_seed(0, 7) == 757694905818929070

    def test_order_sensitive(self):
        assert synth.mix_seed(1, 2) != synth.mix_seed(2, 1)

    @given(st.lists(st.integers(0, 2**64 - 1), max_size=4))
    def test_always_64_bit(self, parts):
        assert 0 <= synth.mix_seed(*parts) < 2**64


class TestTemplateForClass:
    def test_splits_verb_and_object(self):
        template = synth.template_for_class("pick up leg")
        assert template.verb == "pick up"
        assert template.object_class == "leg"
        assert template.object_motion == "approach"
        assert template.class_name == "pick up leg"

    def test_verb_chooses_object_motion(self):
        assert synth.template_for_class("spin table top").object_motion == "orbit"
        assert synth.template_for_class("rotate side panel").object_motion == "orbit"
        assert synth.template_for_class("flip shelf").object_motion == "oscillate"
        assert synth.template_for_class("attach shelf").object_motion == "approach"

    def test_bare_verb_has_no_object(self):
        template = synth.template_for_class("align")
        assert template.object_class is None
        assert template.class_name == "align"

    def test_unknown_trailing_words_mean_no_object(self):
        assert synth.template_for_class("push cart").object_class is None

    def test_unknown_verb_rejected(self):
        with pytest.raises(UnknownClassError):
            synth.template_for_class("juggle leg")

    def test_template_validation(self):
        with pytest.raises(ValidationError):
            synth.ActionTemplate(verb="pick up", object_class="sofa")
        with pytest.raises(ValidationError):
            synth.ActionTemplate(verb="pick up", object_class=None, noise_std=-1.0)


SMALL = synth.GenerationSettings(frames=6, width=64, height=64)


class TestGenerateClip:
    def test_deterministic(self):
        template = synth.template_for_class("pick up leg")
        a = synth.generate_clip(template, 42, SMALL)
        b = synth.generate_clip(template, 42, SMALL)
        assert a == b
        c = synth.generate_clip(template, 43, SMALL)
        assert a != c

    def test_clip_shape_and_metadata(self):
        template = synth.template_for_class("pick up leg")
        clip = synth.generate_clip(
            template, 1, SMALL, view="front", source_id="demo-0001"
        )
        assert len(clip.frames) == 6
        assert clip.view == "front"
        assert clip.source_id == "demo-0001"
        assert clip.label.class_name == "pick up leg"
        for frame, _ in clip.frames:
            assert len(frame.persons) == 1
            assert frame.persons[0].shape == (17, 3)
            scores = frame.persons[0][:, 2]
            assert (scores >= 0.6).all() and (scores <= 1.0).all()

    def test_target_object_class_and_score(self):
        template = synth.template_for_class("pick up leg")
        clip = synth.generate_clip(template, 3, SMALL)
        for _, detections in clip.frames:
            assert len(detections.instances) == 1
            inst = detections.instances[0]
            assert inst.class_index == OBJECT_INDEX["leg"]
            assert inst.score == 1.0

    def test_jitter_mode_draws_target_scores(self):
        template = synth.template_for_class("pick up leg")
        settings = synth.GenerationSettings(
            frames=6, width=64, height=64, score_mode="jitter"
        )
        clip = synth.generate_clip(template, 3, settings)
        scores = [d.instances[0].score for _, d in clip.frames]
        assert all(0.85 <= s <= 1.0 for s in scores)
        assert len(set(scores)) > 1

    def test_pixels_stay_on_canvas(self):
        template = synth.template_for_class("pick up leg", distractor_rate=2.0)
        clip = synth.generate_clip(template, 9, SMALL)
        for _, detections in clip.frames:
            for inst in detections.instances:
                assert inst.pixels[:, 0].min() >= 0
                assert inst.pixels[:, 0].max() < SMALL.width
                assert inst.pixels[:, 1].min() >= 0
                assert inst.pixels[:, 1].max() < SMALL.height

    def test_integer_distractor_rate_is_a_fixed_count(self):
        template = synth.template_for_class("pick up leg", distractor_rate=2.0)
        clip = synth.generate_clip(template, 11, SMALL)
        for _, detections in clip.frames:
            assert len(detections.instances) == 3

    def test_bare_verb_emits_only_distractors(self):
        template = synth.template_for_class("align", distractor_rate=1.0)
        clip = synth.generate_clip(template, 5, SMALL)
        for _, detections in clip.frames:
            assert len(detections.instances) == 1
            assert 0.1 <= detections.instances[0].score <= 0.6

    def test_skeleton_stream_independent_of_objects(self):
        # Templates that differ only in the object class must produce
        # byte-identical skeleton files for the same seed.
        leg = synth.template_for_class("pick up leg")
        shelf = synth.template_for_class("pick up shelf")
        a = synth.generate_clip(leg, 77, SMALL)
        b = synth.generate_clip(shelf, 77, SMALL)
        text_a = formats.serialize_skeleton_frames(s for s, _ in a.frames)
        text_b = formats.serialize_skeleton_frames(s for s, _ in b.frames)
        assert text_a == text_b
        classes_a = {i.class_index for _, d in a.frames for i in d.instances}
        classes_b = {i.class_index for _, d in b.frames for i in d.instances}
        assert classes_a != classes_b


class TestDatasetGeneration:
    CONFIG = synth.DatasetConfig(
        classes=("pick up leg", "attach shelf"),
        train_clips=3,
        test_clips=2,
        frames=6,
        width=64,
        height=64,
    )

    def test_sorted_classes(self):
        assert self.CONFIG.sorted_classes == ("attach shelf", "pick up leg")

    def test_split_layout_and_labels(self):
        train = synth.generate_split(self.CONFIG, "train")
        assert len(train) == 6
        assert [c.label.class_name for c in train[:3]] == ["attach shelf"] * 3
        assert [c.label.class_id for c in train] == [0, 0, 0, 1, 1, 1]
        assert train[3].source_id == "pick_up_leg-train-0000"
        verb_map = synth.dataset_verb_map(self.CONFIG.sorted_classes)
        assert train[0].label.verb_id == verb_map.verbs.index("attach")

    def test_splits_use_distinct_seeds(self):
        train = synth.generate_split(self.CONFIG, "train")
        test = synth.generate_split(self.CONFIG, "test")
        assert len(test) == 4
        assert train[0].frames != test[0].frames

    def test_unknown_split_rejected(self):
        with pytest.raises(ValidationError):
            synth.generate_split(self.CONFIG, "val")

    def test_duplicate_classes_rejected(self):
        with pytest.raises(ValidationError):
            synth.DatasetConfig(classes=("pick up leg", "pick up leg"))

    def test_clip_seed_composition(self):
        assert synth.clip_seed(7, 1, "test", 4) == synth.mix_seed(7, 1, 1, 4)
        seeds = {
            synth.clip_seed(7, c, split, i)
            for c in range(2)
            for split in ("train", "test")
            for i in range(3)
        }
        assert len(seeds) == 12

    def test_write_dataset_round_trips(self, tmp_path):
        manifest = synth.write_dataset(self.CONFIG, tmp_path)
        assert len(manifest.entries) == 10
        assert sorted({e.split for e in manifest.entries}) == ["test", "train"]
        verb_map = formats.load_verb_map(tmp_path / "verb_map.csv")
        train, test, _ = synth.generate_dataset(self.CONFIG)
        loaded_train = formats.load_clips(manifest, verb_map, split="train")
        loaded_test = formats.load_clips(manifest, verb_map, split="test")
        assert loaded_train == train
        assert loaded_test == test

    def test_write_dataset_independent_of_jobs(self, tmp_path):
        serial = tmp_path / "serial"
        threaded = tmp_path / "threaded"
        synth.write_dataset(self.CONFIG, serial, jobs=1)
        synth.write_dataset(self.CONFIG, threaded, jobs=4)
        files = sorted(p.relative_to(serial) for p in serial.rglob("*") if p.is_file())
        assert files == sorted(
            p.relative_to(threaded) for p in threaded.rglob("*") if p.is_file()
        )
        for rel in files:
            assert (serial / rel).read_bytes() == (threaded / rel).read_bytes()


class TestPoolFeatures:
    def test_image_pools_over_columns(self):
        pixels = np.array(
            [[[2, 4, 0], [4, 8, 0]], [[0, 0, 0], [1, 1, 1]]], dtype=np.uint8
        )
        pooled = synth.pool_features(EncodedImage(pixels=pixels, row_labels=None))
        assert pooled.dtype == np.float32
        assert pooled.tolist() == [3.0, 6.0, 0.0, 0.5, 0.5, 0.5]

    def test_volume_pools_over_time(self):
        values = np.zeros((2, 4, 1, 2), dtype=np.float32)
        values[1, 0, 0, 0] = 1.0
        values[1, 2, 0, 1] = 0.5
        pooled = synth.pool_features(
            HeatmapVolume(values=values, channel_labels=("a", "b"))
        )
        assert pooled.tolist() == [0.0, 0.0, 0.25, 0.125]

    def test_channel_identity_survives(self):
        values = np.zeros((3, 2, 2, 2), dtype=np.float32)
        values[2] = 1.0
        pooled = synth.pool_features(
            HeatmapVolume(values=values, channel_labels=("a", "b", "c"))
        )
        assert not pooled[:8].any()
        assert (pooled[8:] == 1.0).all()

    def test_rejects_other_types(self):
        with pytest.raises(ValidationError):
            synth.pool_features(np.zeros((2, 2)))


class TestBaselineModel:
    def test_nearest_centroid_stores_class_means(self):
        feats = np.array([[0.0], [2.0], [10.0], [14.0]], dtype=np.float32)
        model = synth.train_baseline(feats, [0, 0, 1, 1])
        assert model.kind == "nearest_centroid"
        assert model.references.tolist() == [[1.0], [12.0]]
        assert model.class_ids.tolist() == [0, 1]
        assert model.predict(np.array([[3.0], [9.0]], dtype=np.float32)).tolist() == [0, 1]

    def test_one_nn_stores_every_exemplar(self):
        feats = np.array([[0.0], [1.0], [10.0]], dtype=np.float32)
        model = synth.train_baseline(feats, [3, 1, 0], kind="one_nn")
        assert model.references.shape == (3, 1)
        assert model.predict(np.array([[0.9]], dtype=np.float32)).tolist() == [1]

    def test_distance_ties_pick_lowest_class_id(self):
        model = synth.BaselineModel(
            kind="nearest_centroid",
            input_kind="heatmap",
            class_ids=np.array([5, 2]),
            references=np.array([[0.0], [2.0]], dtype=np.float32),
        )
        assert model.predict(np.array([[1.0]], dtype=np.float32)).tolist() == [2]

    def test_missing_class_rejected(self):
        feats = np.array([[0.0], [1.0]], dtype=np.float32)
        with pytest.raises(ValidationError):
            synth.train_baseline(feats, [0, 2], n_classes=3)

    def test_predict_validates_width(self):
        feats = np.array([[0.0, 1.0]], dtype=np.float32)
        model = synth.train_baseline(feats, [0])
        with pytest.raises(ValidationError):
            model.predict(np.zeros((1, 3), dtype=np.float32))

    def test_evaluate_matches_metric_functions(self):
        feats = np.array([[0.0], [0.5], [10.0], [9.5]], dtype=np.float32)
        model = synth.train_baseline(feats, [0, 0, 1, 1])
        test_feats = np.array([[1.0], [8.0], [12.0]], dtype=np.float32)
        labels = [0, 0, 1]
        scores = synth.evaluate(model, test_feats, labels)
        preds = model.predict(test_feats).tolist()
        assert scores["top1"] == metrics.top1_accuracy(preds, labels)
        assert scores["mAcc"] == metrics.mean_class_accuracy(preds, labels)
        assert np.array_equal(
            scores["confusion"], metrics.confusion_matrix(preds, labels, k=2)
        )


class TestModelFiles:
    def _model(self):
        feats = np.array([[0.5, 1.5, -2.0], [3.25, 0.0, 9.0]], dtype=np.float32)
        return synth.train_baseline(feats, [4, 1], kind="one_nn", input_kind="image")

    def test_round_trip(self, tmp_path):
        model = self._model()
        path = tmp_path / "model.bin"
        synth.write_model(model, path)
        back = synth.read_model(path)
        assert back.kind == model.kind
        assert back.input_kind == model.input_kind
        assert np.array_equal(back.class_ids, model.class_ids)
        assert np.array_equal(back.references, model.references)

    def test_header_layout(self, tmp_path):
        model = self._model()
        path = tmp_path / "model.bin"
        synth.write_model(model, path)
        raw = path.read_bytes()
        magic, version, kind, input_kind, n, dim = struct.unpack("<4s3BII", raw[:15])
        assert (magic, version) == (b"SKBM", 1)
        assert (kind, input_kind) == (1, 0)
        assert (n, dim) == (2, 3)
        assert raw[15:31] == model.class_ids.astype("<i8").tobytes()
        assert raw[31:] == model.references.astype("<f4").tobytes()

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"XKBM" + b"\x00" * 20)
        with pytest.raises(FormatError):
            synth.read_model(path)

    def test_rejects_unknown_version(self, tmp_path):
        path = tmp_path / "model.bin"
        synth.write_model(self._model(), path)
        raw = bytearray(path.read_bytes())
        raw[4] = 2
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            synth.read_model(path)

    def test_rejects_truncation(self, tmp_path):
        path = tmp_path / "model.bin"
        synth.write_model(self._model(), path)
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(FormatError):
            synth.read_model(path)


class TestExperimentConfig:
    def test_minimal_config_uses_defaults(self):
        config = synth.parse_experiment_config("classes=pick up leg\n")
        assert config.dataset.classes == ("pick up leg",)
        assert config.dataset.train_clips == 100
        assert config.dataset.test_clips == 50
        assert config.encoders == ("heatmap",)
        assert config.conditions == ("skeleton-only", "objects-only", "combined")
        assert config.object_modes == ("most_relevant",)
        assert config.grid == (64, 64)
        assert config.tau == 0.1
        assert config.remap_verbs is False

    def test_comments_and_blanks_ignored(self):
        text = "# setup\n\nclasses = pick up leg , attach shelf # inline\nseed=9\n"
        config = synth.parse_experiment_config(text)
        assert config.dataset.classes == ("pick up leg", "attach shelf")
        assert config.dataset.seed == 9

    def test_grid_and_lists(self):
        text = (
            "classes=pick up leg\nencoders=image,heatmap\n"
            "conditions=combined\nobject_modes=most_relevant,all\ngrid=32x16\n"
        )
        config = synth.parse_experiment_config(text)
        assert config.encoders == ("image", "heatmap")
        assert config.conditions == ("combined",)
        assert config.object_modes == ("most_relevant", "all")
        assert config.grid == (32, 16)

    @pytest.mark.parametrize(
        "text",
        [
            "train_clips=5\n",
            "classes=pick up leg\nbogus=1\n",
            "classes=pick up leg\nseed=1\nseed=2\n",
            "classes=pick up leg\ngrid=64\n",
            "classes=pick up leg\nremap_verbs=yes\n",
            "classes=pick up leg\ntrain_clips=many\n",
            "classes=pick up leg,pick up leg\n",
            "classes=pick up leg\njust a line\n",
        ],
    )
    def test_rejects_malformed_configs(self, text):
        with pytest.raises(FormatError):
            synth.parse_experiment_config(text)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("classes=pick up leg\ntau=0.2\n", encoding="utf-8")
        assert synth.load_experiment_config(path).tau == 0.2


TINY_EXPERIMENT = synth.ExperimentConfig(
    dataset=synth.DatasetConfig(
        classes=("pick up leg", "attach shelf"),
        train_clips=3,
        test_clips=2,
        frames=6,
        width=64,
        height=64,
    ),
    encoders=("image", "heatmap"),
    grid=(16, 16),
    t_target=4,
)


class TestRunExperiment:
    def test_grid_rows_and_order(self):
        rows = synth.run_experiment(TINY_EXPERIMENT)
        assert [(r["encoder"], r["condition"], r["object_mode"]) for r in rows] == [
            ("image", "skeleton-only", "none"),
            ("image", "objects-only", "most_relevant"),
            ("image", "combined", "most_relevant"),
            ("heatmap", "skeleton-only", "none"),
            ("heatmap", "objects-only", "most_relevant"),
            ("heatmap", "combined", "most_relevant"),
        ]
        for row in rows:
            assert 0.0 <= row["mAcc"] <= 1.0
            assert 0.0 <= row["top1"] <= 1.0

    def test_deterministic(self):
        a = synth.run_experiment(TINY_EXPERIMENT)
        b = synth.run_experiment(TINY_EXPERIMENT)
        assert a == b

    def test_remap_collapses_shared_verbs(self):
        config = synth.ExperimentConfig(
            dataset=synth.DatasetConfig(
                classes=("pick up leg", "pick up shelf"),
                train_clips=2,
                test_clips=1,
                frames=6,
                width=64,
                height=64,
            ),
            encoders=("heatmap",),
            conditions=("skeleton-only",),
            grid=(16, 16),
            t_target=4,
            remap_verbs=True,
        )
        rows = synth.run_experiment(config)
        assert [r["mAcc"] for r in rows] == [1.0]

    def test_report_format(self, tmp_path):
        rows = [
            {
                "condition": "combined",
                "encoder": "heatmap",
                "object_mode": "most_relevant",
                "mAcc": 0.5,
                "top1": 2 / 3,
            }
        ]
        text = synth.format_report(rows)
        assert text == (
            "condition,encoder,object_mode,mAcc,top1\n"
            "combined,heatmap,most_relevant,0.500000,0.666667\n"
        )
        path = tmp_path / "report.csv"
        synth.write_report(rows, path)
        assert path.read_text(encoding="utf-8") == text
