import dataclasses
import json

import numpy as np
import pytest

from clockink.model import bearing, dump_drawing, dump_ground_truth, load_corpus
from clockink.stslice import threshold_segment
from clockink.synth import (NUMERALS, TEMPLATES, SynthConfig, _Clock, generate_clock, generate_corpus,
                            generate_drawings, load_preset, preset_config)

QUIET = dict(jitter_sigma=0.0, point_noise=0.0, angle_noise_deg=0.0, radial_noise=0.0,
             digit_scale_var=0.0, rotation_deg=0.0, slant=0.0, radius_var=0.0, glyph_gap_sd=0.0)


def test_templates_cover_all_numerals():
    assert tuple(sorted(TEMPLATES)) == tuple(range(1, 13)) == tuple(sorted(NUMERALS))
    for n in (10, 11, 12):
        assert set(TEMPLATES[n].parts) == {0, 1}
    assert all(len(t.strokes) >= 1 for t in TEMPLATES.values())


def test_noise_free_clock_is_exact():
    cfg = SynthConfig(**QUIET)
    clk = _Clock(cfg, np.random.default_rng(0))
    for n in range(1, 13):
        assert bearing(clk.numeral_center(n), clk.center) == pytest.approx((30 * n) % 360, abs=1e-9)
    d, gt = generate_clock(cfg, seed=0)
    digits = [d.stroke(i) for i in sorted(gt.digit_strokes())]
    out = threshold_segment(digits, clk.center)
    assert len(out) == 12
    assert {s.ids for s in out} == {s.strokes for s in gt.slices}
    for s in out:
        lab = next(x.label for x in gt.slices if x.strokes == s.ids)
        diff = abs((s.angular_mid - 30 * lab + 180) % 360 - 180)
        assert diff < 4.0


def test_delayed_overwrite_marks_first_ink():
    cfg = dataclasses.replace(preset_config("healthy"), p_overwrite={8: 1.0}, p_immediate=0.0)
    d, gt = generate_clock(cfg, seed=4)
    ev = [e for e in gt.events if e.kind == "delayed_overwrite"]
    assert len(ev) == 1 and ev[0].numeral == 8
    assert ev[0].strokes and all(gt.roles[i] == "overwritten" for i in ev[0].strokes)
    final = next(s for s in gt.slices if s.label == 8)
    assert final.strokes == ev[0].by
    first_end = max(d.stroke(i).end_time for i in ev[0].strokes)
    assert min(d.stroke(i).start_time for i in final.strokes) - first_end > 1000


def test_immediate_overwrite_follows_directly():
    cfg = dataclasses.replace(preset_config("healthy"), p_overwrite={8: 1.0}, p_immediate=1.0)
    d, gt = generate_clock(cfg, seed=4)
    ev = next(e for e in gt.events if e.kind == "immediate_overwrite")
    ids = sorted(ev.strokes | ev.by, key=lambda i: d.stroke(i).start_time)
    order = [s.id for s in sorted(d.strokes, key=lambda s: s.start_time)]
    pos = [order.index(i) for i in ids]
    assert pos == list(range(pos[0], pos[0] + len(pos)))


def test_same_seed_is_byte_identical():
    cfg = preset_config("overwrite")
    a, ga = generate_clock(cfg, seed=9)
    b, gb = generate_clock(cfg, seed=9)
    assert dump_drawing(a) == dump_drawing(b)
    assert dump_ground_truth(ga) == dump_ground_truth(gb)
    c, _ = generate_clock(cfg, seed=10)
    assert dump_drawing(a) != dump_drawing(c)


def test_corpus_files_and_manifest(tmp_path):
    files = generate_corpus("healthy", 12, tmp_path / "c", seed=3)
    assert len(files) == 12
    names = sorted(p.name for p in (tmp_path / "c").iterdir())
    assert sum(n.endswith(".gt.json") for n in names) == 12
    assert len(names) == 25 and "manifest.json" in names
    man = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert man["n"] == 12 and man["seed"] == 3 and man["preset"] == "healthy"
    generate_corpus("healthy", 12, tmp_path / "d", seed=man["seed"])
    for p in (tmp_path / "c").iterdir():
        assert p.read_bytes() == (tmp_path / "d" / p.name).read_bytes()
    corpus = load_corpus(tmp_path / "c")
    mem = generate_drawings("healthy", 12, seed=3)
    assert [dump_drawing(d) for _, d, _ in corpus] == [dump_drawing(d) for _, d, _ in mem]


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        generate_corpus("healthy", 1, blocker / "sub")


@pytest.mark.parametrize("name", ["healthy", "impaired", "overwrite", "repair", "mixed"])
def test_presets_load(name):
    assert isinstance(load_preset(name), dict)
    assert len(generate_drawings(name, 2, seed=0)) == 2


def test_invalid_probability_rejected():
    with pytest.raises(ValueError):
        SynthConfig(p_overwrite=1.5)
    with pytest.raises(ValueError):
        SynthConfig(jitter_sigma=-0.1)


@pytest.mark.parametrize("name", ["healthy", "impaired", "repair"])
def test_slices_are_chronologically_contiguous(name):
    for _, d, gt in generate_drawings(name, 15, seed=1):
        order = [s.id for s in sorted(d.strokes, key=lambda s: (s.start_time, s.id))]
        for s in gt.slices:
            pos = sorted(order.index(i) for i in s.strokes)
            assert pos == list(range(pos[0], pos[0] + len(pos)))


def test_mixed_preset_contains_both_cohorts():
    cohorts = {d.cohort for _, d, _ in generate_drawings("mixed", 30, seed=0)}
    assert cohorts == {"healthy", "impaired"}
