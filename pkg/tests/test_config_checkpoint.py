import math

import numpy as np
import pytest

from ckge.checkpoint import load_checkpoint, save_checkpoint
from ckge.config import DEFAULTS, RunConfig
from ckge.errors import ConfigError
from ckge.kg import Vocabulary
from ckge.model import TransE, adam_step


def test_defaults_match_published_settings():
    cfg = RunConfig()
    assert cfg["train.lr"] == 1e-4 and cfg["train.margin"] == 8.0 and cfg["train.alpha"] == 0.01
    assert cfg["train.max_epochs"] == 200 and cfg["replay.k"] == 30 and cfg["expand.epochs"] == 1
    assert cfg["policy.r"] == 1.25 and cfg["policy.step"] == 10 and cfg["scale.b"] == math.e


def test_unknown_key_and_bad_values():
    with pytest.raises(ConfigError):
        RunConfig({"train.learning_rate": 0.1})
    with pytest.raises(ConfigError):
        RunConfig({"train.lr": "fast"})
    with pytest.raises(ConfigError):
        RunConfig({"mode": "other"})
    with pytest.raises(ConfigError):
        RunConfig({"ablate": "XX"})
    with pytest.raises(ConfigError):
        RunConfig.parse("no equals sign here")


def test_ablate_normalized():
    assert RunConfig({"ablate": "di, le"})["ablate"] == "LE,DI"
    assert RunConfig({"ablate": "DI,LE"}).ablations == {"LE", "DI"}


def test_round_trip(tmp_path):
    cfg = RunConfig({"train.lr": 0.003, "ablate": "SE", "scale.a": 1234.5, "verbose": True})
    path = tmp_path / "c.txt"
    cfg.dump(path)
    again = RunConfig.from_file(path)
    assert again.values == cfg.values
    assert set(again.values) == set(DEFAULTS)
    over = RunConfig.from_file(path, {"train.lr": 0.5})
    assert over["train.lr"] == 0.5


def test_parse_comments_and_e():
    cfg = RunConfig.parse("# header\ntrain.lr = 0.2  # inline\n\nscale.b=e\n")
    assert cfg["train.lr"] == 0.2 and cfg["scale.b"] == math.e


def test_checkpoint_round_trip(tmp_path):
    m = TransE.random(6, 2, 5, 0)
    adam_step(m.ent, np.ones_like(m.ent), m.ent_opt, 0.1)
    v = Vocabulary.from_names([f"e{i}" for i in range(6)], ["r0", "r1"])
    save_checkpoint(tmp_path / "c.npz", m, v, snapshot=3)
    m2, v2, meta = load_checkpoint(tmp_path / "c.npz")
    assert v2 == v and int(meta["snapshot"]) == 3 and m2.norm == m.norm
    assert m2.ent.tobytes() == m.ent.tobytes() and m2.rel.tobytes() == m.rel.tobytes()
    assert m2.ent_opt.t == 1 and np.array_equal(m2.ent_opt.v, m.ent_opt.v)
    # resuming gives the same next step
    g = np.full_like(m.ent, 0.3)
    adam_step(m.ent, g, m.ent_opt, 0.1)
    adam_step(m2.ent, g, m2.ent_opt, 0.1)
    assert m2.ent.tobytes() == m.ent.tobytes()
