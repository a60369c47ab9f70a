import json
import os
import shutil
import tempfile
from unittest import TestCase, main

from claimcheck.config import (RunConfig, load_run_config, loss_config,
                               override_run_config, train_config,
                               validate_run_config, walk_config)
from claimcheck.constants import ABLATION_NO_LD, ABLATION_NO_LT
from claimcheck.exceptions import ConfigException
from claimcheck.tests.tools import SequentialTestLoader
from claimcheck.types import LossConfig


class TestConfig(TestCase):
    def setUp(self) -> None:
        self._folder = tempfile.mkdtemp()

    def tearDown(self) -> None:
        shutil.rmtree(self._folder)

    def _write(self, document) -> str:
        path = os.path.join(self._folder, "config.json")

        with open(path, "w", encoding="utf-8") as file:
            json.dump(document, file)

        return path

    def test_defaults(self):
        cfg = RunConfig()
        validate_run_config(cfg)
        self.assertEqual(18, cfg.dim)
        self.assertEqual(0.1, cfg.lambda2)
        self.assertIsNone(train_config(cfg).options.hidden)

    def test_override_run_config(self):
        cfg = override_run_config(
            RunConfig(),
            ["k=3", "lambda2=0.5", "encoder_pretrain=no", " ablation=no_LE"],
        )
        self.assertEqual(3, cfg.k)
        self.assertEqual(0.5, cfg.lambda2)
        self.assertIs(False, cfg.encoder_pretrain)
        self.assertEqual("no_LE", cfg.ablation)

    def test_override_run_config_invalid(self):
        invalid = ("k", "=3", "k=abc", "k=1.5", "colour=red", "encoder_pretrain=2")

        for override in invalid:
            self.assertRaises(
                ConfigException, override_run_config, RunConfig(), [override]
            )

    def test_load_run_config(self):
        document = {"dim": 8, "lambda1": 2, "kg_path": "kg.tsv"}
        cfg = load_run_config(self._write(document))
        self.assertEqual(8, cfg.dim)
        self.assertEqual(2.0, cfg.lambda1)
        self.assertIsInstance(cfg.lambda1, float)
        self.assertEqual("kg.tsv", cfg.kg_path)

    def test_load_run_config_invalid(self):
        for document in ([1, 2], {"k": True}, {"dim": "large"}, {"seed": 1.5}):
            self.assertRaises(ConfigException, load_run_config, self._write(document))

        self.assertRaises(
            ConfigException, load_run_config, os.path.join(self._folder, "none.json")
        )

        with open(os.path.join(self._folder, "broken.json"), "w") as file:
            file.write("{")

        self.assertRaises(
            ConfigException, load_run_config, os.path.join(self._folder, "broken.json")
        )

    def test_validate_run_config(self):
        invalid = [
            {"dim": 0},
            {"lambda1": -1.0},
            {"min_steps": 3, "max_steps": 2},
            {"neg_fraction": 1.5},
            {"split_train": 0.5},
            {"ablation": "no_everything"},
            {"graph_variant": "a3"},
            {"attention_norm": "none"},
            {"baseline_aggregation": "max"},
            {"f1_positive": 2},
        ]

        for values in invalid:
            self.assertRaises(
                ConfigException, validate_run_config, RunConfig()._replace(**values)
            )

    def test_walk_config(self):
        cfg = walk_config(RunConfig(min_steps=2, max_claims=6))
        self.assertEqual(2, cfg.min_steps)
        self.assertEqual(6, cfg.max_claims)
        self.assertIsNone(cfg.seed_entities)

    def test_loss_config(self):
        self.assertEqual(
            LossConfig(1.0, 0.1, True), loss_config(train_config(RunConfig()))
        )
        self.assertEqual(
            LossConfig(0.0, 0.1, False),
            loss_config(train_config(RunConfig(ablation=ABLATION_NO_LT))),
        )
        self.assertEqual(
            LossConfig(1.0, 0.0, True),
            loss_config(train_config(RunConfig(ablation=ABLATION_NO_LD))),
        )


if __name__ == "__main__":
    main(testLoader=SequentialTestLoader(), failfast=True)
