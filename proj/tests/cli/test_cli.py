"""Command-line contract tests: exit codes, artifact layout, CSV format."""

import csv
import json
import os
import shutil
import struct
import subprocess
import sys
import tempfile
import unittest

CLI = None

SMALL = {
    "version": 1,
    "phantom": {"dims": [32, 32, 16], "blob_radius_min": 4, "blob_radius_max": 6, "air_cell_count": 10},
    "optimizer": {"max_iters": 8},
}


def run(*args, cwd=None):
    return subprocess.run([CLI, *args], cwd=cwd, capture_output=True, text=True)


class CliContract(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp(prefix="mastoid_cli_")

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def write_config(self, doc, name="config.json"):
        p = self.path(name)
        with open(p, "w") as f:
            json.dump(doc, f)
        return p

    def test_help_exits_zero(self):
        self.assertEqual(run("--help").returncode, 0)

    def test_missing_subcommand_is_config_error(self):
        self.assertEqual(run().returncode, 2)

    def test_invalid_variant_is_config_error_before_any_output(self):
        cfg = self.write_config({"version": 1, "loss_variant": "ssim"})
        r = run("pipeline", "--config", cfg, "--out", self.path("out"))
        self.assertEqual(r.returncode, 2)
        self.assertIn("loss variant", r.stderr)
        self.assertFalse(os.path.exists(self.path("out")))

    def test_unknown_key_and_bad_version(self):
        cfg = self.write_config({"version": 1, "optimiser": {}})
        self.assertEqual(run("pipeline", "--config", cfg).returncode, 2)
        cfg = self.write_config({"version": 3})
        self.assertEqual(run("phantom", "--config", cfg).returncode, 2)

    def test_bad_thread_count(self):
        self.assertEqual(run("phantom", "--threads", "0", "--out", self.path("o")).returncode, 2)

    def test_missing_input_is_io_error(self):
        r = run("mesh", "--volume", self.path("nothing"), "--out", self.path("o"))
        self.assertEqual(r.returncode, 4)

    def test_zero_variance_registration_is_numerical_error(self):
        cfg = self.write_config(SMALL)
        self.assertEqual(run("phantom", "--config", cfg, "--out", self.path("ph")).returncode, 0)
        dims = [32, 32, 16]
        with open(self.path("flat.json"), "w") as f:
            f.write(json.dumps({"dims": dims, "spacing_mm": [1.0, 1.0, 1.0], "dtype": "f32",
                                "order": "x-fastest"}) + "\n")
        with open(self.path("flat.raw"), "wb") as f:
            f.write(struct.pack("<f", 0.5) * (32 * 32 * 16))
        r = run("register", "--fixed", self.path("flat"), "--moving", self.path("ph", "post"),
                "--out", self.path("reg"))
        self.assertEqual(r.returncode, 3)

    def test_subcommands_chain(self):
        cfg = self.write_config(SMALL)
        ph = self.path("ph")
        self.assertEqual(run("phantom", "--config", cfg, "--out", ph).returncode, 0)
        for stem in ("pre", "post", "gt"):
            self.assertTrue(os.path.exists(os.path.join(ph, stem + ".raw")))
            self.assertEqual(os.path.getsize(os.path.join(ph, stem + ".raw")), 32 * 32 * 16 * 4)

        reg = self.path("reg")
        r = run("register", "--config", cfg, "--fixed", os.path.join(ph, "pre"),
                "--moving", os.path.join(ph, "post"), "--levels", "2", "--out", reg)
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(os.path.join(reg, "transform.json")) as f:
            t = json.load(f)
        self.assertEqual(set(t), {"rot_rad", "trans_mm", "ncc"})
        self.assertEqual(len(t["rot_rad"]), 3)

        opt = self.path("opt")
        r = run("optimize", "--config", cfg, "--rho", os.path.join(ph, "pre"),
                "--omega", os.path.join(ph, "post"), "--out", opt)
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(os.path.join(opt, "trace.csv"), newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["iter", "total", "msssim_cscc", "smooth"])
        self.assertGreaterEqual(len(rows), 2)

        r = run("loss", "eval", "--config", cfg, "--rho", os.path.join(ph, "pre"),
                "--omega", os.path.join(ph, "post"), "--delta", os.path.join(opt, "delta"),
                "--per-scale-csv", self.path("scales.csv"))
        self.assertEqual(r.returncode, 0, r.stderr)
        report = json.loads(r.stdout)
        self.assertAlmostEqual(report["total"], report["msssim_cscc"] + report["lambda"] * report["smooth"])
        with open(self.path("scales.csv")) as f:
            self.assertEqual(len(f.read().splitlines()), 6)

        ev = self.path("ev")
        batch = self.write_config({"cases": [
            {"id": "a", "pred": os.path.join(opt, "mask"), "gt": os.path.join(ph, "gt")},
            {"id": "b", "pred": os.path.join(ph, "gt"), "gt": os.path.join(ph, "gt")},
        ]}, name="batch.json")
        r = run("evaluate", "--batch", batch, "--out", ev)
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(os.path.join(ev, "metrics.csv"), newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["case", "dice", "iou", "acc", "pre", "sen", "spe", "hd95", "asd"])
        self.assertEqual(rows[2][1], "1")
        with open(os.path.join(ev, "summary.csv"), newline="") as f:
            stats = [r[0] for r in csv.reader(f)]
        self.assertEqual(stats, ["stat", "min", "median", "mean", "std_sample", "max", "n_defined"])

        mesh = self.path("mesh")
        r = run("mesh", "--volume", os.path.join(ph, "gt"), "--out", mesh, "--name", "gt")
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(os.path.join(mesh, "gt.stl"), "rb") as f:
            data = f.read()
        (count,) = struct.unpack_from("<I", data, 80)
        self.assertEqual(len(data), 84 + 50 * count)
        self.assertGreater(count, 0)

    def test_pipeline_is_reproducible_and_complete(self):
        cfg = self.write_config(SMALL)
        for name, threads in (("a", "1"), ("b", "3")):
            r = run("pipeline", "--config", cfg, "--threads", threads, "--out", self.path(name))
            self.assertEqual(r.returncode, 0, r.stderr)
        with open(self.path("a", "manifest.json")) as f:
            a = f.read()
        with open(self.path("b", "manifest.json")) as f:
            b = f.read()
        self.assertEqual(a, b)
        doc = json.loads(a)
        self.assertEqual(doc["status"], "ok")
        names = {e["path"] for e in doc["artifacts"]}
        for required in ("trace.csv", "metrics.csv", "summary.csv", "mask.stl", "mask.obj", "delta.raw"):
            self.assertIn(required, names)
        self.assertGreaterEqual(len(names), 10)
        with open(self.path("a", "metrics.csv"), "rb") as f:
            raw = f.read()
        self.assertNotIn(b"\r", raw)

    def test_pipeline_seed_changes_output(self):
        cfg = self.write_config(SMALL)
        run("pipeline", "--config", cfg, "--seed", "1", "--out", self.path("s1"))
        run("pipeline", "--config", cfg, "--seed", "2", "--out", self.path("s2"))
        with open(self.path("s1", "manifest.json")) as f:
            a = f.read()
        with open(self.path("s2", "manifest.json")) as f:
            b = f.read()
        self.assertNotEqual(a, b)

    def test_ablation_rows(self):
        cfg = self.write_config(dict(SMALL, optimizer={"max_iters": 3}))
        r = run("ablation", "--config", cfg, "--seeds", "5", "--out", self.path("abl"))
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(self.path("abl", "ablation.csv"), newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["variant", "seed", "dice", "iou", "acc", "pre", "sen", "spe",
                                   "hd95", "asd", "status"])
        self.assertEqual([r[0] for r in rows[1:]], ["msssim", "msssim_cscc", "msssim_scc"])
        self.assertTrue(all(r[1] == "5" for r in rows[1:]))


if __name__ == "__main__":
    CLI = os.path.abspath(sys.argv.pop(1))
    unittest.main(verbosity=2)
