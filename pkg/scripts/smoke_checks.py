from __future__ import annotations

import tempfile
from pathlib import Path
import sys

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from dualsci.cli import app
from dualsci.container import verify_container
from typer.testing import CliRunner

SMALL_CONFIG = """
seed = 3

[geometry]
rows = 32
cols = 32
frames = 4

[solver]
iterations = 20
"""


def main() -> None:
    runner = CliRunner()

    with tempfile.TemporaryDirectory() as tmp:
        with runner.isolated_filesystem(temp_dir=tmp):
            cfg = Path("small.toml")
            cfg.write_text(SMALL_CONFIG, encoding="utf-8")

            result = runner.invoke(app, ["init"], catch_exceptions=False)
            assert result.exit_code == 0, result.output
            assert Path(".dualsci/config.toml").exists(), "init must create .dualsci/config.toml"

            steps = [
                ["synth", "--config", str(cfg), "--out", "scene"],
                ["mask-gen", "--config", str(cfg), "--out", "masks"],
                ["simulate", "--config", str(cfg), "--scene", "scene", "--masks", "masks", "--out", "meas"],
                ["amplify", "--config", str(cfg), "--measurement", "meas", "--masks", "masks", "--out", "bundle"],
                ["reconstruct", "--config", str(cfg), "--measurement", "meas", "--masks", "masks",
                 "--algo", "gaptv", "--out", "recon", "--truth", "scene"],
                ["evaluate", "--config", str(cfg), "--truth", "scene", "--estimate", "recon", "--out", "report"],
            ]
            for args in steps:
                result = runner.invoke(app, args, catch_exceptions=False)
                assert result.exit_code == 0, f"{args[0]}: {result.output}"
                assert "config:" in result.output, f"{args[0]} must print its config hash"

            for name in ("scene", "masks", "meas", "bundle", "recon"):
                ok, errors = verify_container(Path(name))
                assert ok, f"{name}: {errors}"
                result = runner.invoke(app, ["verify-artifact", "--in", name], catch_exceptions=False)
                assert result.exit_code == 0, result.output

            assert Path("report/framewise.csv").exists(), "evaluate must write framewise.csv"
            assert Path("recon/residuals.tsv").exists(), "gaptv must record its residual history"
            assert len(Path(".dualsci/audit.jsonl").read_text(encoding="utf-8").splitlines()) >= 8


if __name__ == "__main__":
    main()
    print("smoke_checks: OK")
