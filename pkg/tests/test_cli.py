import numpy as np
import pytest

from noma_rrm.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, main
from noma_rrm.neural import load_model
from noma_rrm.pipeline import load_dataset

SMALL = "n_labeled = 4\nn_unlabeled = 4\nn_test = 3\nn_fig4 = 1\npower_epochs = 2\n" \
        "subchannel_epochs = 2\npool_size = 2\nt_max = 1\n"


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return str(path)


def test_gen_and_train_from_file(tmp_path, cfg):
    out = tmp_path / "o"
    assert main(["gen", "--kind", "power", "--n", "2", "--config", cfg, "--out", str(out)]) == EXIT_OK
    ds = load_dataset(out / "dataset_power.bin")
    assert ds.kind == "power" and len(ds) == 8
    assert main(["train", "power-dnn", "--data", str(out / "dataset_power.bin"),
                 "--config", cfg, "--out", str(out)]) == EXIT_OK
    m = load_model(out / "power_dnn.ckpt")
    assert m.input_dim == ds.feature_dim
    assert main(["train", "subchannel-dnn", "--data", str(out / "dataset_power.bin"),
                 "--out", str(out)]) == EXIT_CONFIG


def test_cotrain_and_eval(tmp_path, cfg):
    out = tmp_path / "o"
    assert main(["train", "cotrain", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert (out / "cotrain_h1.ckpt").exists() and (out / "cotrain_rounds.csv").exists()
    assert main(["eval", "fig6", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert (out / "fig6_summary.csv").exists()


def test_oracle_command(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle", "--seed", "3", "--out", str(out)]) == EXIT_OK
    rows = (out / "allocation.csv").read_text().splitlines()
    assert rows[0] == "bs,user,subchannel,power_w" and len(rows) == 25


def test_exit_codes(tmp_path, cfg):
    bad = tmp_path / "bad.cfg"
    bad.write_text("n_users = -3\n")
    assert main(["oracle", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    bad.write_text("mystery = 1\n")
    assert main(["oracle", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["oracle", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["eval", "fig99"])
    assert info.value.code == EXIT_CONFIG
    assert main(["train", "power-dnn", "--data", str(tmp_path / "nope.bin"), "--out", str(tmp_path)]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["oracle", "--out", str(blocker / "sub")]) == EXIT_IO
    # more users than the subchannels of all BSs can hold
    tight = tmp_path / "tight.cfg"
    tight.write_text("n_users = 40\nn_subchannels = 2\nn_small = 1\n")
    assert main(["oracle", "--config", str(tight), "--out", str(tmp_path / "t")]) == EXIT_INFEASIBLE
