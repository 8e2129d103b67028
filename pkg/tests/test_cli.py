import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seadyn import cli
from seadyn import config as cfg
from seadyn.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TWO_LEVEL = {
    "hamiltonian": {"type": "two_level", "E1": 0.0, "E2": 1.0},
    "initial_state": {"type": "gibbs", "beta": math.log(3)},
    "integrator": {"t_end": 2.0, "record_every": 0.5},
}
RANDOM_D4 = {
    "hamiltonian": {"type": "diag", "values": [0.0, 0.4, 1.1, 2.0]},
    "initial_state": {"type": "random_mixed", "rank": 4, "seed": 11},
    "integrator": {"t_end": 2.0, "record_every": 0.25},
    "outputs": {"prefix": "r", "states_json": True},
}


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def write_config(tmp_path, data, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


class TestSchema:
    @pytest.mark.parametrize("data, path", [
        ({"hamiltonian": {"type": "diag", "values": "x"}}, "$.hamiltonian.values"),
        ({"hamiltonian": {"type": "oscillator", "levels": 1, "omega": 1.0}}, "$.hamiltonian.levels"),
        ({"hamiltonian": {"type": "two_level", "E1": 0, "E2": 1},
          "initial_state": {"type": "random_mixed", "rank": 2}}, "$.initial_state"),
        ({"hamiltonian": {"type": "two_level", "E1": 0, "E2": 1}, "integrator": {"t_end": -1}},
         "$.integrator.t_end"),
        ({"hamiltonian": {"type": "two_level", "E1": 0, "E2": 1}, "bogus": 1}, "$"),
    ])
    def test_field_path(self, data, path):
        with pytest.raises(ConfigError) as info:
            cfg.validate(data)
        assert info.value.path == path

    def test_missing_seed_is_named(self):
        with pytest.raises(ConfigError, match="seed"):
            cfg.validate({"hamiltonian": {"type": "two_level", "E1": 0, "E2": 1},
                          "initial_state": {"type": "random_mixed", "rank": 2}})

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError) as info:
            cfg.parse({"hamiltonian": {"type": "two_level", "E1": 0, "E2": 1},
                       "initial_state": {"type": "random_mixed", "rank": 2, "seed": 1, "dim": 3}})
        assert info.value.path.startswith("$.initial_state")

    def test_rank_exceeds_dimension(self):
        with pytest.raises(ConfigError) as info:
            cfg.parse({"hamiltonian": {"type": "two_level", "E1": 0, "E2": 1},
                       "initial_state": {"type": "random_mixed", "rank": 3, "seed": 1}})
        assert info.value.path == "$.initial_state.rank"

    def test_non_hermitian_hamiltonian(self):
        with pytest.raises(ConfigError) as info:
            cfg.parse({"hamiltonian": {"type": "explicit", "matrix": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]}})
        assert info.value.path == "$.hamiltonian.matrix"

    def test_shipped_configs_validate(self):
        for p in sorted(CONFIGS.glob("*.json")):
            cfg.parse(cfg.load(p))


class TestRandomMixed:
    def test_rank_one_is_pure(self):
        rho = cfg.random_mixed(4, 1, 5).entries
        assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-12)

    def test_deterministic(self):
        a = cfg.random_mixed(4, 4, 2024).entries
        b = cfg.random_mixed(4, 4, 2024).entries
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, cfg.random_mixed(4, 4, 2025).entries)

    def test_rank_two_in_four(self):
        w = np.linalg.eigvalsh(cfg.random_mixed(4, 2, 9).entries)
        assert np.sum(w > 1e-12) == 2

    @settings(max_examples=25)
    @given(st.integers(1, 6).flatmap(lambda d: st.tuples(st.just(d), st.integers(1, d))),
           st.integers(0, 2 ** 64 - 1))
    def test_exact_rank_and_trace(self, dim_rank, seed):
        d, r = dim_rank
        rho = cfg.random_mixed(d, r, seed).entries
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-14)
        assert np.linalg.matrix_rank(rho, tol=1e-12) == r

    def test_rejects_bad_rank(self):
        with pytest.raises(ValueError):
            cfg.random_mixed(3, 0, 1)


class TestCommands:
    def test_evolve_gibbs_is_stationary(self, tmp_path):
        res = cli.run("evolve", TWO_LEVEL, tmp_path)
        assert res.status == cli.EXIT_OK
        header, data = read_csv(tmp_path / "trajectory.csv")
        assert header[:6] == ["t", "trace", "energy", "entropy", "entropy_production", "zeta"]
        assert header[6:] == ["eig_1", "eig_2"]
        assert res.summary["status"] == "stationary"
        assert np.ptp(data[:, 3]) < 1e-9
        np.testing.assert_allclose(data[:, 5], math.log(3) / 2, atol=1e-10)

    def test_constraint_columns(self, tmp_path):
        data = dict(RANDOM_D4, constraints=[[[[1, 0], [0, 0], [0, 0], [0, 0]], [[0, 0], [0, 0], [0, 0], [0, 0]],
                                             [[0, 0], [0, 0], [0, 0], [0, 0]], [[0, 0], [0, 0], [0, 0], [0, 0]]]])
        cli.run("evolve", data, tmp_path)
        header, rows = read_csv(tmp_path / "r.csv")
        assert header[-1] == "c_1"
        assert np.ptp(rows[:, -1]) < 1e-7

    def test_equilibrium(self, tmp_path):
        res = cli.run("equilibrium", cfg.load(CONFIGS / "equilibrium.json"), tmp_path)
        payload = json.loads((tmp_path / "trajectory_equilibrium.json").read_text())
        assert payload["beta"] == pytest.approx(-math.log(3), abs=1e-10)
        assert res.summary["logZ"] == payload["logZ"]

    def test_equilibrium_infeasible_energy(self, tmp_path):
        data = {"hamiltonian": {"type": "two_level", "E1": 0, "E2": 1}, "equilibrium": {"energy": 2.0}}
        with pytest.raises(ConfigError) as info:
            cli.run("equilibrium", data, tmp_path)
        assert info.value.path == "$.equilibrium.energy"

    def test_contact_reaches_common_beta(self, tmp_path):
        data = cfg.load(CONFIGS / "contact.json")
        res = cli.run("contact", data, tmp_path)
        assert res.status == cli.EXIT_OK
        assert res.summary["final_beta_1"] == pytest.approx(res.summary["final_beta_2"], abs=1e-4)
        header, rows = read_csv(tmp_path / "contact_contact.csv")
        total = rows[:, header.index("energy_1")] + rows[:, header.index("energy_2")]
        assert np.ptp(total) <= 1e-7

    def test_compare_rates_within_two_percent(self, tmp_path):
        cli.run("compare", cfg.load(CONFIGS / "compare.json"), tmp_path)
        header, rows = read_csv(tmp_path / "compare_compare_rates.csv")
        assert np.max(np.abs(rows[:, header.index("rel_error")])) < 0.02

    def test_linearize(self, tmp_path):
        res = cli.run("linearize", cfg.load(CONFIGS / "compare.json"), tmp_path)
        header, rows = read_csv(tmp_path / "compare_rates.csv")
        lam = rows[:, 2].reshape(4, 4)
        np.testing.assert_allclose(lam, lam.T)
        np.testing.assert_allclose(np.diag(lam), res.summary["sigma_eq"])
        _, lin = read_csv(tmp_path / "compare_linear.csv")
        assert lin.shape[0] == 41

    def test_linearize_rejects_off_shell_state(self, tmp_path):
        data = dict(TWO_LEVEL, linearize={"beta": 0.2})
        with pytest.raises(ConfigError) as info:
            cli.run("linearize", data, tmp_path)
        assert info.value.path == "$.linearize.beta"

    def test_contact_requires_composite(self, tmp_path):
        with pytest.raises(ConfigError):
            cli.run("contact", TWO_LEVEL, tmp_path)


class TestReproducibility:
    def test_byte_identical_csv(self, tmp_path):
        cli.run("evolve", RANDOM_D4, tmp_path / "a")
        cli.run("evolve", RANDOM_D4, tmp_path / "b")
        assert (tmp_path / "a" / "r.csv").read_bytes() == (tmp_path / "b" / "r.csv").read_bytes()

    def test_csv_floats_round_trip(self, tmp_path):
        cli.run("evolve", RANDOM_D4, tmp_path)
        text = (tmp_path / "r.csv").read_text().splitlines()[1].split(",")
        for tok in text:
            assert repr(float(tok)) == tok
            assert len(tok.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17

    def test_states_json_round_trip(self, tmp_path):
        sc = cfg.parse(RANDOM_D4)
        traj = cli.evolve(sc.initial, sc.model, sc.integrator)
        cli.write_states_json(traj.times, traj.states, tmp_path / "s.json")
        times, states = cli.read_states_json(tmp_path / "s.json")
        np.testing.assert_array_equal(times, traj.times)
        assert np.max(np.abs(states - traj.states)) <= 1e-15

    def test_initial_state_reingests(self, tmp_path):
        cli.run("evolve", RANDOM_D4, tmp_path)
        _, states = cli.read_states_json(tmp_path / "r_states.json")
        explicit = {**RANDOM_D4, "initial_state": {"type": "explicit", "matrix": cfg.matrix_to_pairs(states[0])}}
        assert np.max(np.abs(cfg.parse(explicit).initial - states[0])) <= 1e-15

    def test_seed_override(self, tmp_path):
        overridden = cfg.override_seeds(RANDOM_D4, 7)
        assert overridden["initial_state"]["seed"] == 7
        assert RANDOM_D4["initial_state"]["seed"] == 11
        cli.run("evolve", RANDOM_D4, tmp_path / "a", seed=7)
        cli.run("evolve", {**RANDOM_D4, "initial_state": {**RANDOM_D4["initial_state"], "seed": 7}}, tmp_path / "b")
        assert (tmp_path / "a" / "r.csv").read_bytes() == (tmp_path / "b" / "r.csv").read_bytes()


class TestExitCodes:
    def test_success(self, tmp_path):
        p = write_config(tmp_path, TWO_LEVEL)
        assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 0

    def test_config_error(self, tmp_path, caplog):
        p = write_config(tmp_path, {"hamiltonian": {"type": "diag", "values": "x"}})
        assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path)]) == 2
        assert "$.hamiltonian.values" in caplog.text

    def test_unreadable_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path)]) == 2

    def test_seed_out_of_range(self, tmp_path):
        p = write_config(tmp_path, RANDOM_D4)
        assert cli.main(["evolve", "--config", str(p), "--seed", str(2 ** 64), "--out", str(tmp_path)]) == 2

    def test_integration_failure_flushes_partial_output(self, tmp_path):
        data = {**RANDOM_D4, "sigma_policy": {"name": "constant", "value": 1e16}}
        p = write_config(tmp_path, data)
        assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 3
        _, rows = read_csv(tmp_path / "r.csv")
        assert rows.shape[0] >= 1

    def test_invariant_violation(self, tmp_path):
        data = {**RANDOM_D4, "integrator": {"t_end": 5.0, "rel_tol": 1e-2, "abs_tol": 1e-2}}
        p = write_config(tmp_path, data)
        assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 4

    def test_equilibrium_prints_json(self, tmp_path, capsys):
        assert cli.main(["equilibrium", "--config", str(CONFIGS / "equilibrium.json"), "--out", str(tmp_path)]) == 0
        assert json.loads(capsys.readouterr().out)["beta"] == pytest.approx(-math.log(3), abs=1e-10)

    def test_console_script(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "seadyn.cli", "evolve", "--config",
                               str(CONFIGS / "two_level_gibbs.json"), "--out", str(tmp_path), "--quiet"],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "two_level.csv").exists()
        assert (tmp_path / "two_level_states.json").exists()
