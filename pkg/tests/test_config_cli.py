"""Config parsing and the command-line front end.

CLI tests call cli.main() in-process with a scratch output directory; the
ATOMPROBE_* environment is cleared per test so precedence checks are
hermetic.
"""
import re

import numpy as np
import pytest
import yaml

from atomprobe import (ConfigError, cesium_default, cli, config_to_dict,
                       dumps_config, loads_config, species_from_si)

CS = cesium_default()

WEAK_YAML = """
species:
  name: cesium
profile:
  x_start_um: 0.0
  segments:
    - {width_um: 10.0, detuning_per_s: 0.0, rabi_per_s: 1.033e5}
grid:
  v_min_cm_s: 0.2
  v_max_cm_s: 9.0
  n: 6
output:
  directory: .
"""

NUMBER = re.compile(r"^-?\d\.\d{11}e[+-]\d{2,3}$")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("ATOMPROBE_OUT", "ATOMPROBE_SEED", "ATOMPROBE_THREADS"):
        monkeypatch.delenv(name, raising=False)


def write_cfg(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_rows(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [l.split(",") for l in lines[1:] if not l.startswith("#")]
    trailer = [l for l in lines[1:] if l.startswith("#")]
    return header, rows, trailer


# ---------------------------------------------------------------- config

def test_yaml_round_trip_is_semantically_identical():
    cfg = loads_config(WEAK_YAML)
    again = loads_config(dumps_config(cfg))
    assert again == cfg
    assert config_to_dict(again) == config_to_dict(cfg)


def test_exponent_without_sign_still_reads_as_number():
    # YAML 1.1 parses 1.033e5 as a string; the loader must coerce it
    cfg = loads_config(WEAK_YAML)
    assert cfg.profile.segments[0].rabi_per_s == pytest.approx(1.033e5)


def test_unknown_keys_name_their_full_path():
    with pytest.raises(ConfigError, match=r"config\.specie"):
        loads_config("specie: {}")
    with pytest.raises(ConfigError, match=r"grid\.dv"):
        loads_config("grid: {v_min_cm_s: 1, v_max_cm_s: 2, n: 4, dv: 1}")
    with pytest.raises(ConfigError, match=r"profile\.segments\[1\]\.witdh_um"):
        loads_config("""
profile:
  segments:
    - {width_um: 1.0, detuning_per_s: 0.0, rabi_per_s: 0.0}
    - {witdh_um: 1.0, detuning_per_s: 0.0, rabi_per_s: 0.0}
""")


def test_config_validation_errors():
    with pytest.raises(ConfigError, match="not valid YAML"):
        loads_config("profile: [unclosed")
    with pytest.raises(ConfigError, match="nonempty list"):
        loads_config("profile: {segments: []}")
    with pytest.raises(ConfigError, match="expected a number"):
        loads_config("profile: {segments: [{width_um: true, "
                     "detuning_per_s: 0, rabi_per_s: 0}]}")
    with pytest.raises(ConfigError, match="expected 3 entries"):
        loads_config("grid: {v_min_cm_s: 1, v_max_cm_s: 2, n: 3, "
                     "weights: [0.5, 0.5]}")
    with pytest.raises(ConfigError, match="v_min_cm_s < v_max_cm_s"):
        loads_config("grid: {v_min_cm_s: 5, v_max_cm_s: 2, n: 3}")
    with pytest.raises(ConfigError, match="mode"):
        loads_config("wavepacket: {v_mean_cm_s: 1, sigma_x_um: 2, x0_um: -15,"
                     " t_max_us: 10, mode: fancy}")
    with pytest.raises(ConfigError, match="at least 1"):
        loads_config("optimize: {n_segments: 0, total_length_um: 10}")


def test_species_block():
    assert loads_config("").species.to_species() == CS
    with pytest.raises(ConfigError, match="unknown species"):
        loads_config("species: {name: unobtainium}").species.to_species()
    with pytest.raises(ConfigError, match="needs all of"):
        loads_config("species: {name: rubidium, mass_kg: 1.44e-25}")
    custom = loads_config("""
species: {name: rubidium, mass_kg: 1.44316060e-25, gamma_per_s: 3.8e7,
          lambda_nm: 780.0}
""").species.to_species()
    assert custom == species_from_si("rubidium", 1.44316060e-25, 3.8e7, 780.0)


# ------------------------------------------------------------------- cli

def run_cli(tmp_path, command, text, *extra):
    cfg = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    code = cli.main([command, "--config", cfg, "--out", str(out), *extra])
    return code, out


def test_scan_writes_formatted_csv(tmp_path):
    code, out = run_cli(tmp_path, "scan", WEAK_YAML)
    assert code == 0
    header, rows, trailer = read_rows(out / "scan.csv")
    assert header == ["v_cm_per_s", "absorption"]
    assert len(rows) == 6 and not trailer
    for row in rows:
        assert len(row) == 2
        assert all(NUMBER.match(field) for field in row)
    # velocity column is the linspace from the grid block
    vs = [float(r[0]) for r in rows]
    assert vs == pytest.approx(list(np.linspace(0.2, 9.0, 6)), rel=1e-11)
    a = [float(r[1]) for r in rows]
    assert all(0.0 <= x <= 1.0 for x in a)
    assert a[0] > a[-1]   # slower atoms spend longer in the light


def test_detect_matches_scan_for_weak_drive(tmp_path):
    code, out = run_cli(tmp_path, "detect", WEAK_YAML)
    assert code == 0
    header, rows, _ = read_rows(out / "detect.csv")
    assert header == ["v_cm_per_s", "detection_probability"]
    code2, out2 = run_cli(tmp_path, "scan", WEAK_YAML)
    _, rows2, _ = read_rows(out2 / "scan.csv")
    for (v, p), (v2, a) in zip(rows, rows2):
        assert v == v2
        assert abs(float(p) - float(a)) < 2e-3


TRAILER = re.compile(r"# max_abs_diff=(\S+) r_omega=(\S+) r_energy=(\S+) "
                     r"weak_driving_ok=(true|false)$")


def test_validate_trailer_reports_regime(tmp_path):
    # up to 9 cm/s the energy ratio exceeds the 0.2 criterion, so the
    # verdict is false even though the measured difference is tiny
    code, out = run_cli(tmp_path, "validate", WEAK_YAML)
    assert code == 0
    header, rows, trailer = read_rows(out / "validate.csv")
    assert header == ["v_cm_per_s", "A_one_channel", "A_two_channel", "abs_diff"]
    assert len(rows) == 6
    assert len(trailer) == 1
    m = TRAILER.match(trailer[0])
    assert m, trailer[0]
    assert float(m.group(1)) < 0.01
    assert float(m.group(3)) > 0.2
    assert m.group(4) == "false"
    for row in rows:
        assert abs(float(row[1]) - float(row[2])) == pytest.approx(
            float(row[3]), abs=1e-12)

    # capping the grid at 5 cm/s brings both ratios under 0.2
    slow = WEAK_YAML.replace("v_max_cm_s: 9.0", "v_max_cm_s: 5.0")
    cfg = write_cfg(tmp_path, slow, name="slow.yaml")
    out2 = tmp_path / "slow_out"
    assert cli.main(["validate", "--config", cfg, "--out", str(out2)]) == 0
    _, _, trailer2 = read_rows(out2 / "validate.csv")
    m2 = TRAILER.match(trailer2[0])
    assert m2.group(4) == "true"
    assert float(m2.group(1)) < 0.01


def test_propagate_one_and_two_channel_columns(tmp_path):
    base = WEAK_YAML + """
wavepacket:
  v_mean_cm_s: 1.0
  sigma_x_um: 2.0
  x0_um: -15.0
  t_max_us: 50.0
  n_times: 5
"""
    code, out = run_cli(tmp_path, "propagate", base)
    assert code == 0
    header, rows, _ = read_rows(out / "propagate.csv")
    assert header == ["t_us", "N_t", "Pi_per_us"]
    assert len(rows) == 5
    assert float(rows[0][1]) == pytest.approx(1.0, abs=1e-4)

    two = base + "  mode: two_channel\n"
    # indentation above folds mode into the wavepacket block
    assert yaml.safe_load(two)["wavepacket"]["mode"] == "two_channel"
    code, out2 = run_cli(tmp_path, "propagate", two, "--threads", "1")
    assert code == 0
    header2, rows2, _ = read_rows(out2 / "propagate.csv")
    assert header2 == ["t_us", "N_t", "Pi_per_us", "P2"]
    for row in rows2:
        assert float(row[2]) == pytest.approx(CS.gamma * float(row[3]),
                                              rel=1e-9, abs=1e-15)


OPT_YAML = """
grid: {v_min_cm_s: 0.2, v_max_cm_s: 9.0, n: 3}
optimize:
  n_segments: 1
  total_length_um: 10.0
  multistart: 2
  seed: 0
"""


def test_optimize_outputs_and_paste_ready_profile(tmp_path):
    code, out = run_cli(tmp_path, "optimize", OPT_YAML)
    assert code == 0
    for name in ("optimize_profile.csv", "optimize_profile.yaml",
                 "optimize_absorption.csv", "optimize_report.txt"):
        assert (out / name).exists(), name
    report = (out / "optimize_report.txt").read_text(encoding="utf-8")
    assert "converged: true" in report
    assert "mean_absorption: " in report
    assert "detunings_all_negative: true" in report
    header, rows, _ = read_rows(out / "optimize_profile.csv")
    assert header == ["segment", "width_um", "detuning_per_s", "rabi_per_s",
                      "re_v_per_s", "im_v_per_s"]
    assert len(rows) == 1
    assert float(rows[0][5]) < 0.0   # absorbing

    # the yaml snippet must drop straight into a scan config
    snippet = (out / "optimize_profile.yaml").read_text(encoding="utf-8")
    combined = snippet + "grid: {v_min_cm_s: 0.2, v_max_cm_s: 9.0, n: 3}\n"
    cfg2 = write_cfg(tmp_path, combined, name="pasted.yaml")
    out2 = tmp_path / "pasted_out"
    assert cli.main(["scan", "--config", cfg2, "--out", str(out2)]) == 0
    _, scan_rows, _ = read_rows(out2 / "scan.csv")
    _, abs_rows, _ = read_rows(out / "optimize_absorption.csv")
    for got, want in zip(scan_rows, abs_rows):
        assert float(got[1]) == pytest.approx(float(want[1]), abs=1e-10)


def test_optimize_reruns_byte_identical(tmp_path):
    _, out_a = run_cli(tmp_path, "optimize", OPT_YAML)
    out_b = tmp_path / "again"
    cfg = write_cfg(tmp_path, OPT_YAML, name="again.yaml")
    assert cli.main(["optimize", "--config", cfg, "--out", str(out_b),
                     "--threads", "2"]) == 0
    for name in ("optimize_profile.csv", "optimize_profile.yaml",
                 "optimize_absorption.csv", "optimize_report.txt"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_exit_codes(tmp_path, capsys):
    # 2: structurally valid config missing the needed block
    code, _ = run_cli(tmp_path, "scan", "grid: {v_min_cm_s: 1, v_max_cm_s: 2, n: 3}")
    assert code == 2
    assert "'profile' block" in capsys.readouterr().err
    # 2: unreadable config path
    assert cli.main(["scan", "--config", str(tmp_path / "absent.yaml")]) == 2
    # 2: unknown species name
    code, _ = run_cli(tmp_path, "scan",
                      WEAK_YAML.replace("name: cesium", "name: francium"))
    assert code == 2
    # 3: horizon too large for the k-quadrature cap
    code, _ = run_cli(tmp_path, "propagate", WEAK_YAML + """
wavepacket:
  v_mean_cm_s: 1.0
  sigma_x_um: 2.0
  x0_um: -15.0
  t_max_us: 1.0e7
  n_times: 3
""")
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_output_directory_precedence(tmp_path, monkeypatch):
    cfg_dir = tmp_path / "from_config"
    text = WEAK_YAML.replace("directory: .", f"directory: {cfg_dir}")
    cfg = write_cfg(tmp_path, text)

    assert cli.main(["scan", "--config", cfg]) == 0
    assert (cfg_dir / "scan.csv").exists()

    env_dir = tmp_path / "from_env"
    monkeypatch.setenv("ATOMPROBE_OUT", str(env_dir))
    assert cli.main(["scan", "--config", cfg]) == 0
    assert (env_dir / "scan.csv").exists()

    flag_dir = tmp_path / "from_flag"
    assert cli.main(["scan", "--config", cfg, "--out", str(flag_dir)]) == 0
    assert (flag_dir / "scan.csv").exists()


def test_seed_env_and_flag(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, OPT_YAML)
    monkeypatch.setenv("ATOMPROBE_SEED", "5")
    out_env = tmp_path / "env_seed"
    assert cli.main(["optimize", "--config", cfg, "--out", str(out_env)]) == 0
    assert "seed: 5" in (out_env / "optimize_report.txt").read_text()

    out_flag = tmp_path / "flag_seed"
    assert cli.main(["optimize", "--config", cfg, "--out", str(out_flag),
                     "--seed", "7"]) == 0
    assert "seed: 7" in (out_flag / "optimize_report.txt").read_text()


def test_bad_thread_env_is_config_error(tmp_path, monkeypatch):
    monkeypatch.setenv("ATOMPROBE_THREADS", "many")
    code, _ = run_cli(tmp_path, "scan", WEAK_YAML)
    assert code == 2
