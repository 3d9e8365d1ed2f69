from fractions import Fraction as F

import pytest

from dnicheck import formats
from dnicheck.cli import main
from dnicheck.model import BOTTOM
from dnicheck.relations import RelationFamily

COIN = """\
# a query answered by a fair coin
action q query
action r0 response
action r1 response
action d data
action pick hidden
state w
state c
state o0
state o1
initial w
trans w d -> w 1
trans w q -> c 1
trans c pick -> o0 1/2 o1 1/2
trans o0 r0 -> w 1
trans o1 r1 -> w 1
"""

ECHO = """\
action d0 data
action d1 data
action q query
action r0 response
action r1 response
state w0
state w1
state o0
state o1
initial w0
trans w0 d0 -> w0 1
trans w0 d1 -> w1 1
trans w0 q -> o0 1
trans w1 d0 -> w0 1
trans w1 d1 -> w1 1
trans w1 q -> o1 1
trans o0 r0 -> w0 1
trans o1 r1 -> w1 1
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def fields(text):
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)


class TestFormats:
    def test_automaton_round_trip(self):
        aut = formats.parse_automaton(COIN)
        text = formats.emit_automaton(aut)
        again = formats.parse_automaton(text)
        assert formats.emit_automaton(again) == text
        assert again.plts.transitions == aut.plts.transitions
        assert dict(aut.plts.step("c", "pick")) == {"o0": F(1, 2), "o1": F(1, 2)}

    def test_decimal_rejected_with_position(self):
        bad = COIN.replace("o0 1/2 o1 1/2", "o0 0.5 o1 1/2")
        with pytest.raises(formats.FormatError) as err:
            formats.parse_automaton(bad, "coin.txt")
        assert err.value.line == 14 and err.value.column == 20
        assert str(err.value).startswith("coin.txt:14:20:")

    def test_bottom_rejected(self):
        bad = COIN.replace("state o1\n", "state o1\nstate _bot_\n")
        with pytest.raises(formats.FormatError, match="reserved"):
            formats.parse_automaton(bad)

    def test_family_round_trip(self):
        fam = RelationFamily([{("a", "a"), (BOTTOM, BOTTOM)}, {("a", "b")}], F(9, 4), 1)
        text = formats.emit_relation_family(fam)
        again = formats.parse_relation_family(text)
        assert formats.emit_relation_family(again) == text
        assert again.levels == fam.levels and again.step_rho == F(9, 4)

    def test_family_level_count(self):
        with pytest.raises(formats.FormatError):
            formats.parse_relation_family("t 2\nstep_rho 2\nlevel 0\npair a a\n")

    def test_family_set_round_trip(self, tmp_path, capsys):
        code, _, _ = run(capsys, "gen-example", "--t", "1", "--v", "1", "--domain", "0,1",
                         "--p", "1/2", "--out", str(tmp_path))
        assert code == 0
        text = (tmp_path / "families.txt").read_text()
        assert formats.emit_family_set(formats.parse_family_set(text)) == text
        aut_text = (tmp_path / "automaton.txt").read_text()
        assert formats.emit_automaton(formats.parse_automaton(aut_text)) == aut_text

    def test_lift_query_round_trip(self):
        text = "rho 2\npair a x\nnu1 a 1\nnu2 x 1\n"
        assert formats.emit_lift_query(formats.parse_lift_query(text)) == text

    def test_lift_mass_checked(self):
        with pytest.raises(formats.FormatError, match="sums to"):
            formats.parse_lift_query("rho 2\nnu1 a 1/2\nnu2 x 1\n")


class TestCli:
    def test_validate_ok(self, tmp_path, capsys):
        code, out, _ = run(capsys, "validate", write(tmp_path, "coin.txt", COIN))
        assert code == 0 and fields(out)["ok"] == "true"

    def test_validate_violation(self, tmp_path, capsys):
        bad = COIN.replace("trans w d -> w 1\n", "")
        code, out, _ = run(capsys, "validate", write(tmp_path, "coin.txt", bad))
        assert code == 1 and "quasi-input-enabling" in out

    def test_format_error_exit_2(self, tmp_path, capsys):
        bad = COIN.replace("o0 1/2", "o0 0.5")
        code, out, err = run(capsys, "validate", write(tmp_path, "coin.txt", bad))
        assert code == 2 and out == "" and ":14:20:" in err

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "validate", "/nonexistent/file.txt")
        assert code == 2 and "cannot read" in err

    def test_bad_arguments(self, capsys):
        assert run(capsys, "check-dni")[0] == 2

    def test_closure(self, tmp_path, capsys):
        code, out, _ = run(capsys, "closure", write(tmp_path, "coin.txt", COIN),
                           "--state", "w", "--action", "q")
        f = fields(out)
        assert code == 0 and f["nu[o0]"] == "1/2" and f["nu[o1]"] == "1/2"

    def test_check_lift_no_bijection(self, tmp_path, capsys):
        path = write(tmp_path, "lift.txt", "rho 2\npair a x\nnu1 a 1\nnu2 x 1/2\nnu2 y 1/2\n")
        code, out, _ = run(capsys, "check-lift", path)
        assert code == 1 and "no bijection" in fields(out)["reason"]

    def test_check_lift_ok(self, tmp_path, capsys):
        path = write(tmp_path, "lift.txt", "rho 2\npair a x\npair b y\n"
                     "nu1 a 1/3\nnu1 b 2/3\nnu2 x 2/3\nnu2 y 1/3\n")
        code, out, _ = run(capsys, "check-lift", path)
        assert code == 0 and fields(out)["match[a]"] == "x"

    def test_check_dni(self, tmp_path, capsys):
        coin = write(tmp_path, "coin.txt", COIN)
        echo = write(tmp_path, "echo.txt", ECHO)
        code, out, _ = run(capsys, "check-dni", coin, "--rho", "1", "--max-input-len", "2",
                           "--max-obs-len", "3")
        assert code == 0 and fields(out)["maxRatio"] == "1"
        code, out, _ = run(capsys, "check-dni", echo, "--rho", "1024")
        f = fields(out)
        assert code == 1 and f["maxRatio"] == "inf" and "witness.obs" in f

    def test_check_dni_cap(self, tmp_path, capsys):
        echo = write(tmp_path, "echo.txt", ECHO)
        code, _, err = run(capsys, "check-dni", echo, "--rho", "2", "--max-evaluations", "3")
        assert code == 2 and "evaluations" in err

    def test_unwind_and_covered(self, tmp_path, capsys):
        run(capsys, "gen-example", "--t", "2", "--v", "1", "--domain", "0,1", "--p", "1/2",
            "--out", str(tmp_path))
        aut = str(tmp_path / "automaton.txt")
        fams = str(tmp_path / "families.txt")
        code, out, _ = run(capsys, "check-covered", aut, fams)
        assert code == 0 and fields(out)["certifiedRho"] == "16"
        fam_set = formats.parse_family_set((tmp_path / "families.txt").read_text())
        one = next(iter(fam_set.families.values()))
        single = write(tmp_path, "one.txt", formats.emit_relation_family(one))
        assert run(capsys, "check-unwind", aut, single)[0] == 0

    def test_check_unwind_failure_witness(self, tmp_path, capsys):
        aut = write(tmp_path, "coin.txt", COIN)
        fam = write(tmp_path, "fam.txt", "t 0\nstep_rho 1\nlevel 0\npair w o0\n")
        code, out, _ = run(capsys, "check-unwind", aut, fam)
        f = fields(out)
        assert code == 1 and f["failure.reason"] == "action-mismatch"
        assert f["failure.pair"] == "[w,o0]"

    def test_verify_example(self, capsys):
        code, out, _ = run(capsys, "verify-example", "--t", "2", "--v", "1", "--domain", "0,1",
                           "--mech", "count", "--p", "1/2")
        f = fields(out)
        assert code == 0 and f["ok"] == "true" and f["claimedRho"] == "16"

    def test_verify_example_epsilon(self, capsys):
        code, out, _ = run(capsys, "verify-example", "--t", "1", "--v", "1", "--domain", "0,1",
                           "--epsilon", "0.5")
        assert code == 0 and fields(out)["ok"] == "true"

    def test_check_fn_dp(self, capsys):
        args = ("check-fn-dp", "--domain", "a", "--capacity", "2", "--p", "1/2")
        code, out, _ = run(capsys, *args)
        assert code == 0 and fields(out)["worstRatio"] == "2"
        code, out, _ = run(capsys, *args, "--rho", "3/2")
        assert code == 1 and "witness.db1" in fields(out)

    def test_sample_mech_deterministic(self, capsys):
        args = ("sample-mech", "--m", "2", "--center", "1", "--p", "1/2", "--seed", "9",
                "--count", "2000")
        first = run(capsys, *args)
        second = run(capsys, *args)
        assert first == second and first[0] == 0
        f = fields(first[1])
        assert sum(int(v) for k, v in f.items() if k.startswith("freq[")) == 2000

    def test_sample_mech_bad_params(self, capsys):
        assert run(capsys, "sample-mech", "--m", "1", "--center", "3", "--p", "1/2")[0] == 2

    def test_reports_deterministic(self, tmp_path, capsys):
        echo = write(tmp_path, "echo.txt", ECHO)
        assert run(capsys, "check-dni", echo, "--rho", "2") == run(capsys, "check-dni", echo, "--rho", "2")

    def test_compose(self, tmp_path, capsys):
        host = write(tmp_path, "coin.txt", COIN)
        sub = write(tmp_path, "sub.txt", "action flip hidden\nstate in\nstate a\nstate b\n"
                    "initial in\ntrans in flip -> a 1/2 b 1/2\n")
        spec = write(tmp_path, "spec.txt", "host_state c\nhost_action pick\niota o0 a\niota o1 b\n")
        out_path = tmp_path / "m3.txt"
        code, out, _ = run(capsys, "compose", host, spec, sub, "--out", str(out_path))
        assert code == 0 and fields(out)["implements"] == "true"
        composed = formats.parse_automaton(out_path.read_text())
        assert dict(composed.plts.step("c", "hdd[c]")) == {"sub[c]/in": 1}
        assert run(capsys, "validate", str(out_path))[0] == 0

    def test_compose_not_implementing(self, tmp_path, capsys):
        host = write(tmp_path, "coin.txt", COIN)
        sub = write(tmp_path, "sub.txt", "action flip hidden\nstate in\nstate a\nstate b\n"
                    "initial in\ntrans in flip -> a 1/3 b 2/3\n")
        spec = write(tmp_path, "spec.txt", "host_state c\nhost_action pick\niota o0 a\niota o1 b\n")
        code, out, _ = run(capsys, "compose", host, spec, sub)
        assert code == 1 and fields(out)["implements"] == "false"
