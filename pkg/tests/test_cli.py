"""Command-line interface: exit codes, file round-trips, determinism."""

import pytest

from bbpda.cli import main
from bbpda.ncm import parse_machine
from bbpda.system import parse_system

POP = """
states p q
symbols X Y
actions a b
flavor eps-popping
rule p X a -> p
rule q X a -> q
rule p Y b -> p X
rule q Y b -> q X
"""

AB = """
states p q
symbols X
actions a b
flavor eps-popping
rule p X a -> p
rule q X a -> q
rule q X b -> q
"""

GROWING = """
states p
symbols X
actions a
rule p X a -> p X X
"""

MACHINE = "1: inc c1 goto 2\n2: halt\n"


@pytest.fixture()
def pop_file(tmp_path):
    path = tmp_path / "pop.sys"
    path.write_text(POP)
    return str(path)


@pytest.fixture()
def ab_file(tmp_path):
    path = tmp_path / "ab.sys"
    path.write_text(AB)
    return str(path)


@pytest.fixture()
def machine_file(tmp_path):
    path = tmp_path / "m.ncm"
    path.write_text(MACHINE)
    return str(path)


def test_check_equivalent_exit_zero(pop_file, capsys):
    assert main(["check", pop_file, "p Y (1, 1)", "q Y (1, 1)"]) == 0
    assert "equivalent" in capsys.readouterr().out


def test_check_inequivalent_exit_one(ab_file, capsys):
    assert main(["check", ab_file, "p X (1, 1)", "q X (1, 1)"]) == 1
    out = capsys.readouterr().out
    assert "inequivalent" in out


def test_check_unknown_exit_two(tmp_path, capsys):
    path = tmp_path / "grow.sys"
    path.write_text(GROWING)
    code = main(["check", str(path), "p X (1)", "p X X (1)", "--budget", "10"])
    assert code == 2


def test_check_bounded_schedule_refutes(tmp_path):
    path = tmp_path / "grow2.sys"
    path.write_text(
        """
states p q
symbols X
actions a b
rule p X a -> p X X
rule q X a -> q X X
rule q X b -> q
"""
    )
    code = main(
        ["check", str(path), "p X (1)", "q X (1)", "--budget", "10",
         "--depth-schedule", "1,2"]
    )
    assert code == 1


def test_usage_error_exit_64(pop_file):
    assert main(["check", pop_file, "p Y (1, 1)"]) == 64  # missing right term
    assert main(["no-such-command"]) == 64
    assert main(["check", "/nonexistent/file", "p", "q"]) == 64
    assert main(
        ["check", pop_file, "p Y (1, 1)", "q Y (1, 1)", "--depth-schedule", "4,2"]
    ) == 64


def test_parse_error_exit_64(pop_file, capsys):
    assert main(["check", pop_file, "p Z (1, 1)", "q Y (1, 1)"]) == 64
    assert "error:" in capsys.readouterr().err


def test_tableau_success_and_failure(pop_file, capsys):
    assert main(["tableau", pop_file, "p Y (1, 1)", "q Y (1, 1)"]) == 0
    capsys.readouterr()
    assert main(["tableau", pop_file, "p X (1, 2)", "q X (1, 2)"]) == 2
    assert "unknown" in capsys.readouterr().out


def test_tableau_dot_output(pop_file, tmp_path):
    out = tmp_path / "t.dot"
    code = main(
        ["tableau", pop_file, "p Y (1, 1)", "q Y (1, 1)", "--format", "dot",
         "--output", str(out)]
    )
    assert code == 0
    assert out.read_text().startswith("digraph")


def test_game_solver_exit_codes(ab_file):
    assert main(["game", ab_file, "p X (1, 1)", "q X (1, 1)", "--depth", "4"]) == 1
    # survival is evidence only, never a proof: exit 2
    assert main(["game", ab_file, "q X (1, 1)", "q X (1, 1)", "--depth", "4"]) == 2


def test_game_script_play(ab_file, tmp_path, capsys):
    script = tmp_path / "play.script"
    script.write_text("A left a -> 1\nD eps* a -> 1\n")
    code = main(
        ["game", ab_file, "q X (1, 2)", "q X (1, 2)", "--script", str(script),
         "--max-rounds", "1"]
    )
    assert code == 0
    assert "winner" in capsys.readouterr().out


def test_lts_output_round_trip(pop_file, capsys):
    assert main(["lts", pop_file, "p Y (1, 1)"]) == 0
    out = capsys.readouterr().out
    assert "p Y (1, 1)" in out


def test_lts_exceeded_exit_two(tmp_path, capsys):
    path = tmp_path / "grow.sys"
    path.write_text(GROWING)
    assert main(["lts", str(path), "p X (1)", "--budget", "5"]) == 2
    assert "exceeded" in capsys.readouterr().out


def test_compile_round_trip(machine_file, tmp_path):
    out = tmp_path / "compiled.sys"
    inv = tmp_path / "compiled.inv"
    code = main(
        ["compile-ncm", machine_file, "--output", str(out), "--inventory", str(inv)]
    )
    assert code == 0
    # the written system file re-parses, and re-emitting it is bit-identical
    text = out.read_text()
    system = parse_system(text)
    from bbpda.system import format_system

    assert format_system(system) == text
    inventory = inv.read_text()
    assert inventory.startswith("root-pair ")
    assert "symbol bot" in inventory


def test_machine_file_round_trip(machine_file):
    text = open(machine_file).read()
    machine = parse_machine(text)
    assert parse_machine(machine.format()).instructions == machine.instructions


def test_outputs_deterministic(pop_file, machine_file, capsys):
    runs = []
    for _ in range(2):
        code = main(["check", pop_file, "p Y (1, 1)", "q Y (1, 1)"])
        runs.append((code, capsys.readouterr().out))
    assert runs[0] == runs[1]
    runs = []
    for _ in range(2):
        code = main(["compile-ncm", machine_file])
        runs.append((code, capsys.readouterr().out))
    assert runs[0] == runs[1]


def test_prop2_small(machine_file, capsys):
    code = main(["prop2", machine_file, "--max-counter", "1"])
    assert code == 0
    assert "statement" in capsys.readouterr().out.lower()


def test_reduction_check_halting_machine(tmp_path, capsys):
    path = tmp_path / "halting.ncm"
    path.write_text("1: ifz c1 goto 2 else dec goto 2\n2: halt\n")
    code = main(
        ["reduction-check", str(path), "--depth-schedule", "4,8,16"]
    )
    assert code == 1
    assert "attacker wins at depth" in capsys.readouterr().out
