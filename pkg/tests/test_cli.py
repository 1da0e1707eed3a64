"""Command-line interface: argument handling, outputs, exit codes."""

import json

import pytest

from hhonl.cli import build_parser, main
from hhonl.mesh import generate_cartesian, write_mesh


def test_no_command_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_solve_requires_a_mesh_source():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2


def test_solve_on_a_generated_mesh(capsys):
    code = main(["solve", "--family", "cartesian", "--level", "4", "--k", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert "problem: mean-curvature" in out
    assert "mesh: 16 cells" in out
    assert "newton: converged in" in out
    assert "relative gradient error:" in out


def test_solve_missing_mesh_file(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--mesh", "/no/such/mesh.json"])
    assert info.value.code == 2
    assert "not found" in capsys.readouterr().err


def test_solve_unknown_problem_returns_1(capsys):
    code = main(["solve", "--family", "cartesian", "--level", "2",
                 "--problem", "nope"])
    assert code == 1
    assert "error: unknown problem" in capsys.readouterr().err


def test_mesh_info_reports_statistics(tmp_path, capsys):
    path = tmp_path / "grid.json"
    write_mesh(generate_cartesian(3), path)
    code = main(["mesh-info", str(path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "vertices: 16" in out
    assert "cells: 9" in out
    assert "total area: 1.000000000000" in out
    assert "orientation repairs: 0" in out


def test_mesh_info_missing_file(capsys):
    with pytest.raises(SystemExit) as info:
        main(["mesh-info", "/no/such/file.typ2"])
    assert info.value.code == 2
    assert "not found" in capsys.readouterr().err


def test_mesh_info_format_mismatch_returns_1(tmp_path, capsys):
    path = tmp_path / "grid.json"
    path.write_text("not a mesh", encoding="utf-8")
    code = main(["mesh-info", str(path)])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_study_without_arguments_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["study"])
    assert info.value.code == 2
    err = capsys.readouterr().err
    for flag in ("--family", "--k", "--levels"):
        assert flag in err


def test_study_writes_outputs(tmp_path, capsys):
    code = main(["study", "--family", "cartesian", "--k", "1",
                 "--levels", "2,4", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "family" in out.splitlines()[0]
    assert (tmp_path / "study.csv").exists()
    assert (tmp_path / "convergence.gp").exists()
    assert "wrote" in out


def test_study_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({"family": "cartesian", "levels": [2, 4],
                               "degrees": [0]}), encoding="utf-8")
    code = main(["study", "--config", str(cfg)])
    out = capsys.readouterr().out
    assert code == 0
    assert "cartesian" in out
    with pytest.raises(SystemExit) as info:
        main(["study", "--config", str(tmp_path / "absent.json")])
    assert info.value.code == 2


def test_study_failures_exit_nonzero(capsys):
    code = main(["study", "--family", "hexagonal-files", "--k", "0",
                 "--levels", "1,2,9"])
    captured = capsys.readouterr()
    assert code == 1
    assert "failed:" in captured.err
    assert "hexagonal-files" in captured.out


def test_level_list_accepts_paths_and_integers():
    parser = build_parser()
    args = parser.parse_args(["study", "--family", "kershaw-files",
                              "--k", "1,2", "--levels", "kershaw_1.json,2"])
    assert args.levels == ["kershaw_1.json", 2]
    assert args.k == [1, 2]


def test_degree_list_rejects_garbage():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["study", "--family", "cartesian",
                                   "--k", "1,x", "--levels", "2,4"])
    assert info.value.code == 2
