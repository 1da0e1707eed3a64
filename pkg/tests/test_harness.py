"""Study configuration, error metric, rate table, and file outputs."""

import numpy as np
import pytest

import hhonl.solver as solver_mod
from hhonl.harness import (
    FAMILIES,
    ConvergenceRecord,
    DegenerateExactSolutionError,
    InvalidSequenceError,
    StudyConfig,
    StudyConfigError,
    build_mesh,
    convergence_rate,
    data_directory,
    format_table,
    gradient_error,
    read_csv,
    report_h,
    run_study,
    shipped_mesh_files,
    write_csv,
    write_plot_data,
)
from hhonl.hho import HHOSpace
from hhonl.mesh import mesh_size
from hhonl.solver import NonlinearProblem, register_problem


def test_family_list_and_config_validation():
    assert FAMILIES == ("cartesian", "triangular", "hexagonal-files", "kershaw-files")
    cfg = StudyConfig("cartesian", [2, 4], [0, 1.0])
    assert cfg.degrees == [0, 1]
    with pytest.raises(StudyConfigError, match="unknown family"):
        StudyConfig("voronoi", [2, 4], [1])
    with pytest.raises(StudyConfigError, match="at least 2"):
        StudyConfig("cartesian", [8], [1])
    with pytest.raises(StudyConfigError, match="0..3"):
        StudyConfig("cartesian", [2, 4], [4])


def test_rate_formula_on_exact_quadruple():
    rows = [ConvergenceRecord("cartesian", 1, 0.1, 1e-2),
            ConvergenceRecord("cartesian", 1, 0.025, 6.25e-4)]
    out = convergence_rate(rows)
    assert out[0].rate is None
    assert out[1].rate == pytest.approx(2.0, abs=1e-12)


def test_rate_formula_spot_values():
    # Hand-checked triples: rate = log(e1/e0) / log(h1/h0).
    rows = [ConvergenceRecord("x", 1, 0.0156, 0.3795e-2),
            ConvergenceRecord("x", 1, 0.0078, 0.9442e-3)]
    assert convergence_rate(rows)[1].rate == pytest.approx(2.007, abs=5e-4)
    rows = [ConvergenceRecord("x", 3, 0.0156, 0.2857e-6),
            ConvergenceRecord("x", 3, 0.0078, 0.1669e-7)]
    assert convergence_rate(rows)[1].rate == pytest.approx(4.098, abs=1e-3)


def test_rate_requires_strictly_decreasing_h():
    rows = [ConvergenceRecord("x", 1, 0.1, 1.0)]
    with pytest.raises(InvalidSequenceError):
        convergence_rate(rows)
    rows = [ConvergenceRecord("x", 1, 0.1, 1.0),
            ConvergenceRecord("x", 1, 0.1, 0.5)]
    with pytest.raises(InvalidSequenceError, match="strictly"):
        convergence_rate(rows)


def test_gradient_error_vanishes_on_reconstructed_polynomials():
    # G I p equals grad p for p of degree k+1, so the metric hits zero.
    mesh = build_mesh("cartesian", 3)
    space = HHOSpace(mesh, 1)
    v = space.interpolate(lambda p: p[:, 0] ** 2 - 0.5 * p[:, 1] ** 2 + p[:, 0])

    def grad(p):
        return np.column_stack((2.0 * p[:, 0] + 1.0, -p[:, 1]))

    assert gradient_error(v, grad) <= 1e-12


def test_gradient_error_rejects_zero_exact_gradient():
    mesh = build_mesh("cartesian", 2)
    space = HHOSpace(mesh, 1)
    v = space.interpolate(lambda p: p[:, 0])
    with pytest.raises(DegenerateExactSolutionError):
        gradient_error(v, lambda p: np.zeros((len(p), 2)))


def test_build_mesh_generated_families():
    assert build_mesh("cartesian", 4).num_cells == 16
    assert build_mesh("triangular", 4).num_cells == 32
    with pytest.raises(StudyConfigError, match="unknown family"):
        build_mesh("random", 4)


def test_shipped_mesh_files_and_indices():
    for family, cells_level1 in (("hexagonal-files", 68), ("kershaw-files", 144)):
        files = shipped_mesh_files(family)
        assert len(files) == 4
        assert [f.name for f in files] == sorted(f.name for f in files)
        mesh = build_mesh(family, 1)
        assert mesh.num_cells == cells_level1
        assert mesh.cell_areas.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(StudyConfigError, match="not a file-backed"):
        shipped_mesh_files("cartesian")
    with pytest.raises(StudyConfigError, match="shipped levels"):
        build_mesh("hexagonal-files", 9)


def test_build_mesh_accepts_paths(tmp_path):
    # A bare file name resolves against the data directory.
    mesh = build_mesh("kershaw-files", "kershaw_2.json")
    assert mesh.num_cells == 576
    # Absolute paths are used as is.
    src = data_directory() / "hexagonal_1.json"
    target = tmp_path / "copy.json"
    target.write_bytes(src.read_bytes())
    assert build_mesh("hexagonal-files", target).num_cells == 68


def test_data_directory_override(monkeypatch, tmp_path):
    (tmp_path / "hexagonal_1.json").write_bytes(
        (data_directory() / "hexagonal_1.json").read_bytes())
    monkeypatch.setenv("HHO_DATA_DIR", str(tmp_path))
    assert data_directory() == tmp_path
    files = shipped_mesh_files("hexagonal-files")
    assert files == [tmp_path / "hexagonal_1.json"]
    assert shipped_mesh_files("kershaw-files") == []


def test_report_h_convention():
    mesh = build_mesh("cartesian", 8)
    assert report_h("cartesian", 8, mesh) == pytest.approx(0.125)
    tri = build_mesh("triangular", 8)
    assert report_h("triangular", 8, tri) == pytest.approx(mesh_size(tri))


def test_run_study_collects_records_and_rates():
    cfg = StudyConfig("cartesian", [2, 4, 8], [1])
    result = run_study(cfg)
    assert not result.failures
    assert len(result.records) == 3
    hs = [r.h for r in result.records]
    assert hs == [0.5, 0.25, 0.125]
    errs = [r.error for r in result.records]
    assert errs[0] > errs[1] > errs[2]
    assert result.records[0].rate is None
    for r in result.records[1:]:
        assert 1.5 <= r.rate <= 2.6
    for r in result.records:
        assert 1 <= r.newton_iters <= 4
    assert result.elapsed > 0.0


def test_run_study_writes_csv_and_plot_files(tmp_path):
    cfg = StudyConfig("cartesian", [2, 4], [0, 1], out_dir=tmp_path)
    result = run_study(cfg)
    assert result.csv_path == tmp_path / "study.csv"
    text = result.csv_path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "family,k,h,error,rate,newton_iters"
    parsed = read_csv(result.csv_path)
    assert len(parsed) == len(result.records)
    # Write -> read -> write is byte stable.
    again = tmp_path / "again.csv"
    write_csv(parsed, again)
    assert again.read_text(encoding="utf-8") == text
    names = {p.name for p in result.plot_paths}
    assert names == {"cartesian_k0.dat", "cartesian_k1.dat"}
    for p in result.plot_paths:
        lines = p.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# h  relative_gradient_error"
        assert len(lines) == 3
    script = result.script_path.read_text(encoding="utf-8")
    assert "set logscale xy" in script
    for name in names:
        assert name in script


def test_run_study_isolates_column_failures():
    # Level 9 does not exist, so each degree column truncates there but
    # still reports the completed levels with rates.
    cfg = StudyConfig("hexagonal-files", [1, 2, 9], [0, 1])
    result = run_study(cfg)
    assert len(result.failures) == 2
    for failure in result.failures:
        assert failure.level == 9
        assert "shipped levels" in failure.message
    by_k = {}
    for r in result.records:
        by_k.setdefault(r.k, []).append(r)
    for k, column in by_k.items():
        assert len(column) == 2
        assert column[1].rate is not None


def test_run_study_requires_an_exact_gradient():
    register_problem("no-exact-test", lambda: NonlinearProblem(
        a=lambda x, y, z: z,
        a_z=lambda x, y, z: np.broadcast_to(np.eye(2), (len(x), 2, 2)),
        a_y=lambda x, y, z: np.zeros((len(x), 2)),
        f=lambda x, y, z: np.zeros(len(x)),
        f_z=lambda x, y, z: np.zeros((len(x), 2)),
        f_y=lambda x, y, z: np.zeros(len(x))))
    try:
        cfg = StudyConfig("cartesian", [2, 4], [1], problem="no-exact-test")
        with pytest.raises(StudyConfigError, match="exact gradient"):
            run_study(cfg)
    finally:
        solver_mod._REGISTRY.pop("no-exact-test", None)


def test_read_csv_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    with pytest.raises(StudyConfigError, match="missing header"):
        read_csv(path)


def test_format_table_layout():
    records = [ConvergenceRecord("cartesian", 1, 0.5, 1.5e-2, None, 3),
               ConvergenceRecord("cartesian", 1, 0.25, 3.9e-3, 1.94, 3)]
    table = format_table(records)
    lines = table.splitlines()
    assert lines[0].split() == ["family", "k", "h", "error", "rate", "iters"]
    assert "---" in lines[1]
    assert "1.940" in lines[2]


def test_write_plot_data_groups_by_family_and_degree(tmp_path):
    records = [ConvergenceRecord("cartesian", 1, 0.5, 1e-2),
               ConvergenceRecord("cartesian", 1, 0.25, 2.5e-3, 2.0),
               ConvergenceRecord("triangular", 2, 0.5, 1e-3),
               ConvergenceRecord("triangular", 2, 0.25, 1.2e-4, 3.0)]
    paths, script = write_plot_data(records, tmp_path)
    assert [p.name for p in paths] == ["cartesian_k1.dat", "triangular_k2.dat"]
    assert script.name == "convergence.gp"
