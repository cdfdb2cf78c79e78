"""Unit tests for the figure renderer, on synthetic CSVs only."""

import numpy as np
import pytest

from tablefigs import FigureSpec, SchemaMismatch, render
from tablefigs.cli import main


def write_csv(path, header, rows):
    lines = [header]
    lines += [",".join(f"{v:.17g}" for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture()
def convergence_csv(tmp_path):
    n = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    lam = np.pi**2 * (n + 1) ** 2
    err = 14.0 / lam
    m_norm = 14.1 - 1.0 / n
    bound = 14.1 / lam
    path = tmp_path / "conv.csv"
    write_csv(path, "n,lambda_next,err,m_norm,bound", zip(n, lam, err, m_norm, bound))
    return path, (n, lam, err, m_norm, bound)


@pytest.fixture()
def sweep_csv(tmp_path):
    c = np.arange(0.0, 22.0, 2.0)
    err = 0.002 + 0.0005 * c  # exact line, so the fit must be exact too
    m_final = 14.0 + 0.1 * c
    path = tmp_path / "sweep.csv"
    write_csv(path, "c_mag,err_at_n,m_norm_final", zip(c, err, m_final))
    return path, (c, err)


@pytest.fixture()
def kernel_csv(tmp_path):
    xs = np.linspace(0.1, 0.9, 4)
    ys = np.linspace(0.2, 0.8, 3)
    rows = []
    for x in xs:
        for y in ys:
            approx = 10.0 * x + y
            rows.append((x, y, approx, approx + 0.5))
    rng = np.random.default_rng(3)
    rng.shuffle(rows)  # pivot must not depend on row order
    path = tmp_path / "kernel.csv"
    write_csv(path, "x,y,g_approx,g_exact", rows)
    return path, (xs, ys)


class TestConvergenceKinds:
    def test_convergence_writes_image_and_returns_drawn_arrays(
        self, convergence_csv, tmp_path
    ):
        path, (n, lam, err, m_norm, bound) = convergence_csv
        out = tmp_path / "conv.png"
        data = render(FigureSpec(str(path), "convergence", str(out)))
        assert out.exists() and out.stat().st_size > 0
        assert np.array_equal(data["n"], n)
        assert np.array_equal(data["err"], err)
        assert np.array_equal(data["bound"], bound)

    def test_mnorm_final_line_recovers_estimate_from_last_row(
        self, convergence_csv, tmp_path
    ):
        path, (n, lam, err, m_norm, bound) = convergence_csv
        data = render(FigureSpec(str(path), "mnorm", str(tmp_path / "m.png")))
        assert np.array_equal(data["m_norm"], m_norm)
        assert data["final"] == bound[-1] * lam[-1]

    def test_rerender_returns_identical_arrays(self, convergence_csv, tmp_path):
        path, _ = convergence_csv
        spec = FigureSpec(str(path), "convergence", str(tmp_path / "c.png"))
        first = render(spec)
        second = render(spec)
        assert first.keys() == second.keys()
        for key in first:
            assert np.array_equal(first[key], second[key])

    def test_svg_output(self, convergence_csv, tmp_path):
        path, _ = convergence_csv
        out = tmp_path / "conv.svg"
        render(FigureSpec(str(path), "convergence", str(out)))
        assert out.exists() and out.stat().st_size > 0


class TestSweep:
    def test_exact_line_gives_exact_fit(self, sweep_csv, tmp_path):
        path, (c, err) = sweep_csv
        data = render(FigureSpec(str(path), "sweep", str(tmp_path / "s.png")))
        assert abs(data["slope"] - 0.0005) <= 1e-12
        assert abs(data["intercept"] - 0.002) <= 1e-12
        assert data["r2"] == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(
            data["fit"], data["slope"] * c + data["intercept"], rtol=0, atol=0
        )

    def test_constant_data_reports_unit_r2(self, tmp_path):
        c = np.arange(0.0, 10.0, 2.0)
        path = tmp_path / "flat.csv"
        write_csv(path, "c_mag,err_at_n,m_norm_final", zip(c, 0 * c + 3.0, 0 * c + 1))
        data = render(FigureSpec(str(path), "sweep", str(tmp_path / "f.png")))
        assert data["slope"] == pytest.approx(0.0, abs=1e-15)
        assert data["r2"] == 1.0


class TestHeatmap:
    def test_pivot_recovers_grid_regardless_of_row_order(self, kernel_csv, tmp_path):
        path, (xs, ys) = kernel_csv
        data = render(FigureSpec(str(path), "greens-heatmap", str(tmp_path / "k.png")))
        assert np.array_equal(data["x"], xs)
        assert np.array_equal(data["y"], ys)
        expect = 10.0 * xs[:, None] + ys[None, :]
        assert np.array_equal(data["approx"], expect)
        assert np.array_equal(data["exact"], expect + 0.5)
        # adding 0.5 to values near 4 rounds, so diff is 0.5 up to one ulp
        assert np.allclose(data["diff"], 0.5, rtol=0, atol=1e-15)

    def test_incomplete_grid_is_rejected(self, tmp_path):
        rows = [(0.0, 0.0, 1.0, 1.0), (1.0, 1.0, 2.0, 2.0)]  # 2x2 with holes
        path = tmp_path / "holes.csv"
        write_csv(path, "x,y,g_approx,g_exact", rows)
        with pytest.raises(ValueError, match="full x-y grid"):
            render(FigureSpec(str(path), "greens-heatmap", str(tmp_path / "h.png")))


class TestSchemaChecks:
    def test_wrong_table_lists_every_missing_column(self, sweep_csv, tmp_path):
        path, _ = sweep_csv
        with pytest.raises(SchemaMismatch) as info:
            render(FigureSpec(str(path), "convergence", str(tmp_path / "x.png")))
        message = str(info.value)
        for name in ("n", "lambda_next", "err", "m_norm", "bound"):
            assert name in message

    def test_missing_single_column_is_named(self, tmp_path):
        path = tmp_path / "partial.csv"
        write_csv(path, "x,y,g_approx", [(0.0, 0.0, 1.0)])
        with pytest.raises(SchemaMismatch, match="g_exact"):
            render(FigureSpec(str(path), "greens-heatmap", str(tmp_path / "p.png")))

    def test_header_row_width_disagreement(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("n,lambda_next,err,m_norm,bound\n1,2,3,4\n")
        with pytest.raises(SchemaMismatch, match="columns"):
            render(FigureSpec(str(path), "convergence", str(tmp_path / "r.png")))

    def test_unknown_kind(self, convergence_csv, tmp_path):
        path, _ = convergence_csv
        with pytest.raises(ValueError, match="unknown figure kind"):
            render(FigureSpec(str(path), "scatter", str(tmp_path / "u.png")))

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("c_mag,err_at_n,m_norm_final\n")
        with pytest.raises(ValueError, match="no data rows"):
            render(FigureSpec(str(path), "sweep", str(tmp_path / "e.png")))


class TestCli:
    def test_render_success(self, sweep_csv, tmp_path, capsys):
        path, _ = sweep_csv
        out = tmp_path / "s.png"
        code = main(["render", "--kind", "sweep", "--in", str(path), "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert f"wrote {out}" in capsys.readouterr().out

    def test_schema_mismatch_exits_2(self, sweep_csv, tmp_path, capsys):
        path, _ = sweep_csv
        code = main(
            ["render", "--kind", "mnorm", "--in", str(path), "--out", str(tmp_path / "m.png")]
        )
        assert code == 2
        assert "SchemaMismatch" in capsys.readouterr().err

    def test_missing_input_file_exits_2(self, tmp_path, capsys):
        code = main(
            [
                "render",
                "--kind",
                "sweep",
                "--in",
                str(tmp_path / "absent.csv"),
                "--out",
                str(tmp_path / "s.png"),
            ]
        )
        assert code == 2
        assert "FileNotFoundError" in capsys.readouterr().err

    def test_invalid_kind_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["render", "--kind", "pie", "--in", "a.csv", "--out", "b.png"])
        assert info.value.code == 2
