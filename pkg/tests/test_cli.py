import numpy as np
import pytest

from fastpart.cli import main, read_measure, write_measure
from fastpart.measures import ParticleMeasure


BASE_GMM = """
[model]
kind = gmm
benchmark = gmm3a
n = 300

[solver]
mode = stochastic
schedule = manual
alpha = 0.1
eta = 0.0001
k = {k}
lambda = 0.05
seed = 12
init = grid
init_step = 0.2
init_mass = 0.5
cesaro = true

[output]
dir = {out}
trace_every = {trace_every}
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_trace(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("k,"):
                continue
            rows.append(line.strip().split(","))
    return rows


class TestRunCommand:
    def test_minimal_run_outputs(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_GMM.format(k=20, out=tmp_path / "out",
                                                  trace_every=1))
        assert main(["run", cfg, "--quiet"]) == 0
        out = tmp_path / "out"
        assert (out / "trace.csv").exists()
        assert (out / "final_measure.csv").exists()
        assert (out / "cesaro_measure.csv").exists()
        rows = read_trace(out / "trace.csv")
        assert len(rows) == 21  # k = 0 .. K
        assert [r[0] for r in rows[:3]] == ["0", "1", "2"]

    def test_trace_every_flag(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_GMM.format(k=25, out=tmp_path / "o",
                                                  trace_every=1))
        assert main(["run", cfg, "--quiet", "--trace-every", "10"]) == 0
        rows = read_trace(tmp_path / "o" / "trace.csv")
        assert [r[0] for r in rows] == ["0", "10", "20", "25"]

    def test_invalid_alpha_exits_2(self, tmp_path, capsys):
        text = BASE_GMM.format(k=10, out=tmp_path / "o", trace_every=1)
        cfg = write_cfg(tmp_path, text.replace("alpha = 0.1", "alpha = 0"))
        assert main(["run", cfg, "--quiet"]) == 2
        assert "alpha" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.cfg")]) == 2

    def test_runtime_failure_exits_1(self, tmp_path, capsys):
        # absurd step size overflows the multiplicative update
        text = BASE_GMM.format(k=400, out=tmp_path / "o", trace_every=1)
        cfg = write_cfg(tmp_path, text.replace("alpha = 0.1", "alpha = 5000"))
        assert main(["run", cfg, "--quiet"]) == 1
        assert "error" in capsys.readouterr().err

    def test_reproducible_modulo_wall(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_GMM.format(k=40, out=tmp_path / "a",
                                                  trace_every=1))
        assert main(["run", cfg, "--quiet"]) == 0
        assert main(["run", cfg, "--quiet", "--out-dir", str(tmp_path / "b")]) == 0

        def strip_wall(path):
            return [",".join(r[:6]) for r in read_trace(path)]

        assert strip_wall(tmp_path / "a" / "trace.csv") == \
            strip_wall(tmp_path / "b" / "trace.csv")
        assert (tmp_path / "a" / "final_measure.csv").read_bytes() == \
            (tmp_path / "b" / "final_measure.csv").read_bytes()

    def test_eval_cost_model(self, tmp_path):
        # stochastic growth: 4 * batch * particles per iteration
        text = BASE_GMM.format(k=10, out=tmp_path / "o", trace_every=1)
        text = text.replace("alpha = 0.1", "alpha = 0.1\nbatch = 3")
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg, "--quiet"]) == 0
        rows = read_trace(tmp_path / "o" / "trace.csv")
        evals = [int(r[5]) for r in rows]
        p = 11  # grid step 0.2 on [-1, 1]
        diffs = np.diff(evals)
        assert np.all(diffs == 4 * 3 * p)

    def test_eval_cost_model_deterministic(self, tmp_path):
        text = BASE_GMM.format(k=5, out=tmp_path / "o", trace_every=1)
        text = text.replace("mode = stochastic", "mode = deterministic")
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg, "--quiet"]) == 0
        rows = read_trace(tmp_path / "o" / "trace.csv")
        evals = [int(r[5]) for r in rows]
        p, n = 11, 300
        assert np.all(np.diff(evals) == 2 * (p * p + p * n))

    def test_deterministic_objective_monotone(self, tmp_path):
        text = BASE_GMM.format(k=150, out=tmp_path / "o", trace_every=1)
        text = text.replace("mode = stochastic", "mode = deterministic")
        text = text.replace("alpha = 0.1", "alpha = 0.4")
        text = text.replace("eta = 0.0001", "eta = 0.001")
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg, "--quiet"]) == 0
        rows = read_trace(tmp_path / "o" / "trace.csv")
        j = np.array([float(r[1]) for r in rows])
        warmup = max(1, len(j) // 100)
        assert np.all(np.diff(j[warmup:]) <= 1e-12)


class TestCertifyCommand:
    def test_oracle_certifies_and_grid_fails(self, tmp_path):
        cfg_text = BASE_GMM.format(k=10, out=tmp_path / "o", trace_every=1) + (
            "\n[oracle]\ngrid_step = 0.01\ntol = 1e-7\n"
            "\n[certify]\ngrid_step = 0.01\ntol = 1e-5\n")
        cfg = write_cfg(tmp_path, cfg_text)
        assert main(["oracle", cfg, "--out-dir", str(tmp_path / "orc")]) == 0
        assert main(["certify", cfg,
                     str(tmp_path / "orc" / "oracle_measure.csv")]) == 0
        # an unoptimized uniform grid measure must fail certification
        from fastpart.measures import uniform_grid_measure
        bad = tmp_path / "bad_measure.csv"
        write_measure(bad, uniform_grid_measure(1.0, 1, 0.2, 0.5))
        assert main(["certify", cfg, str(bad)]) == 3

    def test_null_measure_certifies_when_lam_dominates(self, tmp_path):
        # over-regularized problem: the empty measure satisfies optimality
        from fastpart import GaussianMixtureModel, GroundTruth, sample_mixture_data
        truth = GroundTruth(weights=[1.0], positions=[0.0])
        data = sample_mixture_data(truth, 0.5, 50, np.random.default_rng(0),
                                   trunc_width=3.0)
        data_file = tmp_path / "d.csv"
        np.savetxt(data_file, data, delimiter=",")
        model = GaussianMixtureModel(data, bandwidth=1.0, mixing_scale=0.5,
                                     trunc_width=3.0)
        lam = 1.01 * model.bounds().h_sup
        cfg = write_cfg(tmp_path, f"""
[model]
kind = gmm
data = d.csv
bandwidth = 1.0
mixing_scale = 0.5
trunc_width = 3.0

[solver]
mode = stochastic
schedule = manual
alpha = 0.1
eta = 0.001
k = 10
lambda = {lam}
init = grid
init_step = 0.5

[certify]
grid_step = 0.02
tol = 1e-5
""")
        null_file = tmp_path / "null.csv"
        write_measure(null_file, ParticleMeasure(np.empty(0), np.empty((0, 1))))
        assert main(["certify", cfg, str(null_file)]) == 0

    def test_unparseable_measure_exits_2(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_GMM.format(k=5, out=tmp_path / "o",
                                                  trace_every=1))
        bad = tmp_path / "garbage.csv"
        bad.write_text("weight,x0\nnot,a,number\n")
        assert main(["certify", cfg, str(bad)]) == 2

    def test_dimension_mismatch_exits_2(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_GMM.format(k=5, out=tmp_path / "o",
                                                  trace_every=1))
        two_d = tmp_path / "m2.csv"
        write_measure(two_d, ParticleMeasure([1.0], [[0.1, 0.2]]))
        assert main(["certify", cfg, str(two_d)]) == 2


class TestGenData:
    def test_reproducible_and_commented(self, tmp_path):
        out1 = tmp_path / "d1.csv"
        out2 = tmp_path / "d2.csv"
        assert main(["gen-data", "gmm3a", "9", str(out1)]) == 0
        assert main(["gen-data", "gmm3a", "9", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        first = out1.read_text().splitlines()
        assert first[0].startswith("#")
        assert "seed=9" in first[0]
        data = np.loadtxt(out1, delimiter=",", comments="#")
        assert data.shape == (2000,)

    def test_sample_mean_matches_mixture_mean(self, tmp_path):
        from fastpart import benchmarks
        problem = benchmarks.get_benchmark("gmm3a")
        data = benchmarks.gen_data(problem, 31)
        target = float(problem.truth.weights @ problem.truth.positions.ravel()
                       / problem.truth.weights.sum())
        se = data.std() / np.sqrt(len(data))
        assert abs(data.mean() - target) <= 4 * se

    def test_empty_sample_rejected(self):
        from fastpart import GroundTruth, sample_mixture_data
        truth = GroundTruth(weights=[1.0], positions=[0.0])
        with pytest.raises(ValueError):
            sample_mixture_data(truth, 0.1, 0, np.random.default_rng(0))

    def test_different_seeds_differ(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["gen-data", "gmm3a", "1", str(a)])
        main(["gen-data", "gmm3a", "2", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_unknown_problem_exits_2(self, tmp_path):
        assert main(["gen-data", "nope", "1", str(tmp_path / "x.csv")]) == 2

    def test_data_file_roundtrip_into_model(self, tmp_path):
        out = tmp_path / "d.csv"
        main(["gen-data", "gmm3a", "4", str(out)])
        text = BASE_GMM.format(k=5, out=tmp_path / "o", trace_every=1)
        text = text.replace("benchmark = gmm3a\nn = 300",
                            f"benchmark = gmm3a\ndata = {out.name}")
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg, "--quiet"]) == 0


class TestCompareCommand:
    def test_requires_two_variants(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_GMM.format(k=5, out=tmp_path / "o",
                                                  trace_every=1))
        assert main(["compare", cfg]) == 2

    def test_comparison_outputs(self, tmp_path):
        text = BASE_GMM.format(k=400, out=tmp_path / "cmp", trace_every=4)
        text = text.replace("cesaro = true", "cesaro = false")
        text += """
[variant det]
mode = deterministic
alpha = 0.4
eta = 0.001
k = 60

[variant sto]
mode = stochastic
batch = 4
alpha = 0.2

[oracle]
grid_step = 0.01
tol = 1e-6
"""
        cfg = write_cfg(tmp_path, text)
        assert main(["compare", cfg, "--quiet"]) == 0
        out = tmp_path / "cmp"
        assert (out / "det_trace.csv").exists()
        assert (out / "sto_trace.csv").exists()
        lines = (out / "comparison.csv").read_text().splitlines()
        assert lines[0] == "variant,evals_to_threshold,final_J"
        names = [l.split(",")[0] for l in lines[2:]]
        assert names == ["det", "sto"]

    def test_cesaro_variant_smoother(self, tmp_path):
        # the averaged trace has lower late-run wiggle than the raw one
        text = BASE_GMM.format(k=2000, out=tmp_path / "sm", trace_every=1)
        text = text.replace("init_step = 0.2", "init_step = 0.1")
        text += """
[variant raw]
cesaro = false

[variant avg]
cesaro = true
trace_cesaro = true

[oracle]
grid_step = 0.02
tol = 1e-6
"""
        cfg = write_cfg(tmp_path, text)
        assert main(["compare", cfg, "--quiet"]) == 0

        def late_variance(name):
            rows = read_trace(tmp_path / "sm" / f"{name}_trace.csv")
            j = np.array([float(r[1]) for r in rows])
            tail = j[3 * len(j) // 4:]
            return np.var(np.diff(tail))

        assert late_variance("avg") < late_variance("raw")


class TestFourier2dConfig:
    def test_two_dimensional_spikes_parse_and_run(self, tmp_path):
        text = """
[model]
kind = fourier
freq_cutoff = 1
dim = 2
spike_weights = 0.7, 0.5
spike_positions = -1.0 0.6; 1.2 -0.8

[solver]
mode = stochastic
schedule = manual
alpha = 0.1
eta = 0.01
k = 50
lambda = 0.2
seed = 2
init = random
p = 16

[output]
dir = {out}
trace_every = 10
""".format(out=tmp_path / "f2")
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg, "--quiet"]) == 0
        back = read_measure(tmp_path / "f2" / "final_measure.csv")
        assert back.dim == 2

    def test_dimension_mismatch_in_points_exits_2(self, tmp_path, capsys):
        text = """
[model]
kind = fourier
freq_cutoff = 1
dim = 2
spike_weights = 0.7
spike_positions = -1.0

[solver]
mode = stochastic
schedule = manual
alpha = 0.1
eta = 0.01
k = 5
lambda = 0.2
init = random
p = 4
"""
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg, "--quiet"]) == 2
        assert "spike_positions" in capsys.readouterr().err


class TestReluConfig:
    def test_network_run_from_config(self, tmp_path):
        text = """
[model]
kind = relu
dim = 2
n = 128
data_seed = 3
teacher_width = 3
noise = 0.05

[solver]
mode = stochastic
schedule = manual
alpha = 0.05
eta = 0.05
k = 400
batch = 8
lambda = 0.005
seed = 4
init = random
p = 24
signs = mixed

[output]
dir = {out}
trace_every = 50
""".format(out=tmp_path / "relu_out")
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg, "--quiet"]) == 0
        rows = read_trace(tmp_path / "relu_out" / "trace.csv")
        j = [float(r[1]) for r in rows]
        assert j[-1] < j[0]
        # signed weights round-trip through the measure file
        back = read_measure(tmp_path / "relu_out" / "final_measure.csv")
        assert np.any(back.signs < 0) and np.any(back.signs > 0)

    def test_bad_signs_value_exits_2(self, tmp_path, capsys):
        text = BASE_GMM.format(k=5, out=tmp_path / "o", trace_every=1)
        cfg = write_cfg(tmp_path, text.replace("init_mass = 0.5",
                                               "init_mass = 0.5\nsigns = odd"))
        assert main(["run", cfg, "--quiet"]) == 2
        assert "signs" in capsys.readouterr().err


class TestMeasureRoundtrip:
    def test_signed_roundtrip(self, tmp_path):
        nu = ParticleMeasure([0.5, 1.5], [[0.1], [-0.4]], signs=[1, -1])
        path = tmp_path / "m.csv"
        write_measure(path, nu)
        back = read_measure(path)
        assert np.allclose(back.weights, nu.weights)
        assert np.allclose(back.positions, nu.positions)
        assert np.array_equal(back.signs, nu.signs)
