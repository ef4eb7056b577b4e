use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsopt_cli::RunConfig;
use tempfile::TempDir;

fn gsopt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsopt"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Writes `config.toml` into `dir` and solves it into `dir/out`.
fn solve(dir: &Path, config: &str) -> Output {
    fs::write(dir.join("config.toml"), config).unwrap();
    gsopt(&["solve", "--config", "config.toml", "--out", "out"], dir)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

const QUADRATIC: &str = r#"
[problem]
kind = "quadratic"
n = 10
p = 2
matrix_seed = 4

[solver]
kind = ["det-gd", "cdfsg"]
s1 = 0.5
s2 = 0.01
beta = 5.0
iterations = 100
seeds = [0]

[output]
cadence = 10
"#;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_round_trip() {
    let mut n = 0;
    for e in fs::read_dir(configs_dir()).unwrap() {
        let p = e.unwrap().path();
        let cfg = RunConfig::parse(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(
            RunConfig::parse(&cfg.to_toml()).unwrap(),
            cfg,
            "{}",
            p.display()
        );
        n += 1;
    }
    assert!(n >= 2);
}

#[test]
fn quadratic_trace_has_one_row_per_iterate() {
    let tmp = TempDir::new().unwrap();
    let o = solve(tmp.path(), QUADRATIC);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for tag in ["det-gd_s2-0.01_seed-0", "cdfsg_s1-0.5_s2-0.01_seed-0"] {
        let (header, rows) = read_csv(&tmp.path().join(format!("out/runs/{tag}.csv")));
        assert_eq!(header[0], "iter");
        assert_eq!(rows.len(), 101);
        assert_eq!(rows[100][0], "100");
        assert!(tmp.path().join(format!("out/iterates/{tag}.gsmx")).exists());
    }
    let saved = fs::read_to_string(tmp.path().join("out/config.toml")).unwrap();
    assert_eq!(
        RunConfig::parse(&saved).unwrap(),
        RunConfig::parse(QUADRATIC).unwrap()
    );
}

#[test]
fn summary_has_mean_and_sample_std_over_seeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = QUADRATIC
        .replace("seeds = [0]", "seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]")
        .replace(r#"kind = ["det-gd", "cdfsg"]"#, r#"kind = "cdfsg""#);
    let o = solve(tmp.path(), &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut terminal = Vec::new();
    for s in 0..10 {
        let (h, rows) = read_csv(
            &tmp.path()
                .join(format!("out/runs/cdfsg_s1-0.5_s2-0.01_seed-{s}.csv")),
        );
        let v: f64 = rows.last().unwrap()[col(&h, "fval")].parse().unwrap();
        terminal.push(v);
    }
    let mean = terminal.iter().sum::<f64>() / 10.0;
    let std = (terminal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0).sqrt();
    assert!(std > 0.0);

    let (h, rows) = read_csv(&tmp.path().join("out/summary.csv"));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r[col(&h, "runs")], "10");
    assert_eq!(r[col(&h, "failed")], "0");
    let got_mean: f64 = r[col(&h, "fval_mean")].parse().unwrap();
    let got_std: f64 = r[col(&h, "fval_std")].parse().unwrap();
    assert!((got_mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    assert!((got_std - std).abs() <= 1e-9 * std);
    // no PCC without a reference solution
    assert_eq!(r[col(&h, "pcc_mean")], "");
}

#[test]
fn synthetic_summary_reports_raw_and_post_processed_pcc() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"
[problem]
kind = "synthetic-cca"
dims = [6, 6]
correlations = [0.9, 0.7]
samples = 2000
data_seed = 2

[solver]
kind = ["cdfsg", "cdfsg-ada"]
s1 = 0.5
s2 = 0.05
mode = "theory"
epochs = 1
batch_size = 20
seeds = [0, 1]
"#;
    let o = solve(tmp.path(), cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (h, rows) = read_csv(&tmp.path().join("out/summary.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[col(&h, "iterations")], "100");
        assert_eq!(r[col(&h, "beta")], "0.1");
        for m in ["pcc_mean", "pcc_pp_mean", "feas_pp_mean"] {
            let v: f64 = r[col(&h, m)].parse().unwrap();
            assert!(v.is_finite(), "{m}");
        }
        let pcc: f64 = r[col(&h, "pcc_pp_mean")].parse().unwrap();
        assert!(pcc > 0.0 && pcc <= 1.0 + 1e-9, "{pcc}");
    }
    assert!(tmp
        .path()
        .join("out/iterates/cdfsg-ada_s1-0.5_s2-0.05_seed-1_pp.gsmx")
        .exists());
}

#[test]
fn synth_writes_views_and_truth() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str| {
        [
            "synth",
            "--dims",
            "25,25",
            "--rho",
            "0.9,0.8,0.7",
            "--samples",
            "20000",
            "--seed",
            "5",
            "--out",
            out,
        ]
    };
    let o = gsopt(&args("a"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sidecar: toml::Value =
        toml::from_str(&fs::read_to_string(tmp.path().join("a/truth.toml")).unwrap()).unwrap();
    let tcc = sidecar["population"]["tcc"].as_float().unwrap();
    assert!((tcc - 2.4).abs() < 1e-12);
    let sample = sidecar["sample"]["tcc"].as_float().unwrap();
    assert!((sample - 2.4).abs() < 0.05, "{sample}");

    assert_eq!(code(&gsopt(&args("b"), tmp.path())), 0);
    for f in [
        "view1.gsmx",
        "view2.gsmx",
        "xbar_population.gsmx",
        "xbar_sample.gsmx",
        "truth.toml",
    ] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }

    let bad = [
        "synth",
        "--dims",
        "3,3",
        "--rho",
        "0.5",
        "--samples",
        "0",
        "--out",
        "c",
    ];
    assert_eq!(code(&gsopt(&bad, tmp.path())), 2);
    let bad = [
        "synth",
        "--dims",
        "3,3",
        "--rho",
        "1.2",
        "--samples",
        "50",
        "--out",
        "c",
    ];
    assert_eq!(code(&gsopt(&bad, tmp.path())), 2);
}

#[test]
fn gcca_runs_on_synthesized_views() {
    let tmp = TempDir::new().unwrap();
    let o = gsopt(
        &[
            "synth",
            "--dims",
            "5,4",
            "--rho",
            "0.9,0.6",
            "--samples",
            "1000",
            "--out",
            "data",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = r#"
[problem]
kind = "gcca"
views = ["data/view1.gsmx", "data/view2.gsmx"]
p = 2

[solver]
kind = "cdfsg"
s1 = 0.5
s2 = 0.05
epochs = 2
batch_size = 50
seeds = [3]
"#;
    let o = solve(tmp.path(), cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (h, rows) = read_csv(&tmp.path().join("out/summary.csv"));
    assert_eq!(rows[0][col(&h, "iterations")], "40");
    assert!(rows[0][col(&h, "pcc_pp_mean")].parse::<f64>().is_ok());
}

#[test]
fn config_errors_exit_2_and_name_the_problem() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (
            QUADRATIC.replace("beta = 5.0", "beta = 5.0\nstepsize = 1"),
            "stepsize",
        ),
        (
            QUADRATIC.replace("iterations = 100", "iterations = 100\nepochs = 1"),
            "epochs",
        ),
        (QUADRATIC.replace("seeds = [0]", "seeds = []"), "seeds"),
        (QUADRATIC.replace("seeds = [0]", "seeds = [1, 1]"), "seed"),
        (QUADRATIC.replace("s1 = 0.5\n", ""), "s1"),
        (QUADRATIC.replace("s1 = 0.5", "s1 = 3.0"), "s1"),
        (QUADRATIC.replace("beta = 5.0", "beta = -1.0"), "beta"),
        (
            QUADRATIC.replace("beta = 5.0", "beta = 5.0\neta1 = 0.5"),
            "eta1",
        ),
        (QUADRATIC.replace("n = 10", "n = 10\ndims = [2, 2]"), "dims"),
        (
            QUADRATIC.replace("cadence = 10", "cadence = \"sometimes\""),
            "cadence",
        ),
    ];
    for (cfg, key) in cases {
        let o = solve(tmp.path(), &cfg);
        assert_eq!(code(&o), 2, "{key}: {}", stderr(&o));
        assert!(stderr(&o).contains(key), "{key}: {}", stderr(&o));
    }
    let o = gsopt(&["check", "--suite", "nonsense"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn io_errors_exit_4() {
    let tmp = TempDir::new().unwrap();
    let o = gsopt(&["solve", "--config", "missing.toml"], tmp.path());
    assert_eq!(code(&o), 4);

    let cfg = r#"
[problem]
kind = "gcca"
views = ["nowhere/a.csv", "nowhere/b.csv"]
p = 1

[solver]
kind = "cdfsg"
s1 = 0.5
s2 = 0.05
epochs = 1
seeds = [0]
"#;
    let o = solve(tmp.path(), cfg);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(code(&gsopt(&["report", "empty"], tmp.path())), 4);
}

#[test]
fn divergence_exits_3_with_partial_trace() {
    let tmp = TempDir::new().unwrap();
    let cfg = QUADRATIC
        .replace("beta = 5.0", "beta = 1000.0")
        .replace("s2 = 0.01", "s2 = 0.5")
        .replace(r#"kind = ["det-gd", "cdfsg"]"#, r#"kind = "cdfsg""#);
    let o = solve(tmp.path(), &cfg);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let (_, rows) = read_csv(&tmp.path().join("out/runs/cdfsg_s1-0.5_s2-0.5_seed-0.csv"));
    assert!(!rows.is_empty() && rows.len() < 101);
    let (h, rows) = read_csv(&tmp.path().join("out/summary.csv"));
    assert_eq!(rows[0][col(&h, "failed")], "1");
}

#[test]
fn seed_override_runs_one_seed() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("config.toml"),
        QUADRATIC.replace("seeds = [0]", "seeds = [0, 1]"),
    )
    .unwrap();
    let o = gsopt(
        &[
            "solve",
            "--config",
            "config.toml",
            "--seed",
            "7",
            "--out",
            "out",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("out/runs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "cdfsg_s1-0.5_s2-0.01_seed-7.csv",
            "det-gd_s2-0.01_seed-7.csv"
        ]
    );
}

#[test]
fn report_table_and_plot_data() {
    let tmp = TempDir::new().unwrap();
    let o = solve(
        tmp.path(),
        &QUADRATIC.replace("seeds = [0]", "seeds = [0, 1]"),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = gsopt(&["report", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "| Solver | Runs | Fval | Fea | PCC | Time (s) |");
    assert_eq!(lines.len(), 4);
    for row in &lines[2..] {
        let cells: Vec<&str> = row.split('|').map(str::trim).collect();
        assert_eq!(cells[2], "2");
        assert_eq!(cells[5], "-");
    }
    assert_eq!(
        fs::read_to_string(tmp.path().join("out/report.md")).unwrap(),
        table
    );

    // kkt is recorded on the cadence: iterations 0, 10, ..., 100
    let (h, rows) = read_csv(&tmp.path().join("out/plots/kkt.csv"));
    assert_eq!(h.len(), 3);
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[1][0], "10");
    let (_, rows) = read_csv(&tmp.path().join("out/plots/fval.csv"));
    assert_eq!(rows.len(), 101);
    assert!(!tmp.path().join("out/plots/pcc.csv").exists());
}

#[test]
fn check_filters_suites_and_detects_mutation() {
    let tmp = TempDir::new().unwrap();
    let o = gsopt(&["check", "--suite", "unbiasedness"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("unbiasedness") && out.contains("PASS"));

    let o = gsopt(&["check", "--mutation", "penalty-sign"], tmp.path());
    assert_ne!(code(&o), 0);
    let gradient = stdout(&o)
        .lines()
        .find(|l| l.starts_with("gradient"))
        .unwrap()
        .to_owned();
    assert!(gradient.contains("FAIL"), "{gradient}");
}
