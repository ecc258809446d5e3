//! End-to-end acceptance checks, driven through the `qwalk` binary.
//!
//! Every criterion prints one `PASS`/`FAIL` line; the test fails if any
//! criterion fails. Environments are generated from seed 0 and the per-trajectory
//! streams from master seed 0.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use qwalk::commands::report::ks_from_steps;
use qwalk_core::geometry::jump_distribution;
use qwalk_core::rng::substream;
use qwalk_core::stats::gaussian_cdf_1d;
use qwalk_core::Rational;
use rand::Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_qwalk");

struct Verdict {
    pass: bool,
    detail: String,
}

fn qwalk(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(BIN).current_dir(dir).args(args).output().expect("spawn qwalk");
    assert!(
        out.status.success(),
        "qwalk {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'), "{} lacks a trailing newline", path.display());
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn f64_rows(path: &Path) -> Vec<Vec<f64>> {
    rows(path)
        .into_iter()
        .map(|r| r.iter().map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn frac_f64(s: &str) -> f64 {
    match s.split_once('/') {
        Some((a, b)) => a.parse::<f64>().unwrap() / b.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

struct Fixture {
    dir: tempfile::TempDir,
    env1: PathBuf,
    env2: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        // 1D: n·(max A − 1) + 1 tiles for the longest run (n = 10⁵); labels
        // depend only on the tile index, so shorter runs see the same prefix.
        qwalk(dir.path(), &["env", "--seed", "0", "--p0", "1/2", "--dim", "1", "--extent", "200001", "--out", "env1.qw"]);
        // 2D: n·(max row sum) + 1 tiles per axis for n = 2000.
        qwalk(dir.path(), &["env", "--seed", "0", "--p0", "1/2", "--dim", "2", "--extent", "8001", "--out", "env2.qw"]);
        Self {
            env1: dir.path().join("env1.qw"),
            env2: dir.path().join("env2.qw"),
            dir,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        qwalk(self.dir.path(), args)
    }
}

fn analytic_exactness(fx: &Fixture) -> Verdict {
    let one = fx.run(&["analytic", "--model", "1d", "--A0", "2", "--A1", "3", "--p0", "1/2", "--format", "json"]);
    let two = fx.run(&["analytic", "--model", "2d", "--A0", "2,1;1,1", "--A1", "3,1;2,1", "--p0", "1/2"]);
    let a: Value = serde_json::from_slice(&one.stdout).unwrap();
    let b: Value = serde_json::from_slice(&two.stdout).unwrap();
    let expect = [
        (a["p"].clone(), serde_json::json!("4/7")),
        (a["D"].clone(), serde_json::json!("5/7")),
        (a["sigma2"].clone(), serde_json::json!("24/49")),
        (b["alpha_star"].clone(), serde_json::json!([["5/8", "3/8"], ["5/12", "7/12"]])),
        (b["p"].clone(), serde_json::json!("10/19")),
        (b["D0"].clone(), serde_json::json!(["1", "1/2"])),
        (b["D1"].clone(), serde_json::json!(["3/2", "1"])),
        (b["D"].clone(), serde_json::json!(["47/38", "14/19"])),
    ];
    let bad: Vec<String> = expect
        .iter()
        .filter(|(got, want)| got != want)
        .map(|(got, want)| format!("{got} != {want}"))
        .collect();
    Verdict {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            "p=4/7 D=5/7 sigma2=24/49; 2d alpha*, p=10/19, D0, D1, D=(47/38,14/19) exact".into()
        } else {
            bad.join("; ")
        },
    }
}

fn exact_distribution(fx: &Fixture) -> Verdict {
    let env = fx.env1.to_str().unwrap();
    let out = fx.run(&["dist", "--env", env, "--n", "1000", "--mode", "exact", "--out", "dist1000.csv"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = v["mean_over_n"].as_f64().unwrap();
    let var = v["var_over_n"].as_f64().unwrap();
    let (d, s2) = (5.0 / 7.0, 24.0 / 49.0);
    let mean_err = (mean - d).abs();
    let var_err = (var - s2).abs() / s2;
    Verdict {
        pass: mean_err <= 0.01 && var_err <= 0.05 && v["total"] == "1",
        detail: format!(
            "mean/n={mean:.6} (|err|={mean_err:.6} <= 0.01), var/n={var:.6} (rel err={var_err:.4} <= 0.05), total={}",
            v["total"]
        ),
    }
}

fn monte_carlo_vs_exact(fx: &Fixture) -> Verdict {
    let env = fx.env1.to_str().unwrap();
    fx.run(&["dist", "--env", env, "--n", "20", "--out", "dist20.csv"]);
    fx.run(&[
        "sim", "--model", "1d", "--mode", "markov", "--env", env, "--n", "20", "--count", "1000000", "--seed", "0",
        "--out-prefix", "mc20",
    ]);
    let exact: BTreeMap<u64, f64> = rows(&fx.path("dist20.csv"))
        .iter()
        .map(|r| (r[0].parse().unwrap(), frac_f64(&r[1])))
        .collect();
    let hist: BTreeMap<u64, f64> = rows(&fx.path("mc20.hist.csv"))
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse::<f64>().unwrap() / 1e6))
        .collect();
    let keys: std::collections::BTreeSet<u64> = exact.keys().chain(hist.keys()).copied().collect();
    let tv = 0.5
        * keys
            .iter()
            .map(|k| (exact.get(k).unwrap_or(&0.0) - hist.get(k).unwrap_or(&0.0)).abs())
            .sum::<f64>();
    Verdict {
        pass: tv <= 0.01,
        detail: format!("TV(empirical, exact) = {tv:.5} <= 0.01 over {} tiles", keys.len()),
    }
}

fn clt_run(fx: &Fixture) -> Value {
    let env = fx.env1.to_str().unwrap();
    let summary = fx.path("clt.summary.json");
    if !summary.exists() {
        fx.run(&[
            "sim", "--model", "1d", "--mode", "markov", "--env", env, "--n", "10000", "--count", "100000", "--seed",
            "0", "--out-prefix", "clt",
        ]);
    }
    json_file(&summary)
}

fn clt_1d(fx: &Fixture) -> Verdict {
    let s = clt_run(fx);
    let steps = f64_rows(&fx.path("clt.ecdf.csv"));
    let ks = ks_from_steps(&steps, |z| gaussian_cdf_1d(z, 24.0 / 49.0));
    Verdict {
        pass: ks <= 0.012,
        detail: format!(
            "KS((V_n - nD)/sqrt n, N(0, 24/49)) = {ks:.5} <= 0.012; sample mean of scaled values {:.4}, variance {:.4}",
            s["scaled_mean"][0].as_f64().unwrap(),
            s["cov"][0][0].as_f64().unwrap()
        ),
    }
}

fn label_structure(fx: &Fixture) -> Verdict {
    let s = clt_run(fx);
    let p = 4.0 / 7.0;
    let mass0 = s["label_mass"][0].as_f64().unwrap();
    let width = s["label_bin_width"].as_f64().unwrap();
    let ratio = p / (1.0 - p);
    let l1: f64 = f64_rows(&fx.path("clt.labels.csv"))
        .iter()
        .map(|r| (r[1] - ratio * r[2]).abs() * width)
        .sum();
    let mass_ok = (mass0 - p).abs() <= 0.01;
    Verdict {
        pass: mass_ok && l1 <= 0.05,
        detail: format!(
            "label-0 mass {mass0:.5} vs 4/7 (|err|={:.5} <= 0.01); L1(hist0, p/(1-p) hist1) = {l1:.5} <= 0.05",
            (mass0 - p).abs()
        ),
    }
}

fn lyapunov(fx: &Fixture) -> Verdict {
    let env = fx.env1.to_str().unwrap();
    fx.run(&[
        "sim", "--model", "1d", "--mode", "det", "--env", env, "--n", "100000", "--count", "1", "--seed", "0",
        "--out-prefix", "lyap",
    ]);
    let s = json_file(&fx.path("lyap.summary.json"));
    let lambda = 4.0 / 7.0 * 2f64.ln() + 3.0 / 7.0 * 3f64.ln();
    let got = s["lyapunov"].as_f64().unwrap_or(f64::NAN);
    let rel = (got - lambda).abs() / lambda;
    Verdict {
        pass: rel <= 0.01,
        detail: format!("empirical lambda {got:.6} vs {lambda:.6}, relative error {rel:.2e} <= 0.01"),
    }
}

fn effective_transitions(fx: &Fixture) -> Verdict {
    let env = fx.env1.to_str().unwrap();
    fx.run(&[
        "sim", "--model", "1d", "--mode", "markov", "--env", env, "--n", "101", "--count", "100000", "--seed", "0",
        "--transition-step", "100", "--out-prefix", "alpha",
    ]);
    let s = json_file(&fx.path("alpha.summary.json"));
    let target = [[0.75, 0.25], [1.0 / 3.0, 2.0 / 3.0]];
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max(match s["empirical_alpha"][i][j].as_f64() {
                Some(e) => (e - target[i][j]).abs(),
                None => f64::INFINITY,
            });
        }
    }
    Verdict {
        pass: worst <= 0.02,
        detail: format!(
            "empirical alpha(100) = {} ; max entry deviation from [[3/4,1/4],[1/3,2/3]] = {worst:.5} <= 0.02",
            s["empirical_alpha"]
        ),
    }
}

fn drift_and_cdf_2d(fx: &Fixture) -> Verdict {
    let env = fx.env2.to_str().unwrap();
    fx.run(&[
        "sim", "--model", "2d", "--mode", "det", "--env", env, "--n", "2000", "--count", "10000", "--seed", "0",
        "--out-prefix", "twod",
    ]);
    let s = json_file(&fx.path("twod.summary.json"));
    let d = [47.0 / 38.0, 14.0 / 19.0];
    let rel: Vec<f64> = (0..2)
        .map(|i| (s["mean"][i].as_f64().unwrap() - d[i]).abs() / d[i])
        .collect();
    let cdf = s["grid_ks"]["max_cdf_diff"].as_f64().unwrap_or(f64::NAN);
    Verdict {
        pass: rel.iter().all(|&r| r <= 0.02) && cdf <= 0.05,
        detail: format!(
            "drift ({:.5}, {:.5}) relative errors ({:.4}, {:.4}) <= 0.02; grid max |ECDF - Gaussian| = {cdf:.5} <= 0.05; boundary hits {}",
            s["mean"][0].as_f64().unwrap(),
            s["mean"][1].as_f64().unwrap(),
            rel[0],
            rel[1],
            s["stopped"]
        ),
    }
}

fn random_unimodular<R: Rng>(rng: &mut R) -> [[i64; 2]; 2] {
    // products of [[1,1],[0,1]] and [[1,0],[1,1]] using both generators
    loop {
        let len = rng.random_range(2..10);
        let word: Vec<bool> = (0..len).map(|_| rng.random()).collect();
        if !word.contains(&true) || !word.contains(&false) {
            continue;
        }
        let mut m = [[1i64, 0], [0, 1]];
        for up in word {
            m = if up {
                [[m[0][0], m[0][0] + m[0][1]], [m[1][0], m[1][0] + m[1][1]]]
            } else {
                [[m[0][0] + m[0][1], m[0][1]], [m[1][0] + m[1][1], m[1][1]]]
            };
        }
        if m.iter().flatten().all(|&e| e > 0) {
            return m;
        }
    }
}

fn geometry_oracle() -> Verdict {
    let one = Rational::from_integer(1.into());
    let stay = |m| -> Option<Rational> {
        jump_distribution(m).ok()?.into_iter().find(|(k, _)| *k == [0, 0]).map(|(_, p)| p)
    };
    let mass = |m| -> Option<Rational> { Some(jump_distribution(m).ok()?.into_iter().map(|(_, p)| p).sum()) };
    let a0 = [[2, 1], [1, 1]];
    let a1 = [[3, 1], [2, 1]];
    let s0 = stay(a0);
    let s1 = stay(a1);
    let examples_ok = s0 == Some(Rational::new(1.into(), 4.into()))
        && s1 == Some(Rational::new(1.into(), 6.into()))
        && mass(a0).as_ref() == Some(&one)
        && mass(a1).as_ref() == Some(&one);
    let mut rng = substream(0, 9);
    let mut random_ok = 0;
    for _ in 0..100 {
        if mass(random_unimodular(&mut rng)).as_ref() == Some(&one) {
            random_ok += 1;
        }
    }
    Verdict {
        pass: examples_ok && random_ok == 100,
        detail: format!(
            "stay(A0)={} stay(A1)={} with unit mass; {random_ok}/100 random unimodular matrices have mass exactly 1",
            s0.map(|r| r.to_string()).unwrap_or_default(),
            s1.map(|r| r.to_string()).unwrap_or_default()
        ),
    }
}

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        if !name.ends_with("manifest.json") {
            out.insert(name.clone(), std::fs::read(dir.join(&name)).unwrap());
        }
    }
    out
}

fn manifest_core(path: &Path) -> Value {
    let mut m = json_file(path);
    let obj = m.as_object_mut().unwrap();
    obj.remove("wall_clock_secs");
    obj.remove("threads");
    m
}

fn determinism(fx: &Fixture) -> Verdict {
    let env1 = fx.env1.to_str().unwrap();
    let env2 = fx.env2.to_str().unwrap();
    let runs: [(&str, Vec<&str>); 3] = [
        ("markov", vec!["--model", "1d", "--mode", "markov", "--env", env1, "--n", "500", "--count", "20000", "--transition-step", "10"]),
        ("det", vec!["--model", "1d", "--mode", "det", "--env", env1, "--n", "300", "--count", "5000"]),
        ("twod", vec!["--model", "2d", "--mode", "det", "--env", env2, "--n", "200", "--count", "3000"]),
    ];
    let mut problems = Vec::new();
    let mut compared = 0;
    for (tag, base) in &runs {
        let mut outputs = Vec::new();
        // same flags, including the output prefix, in separate directories
        for (variant, threads) in [("a", "1"), ("b", "8"), ("c", "1")] {
            let dir = fx.path(&format!("determinism-{tag}-{variant}"));
            std::fs::create_dir_all(&dir).unwrap();
            let mut args = vec!["sim"];
            args.extend(base.iter().copied());
            args.extend(["--seed", "7", "--retain-samples", "--threads", threads, "--out-prefix", "run"]);
            qwalk(&dir, &args);
            outputs.push((data_files(&dir), manifest_core(&dir.join("run.manifest.json"))));
        }
        for other in &outputs[1..] {
            if other.1 != outputs[0].1 {
                problems.push(format!("{tag}: manifests differ"));
            }
            if other.0 != outputs[0].0 {
                problems.push(format!("{tag}: data files differ"));
            }
            compared += other.0.len();
        }
    }
    Verdict {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{compared} data file comparisons byte-identical across reruns and --threads 1 vs 8")
        } else {
            problems.join("; ")
        },
    }
}

#[test]
fn acceptance_criteria() {
    let fx = Fixture::new();
    let criteria: Vec<(&str, Box<dyn Fn(&Fixture) -> Verdict>)> = vec![
        ("analytic exactness", Box::new(analytic_exactness)),
        ("exact-distribution convergence", Box::new(exact_distribution)),
        ("Monte Carlo vs exact oracle", Box::new(monte_carlo_vs_exact)),
        ("1D CLT", Box::new(clt_1d)),
        ("label-conditional structure", Box::new(label_structure)),
        ("Lyapunov exponent", Box::new(lyapunov)),
        ("effective transition convergence", Box::new(effective_transitions)),
        ("2D drift and Gaussian CDF", Box::new(drift_and_cdf_2d)),
        ("geometry oracle", Box::new(|_: &Fixture| geometry_oracle())),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = Vec::new();
    std::io::stderr().write_all(b"\n").unwrap();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = check(&fx);
        let line = format!(
            "criterion {:>2} {:<34} {}  {}  [{:.1}s]\n",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
        // bypasses the test harness capture so the lines always appear
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
