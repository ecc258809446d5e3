use std::path::{Path, PathBuf};
use std::time::Instant;

use qwalk_core::bigrat::safe_prime_128;
use qwalk_core::model1d::{analytic_drift, drift_trace, run_ensemble_1d};
use qwalk_core::model2d::run_ensemble_2d;
use qwalk_core::rng::substream;
use qwalk_core::stats::{empirical_alpha, evaluate_grid_2d, label_density_curves, EmpiricalCdf, Grid2};
use qwalk_core::{
    Analytic2D, Ensemble1D, Ensemble2D, EnsembleSummary, Environment, Error, ExactPoint, Mode, Rational,
};
use serde_json::{json, Map, Value};

use super::{params_1d, params_2d};
use crate::args::{Model, SimArgs, SimMode};
use crate::error::{usage, CliError, CliResult};
use crate::output::{csv_writer, decs, file_name, fracs, sha256_file, with_suffix, write_json};

/// Scaled-axis bin width of the label density curves.
pub const LABEL_BIN_WIDTH: f64 = 0.25;

/// Rows in the drift trace of a single long trajectory.
const TRACE_ROWS: u64 = 1000;

struct Outputs {
    prefix: PathBuf,
    files: Map<String, Value>,
}

impl Outputs {
    fn path(&mut self, key: &str, suffix: &str) -> PathBuf {
        let p = with_suffix(&self.prefix, suffix);
        self.files.insert(key.into(), json!(file_name(&p)));
        p
    }
}

pub fn run(args: &SimArgs) -> CliResult<()> {
    let started = Instant::now();
    if args.model == Model::TwoD && args.mode == SimMode::Markov {
        return usage(
            "markov mode is 1d only: the unit-square tiling is not a Markov partition for toral automorphisms",
        );
    }
    if args.model == Model::TwoD && args.transition_step.is_some() {
        return usage("--transition-step is supported for the 1d model only");
    }
    let env = Environment::load(&args.env)?;
    if env.dim() != args.model.dim() {
        return usage(format!(
            "environment {} is {}-dimensional but --model is {}",
            args.env.display(),
            env.dim(),
            args.model.as_str()
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", args.threads)))?;
    let threads = pool.current_num_threads();
    let mut out = Outputs {
        prefix: args.out_prefix.clone(),
        files: Map::new(),
    };
    let mut summary = pool.install(|| match args.model {
        Model::OneD => simulate_1d(args, &env, &mut out),
        Model::TwoD => simulate_2d(args, &env, &mut out),
    })?;
    summary.insert("files".into(), Value::Object(out.files.clone()));
    let summary_path = with_suffix(&args.out_prefix, "summary.json");
    write_json(&summary_path, &Value::Object(summary))?;

    let manifest = json!({
        "command": "sim",
        "params": {
            "model": args.model.as_str(),
            "mode": match args.mode { SimMode::Det => "det", SimMode::Markov => "markov" },
            "A0": args.maps.a0,
            "A1": args.maps.a1,
            "env": args.env.display().to_string(),
            "n": args.n,
            "count": args.count,
            "retain_samples": args.retain_samples,
            "transition_step": args.transition_step,
            "out_prefix": args.out_prefix.display().to_string(),
        },
        "master_seed": args.seed,
        "env_sha256": sha256_file(&args.env)?,
        "rng": qwalk_core::rng::RNG_ID,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_clock_secs": started.elapsed().as_secs_f64(),
        "threads": threads,
    });
    write_json(&with_suffix(&args.out_prefix, "manifest.json"), &manifest)?;
    Ok(())
}

fn refuse_small_env(e: Error) -> CliError {
    match e {
        Error::EnvironmentExhausted { tile, extent } => CliError::Usage(format!(
            "environment too small: the run may reach tile {tile} but the extent is {extent}; \
             regenerate it with a larger --extent"
        )),
        other => other.into(),
    }
}

fn common_fields(args: &SimArgs, env: &Environment, s: &EnsembleSummary) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("model".into(), json!(args.model.as_str()));
    m.insert("mode".into(), json!(match args.mode {
        SimMode::Det => "det",
        SimMode::Markov => "markov",
    }));
    m.insert("n".into(), json!(args.n));
    m.insert("count".into(), json!(s.count));
    m.insert("seed".into(), json!(args.seed));
    m.insert("mean".into(), json!(s.drift_estimate()));
    m.insert("cov".into(), json!(s.scaled_covariance()));
    m.insert("label_mass".into(), json!(s.label_mass()));
    m.insert("stopped".into(), json!(s.stopped_count));
    m.insert("env_seed".into(), json!(env.seed()));
    m.insert("env_extent".into(), json!(env.extent()));
    m.insert("p0".into(), json!(env.p0().to_string()));
    m
}

fn scaled_mean(samples: &[f64], dim: usize) -> Vec<f64> {
    let count = samples.len() / dim.max(1);
    (0..dim)
        .map(|d| {
            if count == 0 {
                return 0.0;
            }
            samples.iter().skip(d).step_by(dim).sum::<f64>() / count as f64
        })
        .collect()
}

fn write_histogram(path: &Path, s: &EnsembleSummary) -> CliResult<()> {
    if s.dim == 1 {
        let mut w = csv_writer(path, &["tile", "count"])?;
        for (k, c) in &s.tile_histogram {
            w.write_record(&[k[0].to_string(), c.to_string()])?;
        }
        w.flush()?;
    } else {
        let mut w = csv_writer(path, &["k1", "k2", "count"])?;
        for (k, c) in &s.tile_histogram {
            w.write_record(&[k[0].to_string(), k[1].to_string(), c.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_samples(path: &Path, samples: &[f64], dim: usize) -> CliResult<()> {
    let header: &[&str] = if dim == 1 { &["z"] } else { &["z1", "z2"] };
    let mut w = csv_writer(path, header)?;
    for row in samples.chunks(dim) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn simulate_1d(args: &SimArgs, env: &Environment, out: &mut Outputs) -> CliResult<Map<String, Value>> {
    let params = params_1d(&args.maps, env.p0())?;
    let mode = match args.mode {
        SimMode::Det => Mode::Deterministic,
        SimMode::Markov => Mode::Markov,
    };
    let mut cfg = Ensemble1D::new(args.n, args.count, mode, args.seed);
    cfg.retain_samples = true;
    cfg.transition_step = args.transition_step;
    let s = run_ensemble_1d(env, &params, &cfg).map_err(refuse_small_env)?;
    let drift = analytic_drift(&params);
    let samples = s.scaled_samples.clone().unwrap_or_default();

    let mut m = common_fields(args, env, &s);
    m.insert("A0".into(), json!(params.a0));
    m.insert("A1".into(), json!(params.a1));
    m.insert("drift_reference".into(), json!(fracs(std::slice::from_ref(&drift))));
    m.insert("scaled_mean".into(), json!(scaled_mean(&samples, 1)));
    if let (Some(t), Some(counts)) = (args.transition_step, s.transition_counts) {
        m.insert("transition_step".into(), json!(t));
        m.insert("transition_counts".into(), json!(counts));
        m.insert("empirical_alpha".into(), json!(empirical_alpha(&counts)));
    }

    write_histogram(&out.path("hist", "hist.csv"), &s)?;
    let mut w = csv_writer(&out.path("ecdf", "ecdf.csv"), &["z", "F"])?;
    if !samples.is_empty() {
        for (z, f) in EmpiricalCdf::new(&samples)?.steps() {
            w.write_record(&[z.to_string(), f.to_string()])?;
        }
    }
    w.flush()?;

    if s.count > s.stopped_count && args.n > 0 {
        let curves = label_density_curves(env, &s, dec_of(&drift), LABEL_BIN_WIDTH)?;
        let mut w = csv_writer(&out.path("labels", "labels.csv"), &["center", "density0", "density1"])?;
        for (i, c) in curves.centers.iter().enumerate() {
            w.write_record(&[
                c.to_string(),
                curves.density[0][i].to_string(),
                curves.density[1][i].to_string(),
            ])?;
        }
        w.flush()?;
        m.insert("label_bin_width".into(), json!(LABEL_BIN_WIDTH));
    }
    if args.retain_samples {
        write_samples(&out.path("samples", "samples.csv"), &samples, 1)?;
    }

    if args.mode == SimMode::Det && args.count == 1 && args.n > 0 {
        // trajectory 0 of the ensemble, replayed with checkpoints
        let mut rng = substream(args.seed, 0);
        let x0 = ExactPoint::sample_interior(&mut rng, 1, &safe_prime_128())?;
        let stride = (args.n / TRACE_ROWS).max(1);
        match drift_trace(env, &params, x0, args.n, stride) {
            Ok((trace, state)) => {
                let mut w = csv_writer(&out.path("trace", "trace.csv"), &["step", "tile", "tile_over_step"])?;
                for (k, v) in trace {
                    w.write_record(&[k.to_string(), v.to_string(), (v as f64 / k as f64).to_string()])?;
                }
                w.flush()?;
                m.insert("lyapunov".into(), json!(state.lyapunov_estimate(&params)));
                m.insert("maps_applied".into(), json!(state.maps_applied));
            }
            Err(Error::StoppedProcess { steps }) => {
                m.insert("trace_stopped_at".into(), json!(steps));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(m)
}

fn dec_of(r: &Rational) -> f64 {
    crate::output::dec(r)
}

fn simulate_2d(args: &SimArgs, env: &Environment, out: &mut Outputs) -> CliResult<Map<String, Value>> {
    let params = params_2d(&args.maps, env.p0())?;
    let analytic = Analytic2D::compute(&params)?;
    let mut cfg = Ensemble2D::new(args.n, args.count, args.seed);
    cfg.retain_samples = true;
    let s = run_ensemble_2d(env, &params, &cfg).map_err(refuse_small_env)?;
    let samples = s.scaled_samples.clone().unwrap_or_default();

    let mut m = common_fields(args, env, &s);
    m.insert("A0".into(), json!(params.a0));
    m.insert("A1".into(), json!(params.a1));
    m.insert("drift_reference".into(), json!(fracs(&analytic.drift)));
    m.insert("drift_reference_decimal".into(), json!(decs(&analytic.drift)));
    m.insert("scaled_mean".into(), json!(scaled_mean(&samples, 2)));

    write_histogram(&out.path("hist", "hist.csv"), &s)?;
    let mut w = csv_writer(&out.path("ecdf", "ecdf.csv"), &["z1", "z2", "ecdf", "gaussian"])?;
    let pairs: Vec<[f64; 2]> = samples.chunks(2).map(|c| [c[0], c[1]]).collect();
    if pairs.len() >= 3 {
        let grid = Grid2::default();
        let g = evaluate_grid_2d(&pairs, grid)?;
        let ny = g.ys.len();
        for (ij, (e, model)) in g.empirical.iter().zip(&g.model).enumerate() {
            w.write_record(&[
                g.xs[ij / ny].to_string(),
                g.ys[ij % ny].to_string(),
                e.to_string(),
                model.to_string(),
            ])?;
        }
        let ks = g.max_difference();
        m.insert(
            "grid_ks".into(),
            json!({
                "max_cdf_diff": ks.distance,
                "at": ks.at,
                "covariance": ks.covariance,
                "points_per_axis": grid.points_per_axis,
                "half_width_sd": grid.half_width_sd,
            }),
        );
    }
    w.flush()?;
    if args.retain_samples {
        write_samples(&out.path("samples", "samples.csv"), &samples, 2)?;
    }
    Ok(m)
}
