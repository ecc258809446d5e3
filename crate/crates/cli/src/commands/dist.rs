use qwalk_core::model1d::{
    float_precision_for, propagate_distribution, propagate_distribution_float, DistributionVector,
};
use qwalk_core::Environment;
use serde_json::json;

use super::params_1d;
use crate::args::{DistArgs, DistMode};
use crate::error::{usage, CliResult};
use crate::output::{csv_writer, dec, frac};

/// Significant decimal digits printed in float mode.
const FLOAT_DIGITS: usize = 36;

pub fn run(args: &DistArgs) -> CliResult<()> {
    let env = Environment::load(&args.env)?;
    if env.dim() != 1 {
        return usage("dist propagates the 1d tile chain and needs a 1d environment");
    }
    let params = params_1d(&args.maps, env.p0())?;
    let n = args.n;
    let report = match args.mode {
        DistMode::Exact => {
            if n > args.max_exact_n {
                return usage(format!(
                    "exact mode is capped at n = {} (denominators grow like lcm(A0,A1)^n); use --mode float",
                    args.max_exact_n
                ));
            }
            let rho = propagate_distribution(&env, &params, &DistributionVector::point_mass(0), n)?;
            let mut w = csv_writer(&args.out, &["tile", "probability"])?;
            for (k, p) in rho.weights() {
                w.write_record(&[k.to_string(), frac(&p)])?;
            }
            w.flush()?;
            let (mean, var) = (rho.mean(), rho.variance());
            let scale = n.max(1) as f64;
            json!({
                "mode": "exact",
                "n": n,
                "total": frac(&rho.total()),
                "mean": dec(&mean),
                "variance": dec(&var),
                "mean_over_n": dec(&mean) / scale,
                "var_over_n": dec(&var) / scale,
                "mean_exact": frac(&mean),
                "variance_exact": frac(&var),
            })
        }
        DistMode::Float => {
            let precision = args.precision.unwrap_or_else(|| float_precision_for(n));
            let rho = propagate_distribution_float(&env, &params, n, precision)?;
            let mut w = csv_writer(&args.out, &["tile", "probability"])?;
            for (i, p) in rho.weights.iter().enumerate() {
                let d = p.to_decimal().value().with_precision(FLOAT_DIGITS).value();
                w.write_record(&[(rho.offset + i).to_string(), d.to_string()])?;
            }
            w.flush()?;
            let (mean, var) = rho.mean_variance();
            let scale = n.max(1) as f64;
            json!({
                "mode": "float",
                "n": n,
                "precision_bits": precision,
                "mean": mean,
                "variance": var,
                "mean_over_n": mean / scale,
                "var_over_n": var / scale,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
