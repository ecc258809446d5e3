use std::io::Write;

use qwalk_core::{Analytic1D, Analytic2D};
use serde_json::{json, Value};

use super::{params_1d, params_2d};
use crate::args::{AnalyticArgs, Format, Model};
use crate::error::CliResult;
use crate::output::{dec, decs, frac, fracs, write_json};
use crate::parse;

fn matrix_fracs(m: &[[qwalk_core::Rational; 2]; 2]) -> Value {
    json!([fracs(&m[0]), fracs(&m[1])])
}

fn matrix_decs(m: &[[qwalk_core::Rational; 2]; 2]) -> Value {
    json!([decs(&m[0]), decs(&m[1])])
}

pub fn report(args: &AnalyticArgs) -> CliResult<Value> {
    let p0 = parse::probability(&args.p0)?;
    Ok(match args.model {
        Model::OneD => {
            let params = params_1d(&args.maps, p0)?;
            let a = Analytic1D::compute(&params);
            json!({
                "model": "1d",
                "A0": params.a0,
                "A1": params.a1,
                "p0": frac(&params.p0),
                "p": frac(&a.p),
                "D": frac(&a.drift),
                "sigma2": frac(&a.sigma2),
                "lambda": a.lambda,
                "alpha_star": matrix_fracs(&a.alpha_star),
                "decimal": {
                    "p": dec(&a.p),
                    "D": dec(&a.drift),
                    "sigma2": dec(&a.sigma2),
                    "alpha_star": matrix_decs(&a.alpha_star),
                },
            })
        }
        Model::TwoD => {
            let params = params_2d(&args.maps, p0)?;
            let a = Analytic2D::compute(&params)?;
            json!({
                "model": "2d",
                "A0": params.a0,
                "A1": params.a1,
                "p0": frac(&params.p0),
                "p": frac(&a.p),
                "self_overlap": fracs(&a.self_overlap),
                "alpha_star": matrix_fracs(&a.alpha_star),
                "D0": fracs(&a.d0),
                "D1": fracs(&a.d1),
                "D": fracs(&a.drift),
                "decimal": {
                    "p": dec(&a.p),
                    "self_overlap": decs(&a.self_overlap),
                    "alpha_star": matrix_decs(&a.alpha_star),
                    "D0": decs(&a.d0),
                    "D1": decs(&a.d1),
                    "D": decs(&a.drift),
                },
            })
        }
    })
}

fn text(v: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = v {
        for (k, val) in map {
            if k != "decimal" {
                out.push_str(&format!("{k} = {}\n", val.to_string().replace('"', "")));
            }
        }
    }
    out
}

pub fn run(args: &AnalyticArgs) -> CliResult<()> {
    let v = report(args)?;
    match (&args.out, args.format) {
        (Some(path), Format::Json) => write_json(path, &v)?,
        (Some(path), Format::Text) => std::fs::write(path, text(&v))?,
        (None, Format::Json) => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &v)?;
            writeln!(stdout)?;
        }
        (None, Format::Text) => print!("{}", text(&v)),
    }
    Ok(())
}
