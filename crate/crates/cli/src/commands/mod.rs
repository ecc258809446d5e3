pub mod analytic;
pub mod dist;
pub mod env;
pub mod report;
pub mod sim;

use qwalk_core::model2d::Mat2;
use qwalk_core::{Params1D, Params2D, Rational};

use crate::args::MapArgs;
use crate::error::CliResult;
use crate::parse;

pub fn params_1d(maps: &MapArgs, p0: Rational) -> CliResult<Params1D> {
    let a0 = maps.a0.as_deref().map(parse::multiplier).transpose()?.unwrap_or(2);
    let a1 = maps.a1.as_deref().map(parse::multiplier).transpose()?.unwrap_or(3);
    Ok(Params1D::new(a0, a1, p0)?)
}

pub fn params_2d(maps: &MapArgs, p0: Rational) -> CliResult<Params2D> {
    let default = Params2D::example();
    let a0: Mat2 = maps.a0.as_deref().map(parse::matrix2).transpose()?.unwrap_or(default.a0);
    let a1: Mat2 = maps.a1.as_deref().map(parse::matrix2).transpose()?.unwrap_or(default.a1);
    Ok(Params2D::new(a0, a1, p0)?)
}
