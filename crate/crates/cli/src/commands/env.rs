use qwalk_core::Environment;

use crate::args::EnvArgs;
use crate::error::{usage, CliResult};
use crate::output::{dec, frac};
use crate::parse;

pub fn run(args: &EnvArgs) -> CliResult<()> {
    if !(1..=2).contains(&args.dim) {
        return usage(format!("--dim must be 1 or 2, got {}", args.dim));
    }
    let p0 = parse::probability(&args.p0)?;
    let extent = parse::extent(&args.extent, args.dim)?;
    let env = Environment::generate(args.seed, &p0, args.dim, &extent)?;
    env.save(&args.out)?;
    let f = env.label_fraction();
    println!("label_fraction {} ({:.6}) over {} tiles", frac(&f), dec(&f), env.len());
    Ok(())
}
