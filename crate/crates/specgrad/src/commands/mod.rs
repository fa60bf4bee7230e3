pub mod approx;
pub mod bounds;
pub mod condition;
pub mod gen;
pub mod gradcheck;
pub mod train;

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use specgrad_core::svd_grad::{default_top_n, DEFAULT_DEGREE, DEFAULT_NS_BACKWARD_ITERATIONS, DEFAULT_PI_ITERATIONS};
use specgrad_core::{BackwardScheme, Precision};

use crate::cli::{Common, SchemeArgs};
use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "SPECGRAD_SEED";

/// `--seed`, else `SPECGRAD_SEED`, else 0.
pub fn resolve_seed(common: &Common) -> Result<u64> {
    if let Some(s) = common.seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn parse_list<T: FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::usage(format!("--{flag}: cannot parse `{t}`"))))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(CliError::usage(format!("--{flag} is empty")));
    }
    Ok(items)
}

pub fn parse_precision(s: &str) -> Result<Precision> {
    s.parse().map_err(|_| CliError::usage(format!("--precision must be single or double, got `{s}`")))
}

pub fn build_scheme(name: &str, d: usize, a: &SchemeArgs) -> Result<BackwardScheme> {
    let base = BackwardScheme::from_name(name, d).map_err(|e| CliError::usage(e.to_string()))?;
    let scheme = match base {
        BackwardScheme::TopN(_) => BackwardScheme::TopN(a.topn.unwrap_or(default_top_n(d))),
        BackwardScheme::Trunc(t) => BackwardScheme::Trunc(a.trunc_threshold.unwrap_or(t)),
        BackwardScheme::Taylor(_) => BackwardScheme::Taylor(a.degree.unwrap_or(DEFAULT_DEGREE)),
        BackwardScheme::Pade(_) => BackwardScheme::Pade(a.degree.unwrap_or(DEFAULT_DEGREE)),
        BackwardScheme::PowerIteration(_) => BackwardScheme::PowerIteration(a.iters.unwrap_or(DEFAULT_PI_ITERATIONS)),
        BackwardScheme::NewtonSchulzBackward(_) => {
            BackwardScheme::NewtonSchulzBackward(a.iters.unwrap_or(DEFAULT_NS_BACKWARD_ITERATIONS))
        }
        BackwardScheme::Ordinary => BackwardScheme::Ordinary,
    };
    scheme.validate(d).map_err(|e| CliError::usage(e.to_string()))?;
    Ok(scheme)
}

/// Writes `content` to `path`, or to `stdout` when no path is given.
pub fn emit(path: Option<&Path>, content: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| CliError::io(p, e)),
        None => stdout.write_all(content).map_err(|e| CliError::io("<stdout>", e)),
    }
}
