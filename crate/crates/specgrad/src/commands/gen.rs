use std::io::Write;

use specgrad_core::synth::{features_with_spectrum, geometric_spectrum, random_features, seeded_rng};
use specgrad_core::FeatureMatrix;

use super::{emit, resolve_seed};
use crate::cli::GenArgs;
use crate::error::{CliError, Result, EXIT_OK};
use crate::gcpf::FeatureFile;

/// `count` seeded feature blocks: Gaussian entries, or a covariance with a
/// geometric spectrum from 1 down to `1/cond`.
pub fn synthetic_blocks(count: usize, d: usize, n: usize, cond: Option<f64>, seed: u64) -> Result<Vec<FeatureMatrix>> {
    if d == 0 || n < 2 {
        return Err(CliError::usage("need --d >= 1 and --n >= 2"));
    }
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| match cond {
            Some(c) if c >= 1.0 && c.is_finite() => Ok(features_with_spectrum(&geometric_spectrum(d, c), n, &mut rng)?),
            Some(c) => Err(CliError::usage(format!("--cond must be finite and >= 1, got {c}"))),
            None => Ok(random_features(d, n, &mut rng)?),
        })
        .collect()
}

pub fn run(args: &GenArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = resolve_seed(&args.common)?;
    let blocks = synthetic_blocks(args.count, args.d, args.n, args.cond, seed)?;
    let file = FeatureFile::new(args.d, args.n, blocks.into_iter().map(FeatureMatrix::into_matrix).collect())?;
    emit(args.common.out.as_deref(), &file.to_bytes(), stdout)?;
    Ok(EXIT_OK)
}
