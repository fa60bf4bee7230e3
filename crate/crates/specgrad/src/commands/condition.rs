use std::io::Write;

use specgrad_core::{condition_number, covariance, eigh, FeatureMatrix};

use super::gen::synthetic_blocks;
use super::{emit, resolve_seed};
use crate::cli::ConditionArgs;
use crate::error::{CliError, Result, EXIT_OK};
use crate::gcpf::FeatureFile;
use crate::numfmt::format_number;
use crate::table::{Cell, Format, Table};

pub const COLUMNS: [&str; 5] = ["index", "lambda_max", "lambda_min", "condition", "ill_conditioned"];

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionSummary {
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    pub ill_fraction: f64,
}

pub fn condition_table(blocks: &[FeatureMatrix], source: &str, seed: u64, format: Format) -> Result<(Table, ConditionSummary)> {
    let mut t = Table::new(COLUMNS.iter().map(|s| s.to_string()).collect());
    let (mut sum, mut max, mut ill) = (0.0, 0.0f64, 0usize);
    for (i, x) in blocks.iter().enumerate() {
        let e = eigh(&covariance(x))?;
        let c = condition_number(&e);
        let ev = e.eigenvalues();
        sum += c.value;
        max = max.max(c.value);
        ill += c.ill_conditioned as usize;
        t.push_row(vec![
            Cell::Num(i as f64),
            Cell::Num(ev[0]),
            Cell::Num(ev[ev.len() - 1]),
            Cell::Num(c.value),
            Cell::text(c.ill_conditioned.to_string()),
        ]);
    }
    let count = blocks.len();
    let summary = ConditionSummary {
        count,
        mean: if count > 0 { sum / count as f64 } else { f64::NAN },
        max: if count > 0 { max } else { f64::NAN },
        ill_fraction: if count > 0 { ill as f64 / count as f64 } else { f64::NAN },
    };
    t.set("command", "condition");
    t.set("source", source);
    t.set("format", format.extension());
    t.set("seed", seed);
    t.set("count", count);
    t.set("mean_condition", format_number(summary.mean));
    t.set("max_condition", format_number(summary.max));
    t.set("ill_fraction", format_number(summary.ill_fraction));
    t.set("ill_threshold", format_number(specgrad_core::spectral::ILL_CONDITIONED_THRESHOLD));
    Ok((t, summary))
}

pub fn run(args: &ConditionArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = resolve_seed(&args.common)?;
    let (blocks, source) = match &args.input {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
            (FeatureFile::from_bytes(&bytes)?.features()?, path.display().to_string())
        }
        None => {
            let source = match args.cond {
                Some(c) => format!("synthetic(d={},n={},count={},cond={})", args.d, args.n, args.count, format_number(c)),
                None => format!("synthetic(d={},n={},count={},gaussian)", args.d, args.n, args.count),
            };
            (synthetic_blocks(args.count, args.d, args.n, args.cond, seed)?, source)
        }
    };
    let (t, _) = condition_table(&blocks, &source, seed, args.format)?;
    emit(args.common.out.as_deref(), t.render(args.format).as_bytes(), stdout)?;
    Ok(EXIT_OK)
}
