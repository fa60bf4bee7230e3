use std::io::Write;

use specgrad_core::{gradient_upper_bound, BackwardScheme, GradBound, Precision};

use super::{emit, parse_precision, resolve_seed};
use crate::cli::BoundsArgs;
use crate::error::{Result, EXIT_OK};
use crate::table::{Cell, Format, Table};

pub const COLUMNS: [&str; 5] = ["scheme", "analytic_form", "max_value", "trigger", "single_safe"];

/// Every backward scheme with the given parameters, in table order.
pub fn schemes(degree: usize, trunc: f64, pi_iters: usize, ns_iters: usize) -> Vec<BackwardScheme> {
    vec![
        BackwardScheme::Ordinary,
        BackwardScheme::TopN(1),
        BackwardScheme::Trunc(trunc),
        BackwardScheme::PowerIteration(pi_iters),
        BackwardScheme::Taylor(degree),
        BackwardScheme::Pade(degree),
        BackwardScheme::NewtonSchulzBackward(ns_iters),
    ]
}

pub fn bound_row(b: &GradBound) -> Vec<Cell> {
    vec![
        Cell::text(b.scheme.label()),
        Cell::text(b.analytic_form),
        match b.max_value {
            Some(v) => Cell::Num(v),
            None => Cell::text("n/a"),
        },
        Cell::text(b.trigger),
        Cell::text(b.single_safe().to_string()),
    ]
}

pub fn bounds_table(args: &BoundsArgs, precision: Precision, seed: u64, format: Format) -> Result<Table> {
    let mut t = Table::new(COLUMNS.iter().map(|s| s.to_string()).collect());
    t.set("command", "bounds");
    t.set("precision", precision.name());
    t.set("eps", crate::numfmt::format_number(precision.eps()));
    t.set("degree", args.degree);
    t.set("trunc_threshold", crate::numfmt::format_number(args.trunc_threshold));
    t.set("pi_iters", args.pi_iters);
    t.set("ns_iters", args.ns_iters);
    t.set("format", format.extension());
    t.set("seed", seed);
    for s in schemes(args.degree, args.trunc_threshold, args.pi_iters, args.ns_iters) {
        s.validate(usize::MAX).map_err(crate::error::CliError::from)?;
        t.push_row(bound_row(&gradient_upper_bound(s, precision)?));
    }
    Ok(t)
}

pub fn run(args: &BoundsArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = resolve_seed(&args.common)?;
    let precision = parse_precision(&args.precision)?;
    let t = bounds_table(args, precision, seed, args.format)?;
    emit(args.common.out.as_deref(), t.render(args.format).as_bytes(), stdout)?;
    Ok(EXIT_OK)
}
