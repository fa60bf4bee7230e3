use std::io::Write;

use specgrad_core::{approximation_error_table, ApproxKind, ErrorTable};

use super::{emit, parse_list, parse_precision, resolve_seed};
use crate::cli::{ApproxArgs, KindArg};
use crate::error::{CliError, Result, EXIT_OK};
use crate::table::{Cell, Format, Table};

pub fn to_table(t: &ErrorTable, seed: u64, format: Format) -> Table {
    let mut columns = vec![String::from("ratio")];
    columns.extend(t.degrees.iter().map(|k| format!("deg{k}")));
    let mut table = Table::new(columns);
    table.set("command", "approx-table");
    table.set("kind", t.kind.name());
    table.set("precision", t.precision.name());
    table.set("degrees", t.degrees.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
    table.set("ratios", t.ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","));
    table.set("format", format.extension());
    table.set("seed", seed);
    for (r, row) in t.ratios.iter().zip(&t.values) {
        let mut cells = vec![Cell::Num(*r)];
        cells.extend(row.iter().map(|&v| Cell::Num(v)));
        table.push_row(cells);
    }
    table
}

/// Inverse of [`to_table`].
pub fn from_table(table: &Table) -> Result<ErrorTable> {
    let bad = |m: String| CliError::format("error table", m);
    let kind: ApproxKind = table.get("kind").ok_or_else(|| bad("missing kind".into()))?.parse()?;
    let precision = parse_precision(table.get("precision").ok_or_else(|| bad("missing precision".into()))?)?;
    let degrees = table.columns[1..]
        .iter()
        .map(|c| c.strip_prefix("deg").and_then(|k| k.parse().ok()).ok_or_else(|| bad(format!("bad column `{c}`"))))
        .collect::<Result<Vec<usize>>>()?;
    let mut ratios = Vec::new();
    let mut values = Vec::new();
    for row in &table.rows {
        let nums: Vec<f64> = row.iter().map(|c| c.as_f64().ok_or_else(|| bad(format!("non-numeric cell {c}")))).collect::<Result<_>>()?;
        ratios.push(nums[0]);
        values.push(nums[1..].to_vec());
    }
    Ok(ErrorTable { kind, precision, degrees, ratios, values })
}

pub fn run(args: &ApproxArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = resolve_seed(&args.common)?;
    let degrees: Vec<usize> = parse_list("degrees", &args.degrees)?;
    let ratios: Vec<f64> = parse_list("ratios", &args.ratios)?;
    let precision = parse_precision(&args.precision)?;
    let kinds: &[ApproxKind] = match args.kind {
        KindArg::Taylor => &[ApproxKind::Taylor],
        KindArg::Pade => &[ApproxKind::Pade],
        KindArg::Both => &[ApproxKind::Taylor, ApproxKind::Pade],
    };
    let mut rendered = Vec::new();
    for &kind in kinds {
        let t = approximation_error_table(kind, &degrees, &ratios, precision)?;
        rendered.push((kind, to_table(&t, seed, args.format).render(args.format)));
    }
    match &args.common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            for (kind, text) in &rendered {
                let path = dir.join(format!("{}.{}", kind.name(), args.format.extension()));
                emit(Some(&path), text.as_bytes(), stdout)?;
            }
        }
        None => {
            for (i, (_, text)) in rendered.iter().enumerate() {
                if i > 0 {
                    emit(None, b"\n", stdout)?;
                }
                emit(None, text.as_bytes(), stdout)?;
            }
        }
    }
    Ok(EXIT_OK)
}
