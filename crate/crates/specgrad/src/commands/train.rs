use std::io::Write;

use serde_json::{json, Map, Value};
use specgrad_core::training::{
    make_dataset, run_hybrid_training, DatasetKind, HybridSchedule, StepRecord, ToyModelSpec, TrainingLog,
    TrainingOutcome,
};

use super::{build_scheme, emit, resolve_seed};
use crate::cli::{DatasetArg, TrainArgs};
use crate::error::{CliError, Result, EXIT_DIVERGED, EXIT_OK};
use crate::table::{json_num, num_json};

/// `step:lr` pairs separated by commas.
pub fn parse_lr_schedule(s: &str) -> Result<Vec<(usize, f64)>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let bad = || CliError::usage(format!("--lr-schedule: expected step:lr, got `{t}`"));
            let (a, b) = t.split_once(':').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

pub fn step_json(r: &StepRecord) -> Value {
    json!({
        "type": "step",
        "step": r.step,
        "loss": num_json(r.loss),
        "accuracy": num_json(r.accuracy),
        "mean_cond": num_json(r.mean_cond),
        "scheme": r.scheme,
        "lr": num_json(r.lr),
    })
}

pub fn summary_json(log: &TrainingLog) -> Value {
    let (outcome, step, reason) = match &log.outcome {
        TrainingOutcome::Completed => ("completed", None, None),
        TrainingOutcome::Diverged { step, reason } => ("diverged", Some(*step), Some(reason.clone())),
    };
    let opt = |v: Option<f64>| v.map(num_json).unwrap_or(Value::Null);
    let nonempty = !log.records.is_empty();
    json!({
        "type": "summary",
        "outcome": outcome,
        "diverged_step": step,
        "reason": reason,
        "steps_logged": log.records.len(),
        "final_loss": opt(nonempty.then(|| log.final_loss())),
        "final_train_error": opt(log.final_train_error),
        "early_mean_cond": opt(nonempty.then(|| log.early_mean_cond())),
        "late_mean_cond": opt(nonempty.then(|| log.late_mean_cond())),
        "swap_gap": opt(log.swap_gap),
    })
}

/// One JSON object per line: the resolved configuration, every step, then
/// a summary.
pub fn render_log(config: &Map<String, Value>, log: &TrainingLog) -> String {
    let mut head = Map::new();
    head.insert("type".into(), "config".into());
    head.extend(config.clone());
    let mut out = serde_json::to_string(&Value::Object(head)).expect("serializable");
    out.push('\n');
    for r in &log.records {
        out.push_str(&serde_json::to_string(&step_json(r)).expect("serializable"));
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&summary_json(log)).expect("serializable"));
    out.push('\n');
    out
}

/// A log read back from its JSON-lines form.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedLog {
    pub config: Map<String, Value>,
    pub records: Vec<StepRecord>,
    pub summary: Map<String, Value>,
}

pub fn parse_log(text: &str) -> Result<ParsedLog> {
    let bad = |m: String| CliError::format("training log", m);
    let mut config = None;
    let mut records = Vec::new();
    let mut summary = None;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        let Value::Object(mut obj) = v else { return Err(bad(format!("line {}: not an object", i + 1))) };
        let kind = obj.remove("type").and_then(|t| t.as_str().map(str::to_string));
        match kind.as_deref() {
            Some("config") => config = Some(obj),
            Some("summary") => summary = Some(obj),
            Some("step") => {
                let num = |k: &str| obj.get(k).and_then(json_num).ok_or_else(|| bad(format!("line {}: missing {k}", i + 1)));
                records.push(StepRecord {
                    step: obj.get("step").and_then(Value::as_u64).ok_or_else(|| bad(format!("line {}: missing step", i + 1)))?
                        as usize,
                    loss: num("loss")?,
                    accuracy: num("accuracy")?,
                    mean_cond: num("mean_cond")?,
                    scheme: obj.get("scheme").and_then(Value::as_str).unwrap_or_default().to_string(),
                    lr: num("lr")?,
                });
            }
            _ => return Err(bad(format!("line {}: unknown record type", i + 1))),
        }
    }
    Ok(ParsedLog {
        config: config.ok_or_else(|| bad("missing config record".into()))?,
        records,
        summary: summary.ok_or_else(|| bad("missing summary record".into()))?,
    })
}

pub fn run(args: &TrainArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = resolve_seed(&args.common)?;
    let post = build_scheme(&args.backward, args.d, &args.scheme_args)?;
    let spec = ToyModelSpec {
        classes: args.classes,
        d_in: args.d,
        d: args.d,
        n: args.n,
        samples_per_class: args.samples_per_class,
        batch_size: args.batch_size,
        steps: args.steps,
        ns_iterations: args.ns_iters,
        dataset: match args.dataset {
            DatasetArg::Gaussian => DatasetKind::Gaussian,
            DatasetArg::Fine => DatasetKind::Fine,
        },
        weight_decay: args.weight_decay,
        seed,
    };
    let lr = match &args.lr_schedule {
        Some(s) => parse_lr_schedule(s)?,
        None => HybridSchedule::default_lr(args.steps, args.lr),
    };
    let schedule = HybridSchedule::from_fractions(args.steps, args.switch_frac, args.warmup_frac, post, lr)?;
    let data = make_dataset(&spec)?;
    let log = run_hybrid_training(&spec, &schedule, &data)?;

    let mut config = Map::new();
    config.insert("command".into(), "train-toy".into());
    config.insert("dataset".into(), spec.dataset.name().into());
    config.insert("classes".into(), spec.classes.into());
    config.insert("d".into(), spec.d.into());
    config.insert("n".into(), spec.n.into());
    config.insert("samples_per_class".into(), spec.samples_per_class.into());
    config.insert("batch_size".into(), spec.batch_size.into());
    config.insert("steps".into(), spec.steps.into());
    config.insert("ns_iters".into(), spec.ns_iterations.into());
    config.insert("weight_decay".into(), num_json(spec.weight_decay));
    config.insert("post_switch_scheme".into(), post.describe().into());
    config.insert("switch_step".into(), schedule.switch_step.map(Value::from).unwrap_or(Value::Null));
    config.insert("warmup_steps".into(), schedule.warmup_steps.into());
    config.insert(
        "lr_schedule".into(),
        Value::Array(schedule.lr_schedule.iter().map(|&(s, l)| json!([s, num_json(l)])).collect()),
    );
    config.insert("momentum".into(), num_json(specgrad_core::training::MOMENTUM));
    config.insert("seed".into(), seed.into());

    emit(args.common.out.as_deref(), render_log(&config, &log).as_bytes(), stdout)?;
    Ok(if log.completed() { EXIT_OK } else { EXIT_DIVERGED })
}
