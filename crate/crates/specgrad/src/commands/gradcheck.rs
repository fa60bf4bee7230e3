use std::io::Write;

use serde_json::{json, Value};
use specgrad_core::synth::{features_with_spectrum, geometric_spectrum, seeded_rng};
use specgrad_core::{layer::grad_check_with_tolerance, BackwardScheme, ForwardMethod, GcpLayerConfig, GradCheckReport, LossKind};

use super::{build_scheme, emit, parse_precision, resolve_seed};
use crate::cli::{ForwardArg, GradcheckArgs, LossArg};
use crate::error::{CliError, Result, EXIT_CHECK_FAILED, EXIT_OK};
use crate::table::num_json;

pub fn report_json(r: &GradCheckReport) -> Value {
    json!({
        "layer": r.config,
        "scheme": r.scheme,
        "loss": r.loss,
        "max_rel_error": num_json(r.max_rel_error),
        "mean_rel_error": num_json(r.mean_rel_error),
        "n_nonfinite": r.n_nonfinite,
        "worst": [r.worst.0, r.worst.1],
        "tolerance": num_json(r.tolerance),
        "bias": r.bias,
        "failure": r.failure,
        "passed": r.passed(),
    })
}

pub fn run(args: &GradcheckArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = resolve_seed(&args.common)?;
    let d = args.d;
    if d == 0 {
        return Err(CliError::usage("--d must be at least 1"));
    }
    let n = args.n.unwrap_or((2 * d).max(16));
    if !(args.cond >= 1.0) || !args.cond.is_finite() {
        return Err(CliError::usage(format!("--cond must be finite and >= 1, got {}", args.cond)));
    }
    let precision = parse_precision(&args.precision)?;
    let scheme = build_scheme(&args.scheme, d, &args.scheme_args)?;
    let forward = match args.forward {
        ForwardArg::Eig => ForwardMethod::EigSqrt,
        ForwardArg::Ns => match scheme {
            BackwardScheme::NewtonSchulzBackward(k) => ForwardMethod::NewtonSchulz(k),
            other => {
                return Err(CliError::usage(format!("--forward ns pairs only with ns-backward, not {}", other.name())))
            }
        },
    };
    let cfg = GcpLayerConfig::new(forward, scheme, precision)?;
    let loss = match args.loss {
        LossArg::Sum => LossKind::Sum,
        LossArg::Trace => LossKind::Trace,
        LossArg::RandomLinear => LossKind::RandomLinear(seed ^ 0x10_55),
    };
    let mut rng = seeded_rng(seed);
    let x = features_with_spectrum(&geometric_spectrum(d, args.cond), n, &mut rng)?;
    let report = grad_check_with_tolerance(&cfg, &x, loss, args.tolerance)?;

    let doc = json!({
        "command": "gradcheck",
        "config": {
            "scheme": scheme.describe(),
            "forward": forward.describe(),
            "precision": precision.name(),
            "d": d,
            "n": n,
            "cond": num_json(args.cond),
            "loss": loss.name(),
            "tolerance": num_json(args.tolerance),
            "seed": seed,
        },
        "report": report_json(&report),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    emit(args.common.out.as_deref(), text.as_bytes(), stdout)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}
