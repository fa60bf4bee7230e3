//! `key=value` config files merged under command-line flags.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; keys may carry a leading `--`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value, got `{line}`", lineno + 1)))?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", lineno + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Result<Option<PathBuf>> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(s) = a.to_str() else { continue };
        if s == "--" {
            break;
        }
        if s == "--config" {
            return match it.next() {
                Some(p) => Ok(Some(PathBuf::from(p))),
                None => Err(CliError::usage("--config needs a path")),
            };
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

/// Splices the entries of the `--config` file (if any) in front of the
/// flags that follow the subcommand, so explicit flags win.
pub fn merge_config_file(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args)? else { return Ok(args) };
    let text = read_text(&path)?;
    let entries = parse_config(&text)?;
    // Program name and subcommand stay in front.
    let split = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 2).unwrap_or(args.len());
    let mut merged: Vec<OsString> = args[..split].to_vec();
    for (k, v) in entries {
        if k == "config" {
            return Err(CliError::usage("config files cannot include other config files"));
        }
        merged.push(format!("--{k}").into());
        merged.push(v.into());
    }
    merged.extend_from_slice(&args[split..]);
    Ok(merged)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        let c = parse_config("# comment\n\nd = 8\n--cond=1e6\nratios=0.1,0.5\n").unwrap();
        assert_eq!(
            c,
            vec![("d".into(), "8".into()), ("cond".into(), "1e6".into()), ("ratios".into(), "0.1,0.5".into())]
        );
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("=3\n").is_err());
    }

    #[test]
    fn file_entries_go_before_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "d=8\nseed=3\n").unwrap();
        let args: Vec<OsString> =
            ["specgrad", "gradcheck", "--config", p.to_str().unwrap(), "--d", "4"].iter().map(OsString::from).collect();
        let merged = merge_config_file(args).unwrap();
        let s: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(&s[..6], &["specgrad", "gradcheck", "--d", "8", "--seed", "3"]);
        assert_eq!(&s[8..], &["--d", "4"]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let args: Vec<OsString> = ["specgrad", "bounds", "--config", "/nonexistent/x.conf"].iter().map(OsString::from).collect();
        assert_eq!(merge_config_file(args).unwrap_err().exit_code(), crate::error::EXIT_IO);
    }
}
