//! `--config <file>` support.
//!
//! The file holds `key = value` lines (blank lines and `#` comments are
//! skipped). Each key names a long flag of the chosen subcommand. Keys
//! already given on the command line are ignored, so the command line wins.
//! A value of `true` turns a switch on; `false` leaves it off.

use std::fs;

use anyhow::{bail, Context, Result};

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", lineno + 1);
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            bail!("config line {}: empty key", lineno + 1);
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn flag_present(args: &[String], key: &str) -> bool {
    let long = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == long || a.starts_with(&prefix))
}

/// Removes `--config <file>` from `args` and appends the file's settings
/// for every flag not already present.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            path = Some(iter.next().context("--config needs a file path")?);
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            out.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(out);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let mut extra = Vec::new();
    for (key, value) in parse_config(&text)? {
        if flag_present(&out, &key) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(format!("--{key}")),
            "false" => {}
            _ => extra.push(format!("--{key}={value}")),
        }
    }
    out.extend(extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\nsigma = 0.5\ndiv=kl\nnmax-auto = true\nbeta-auto = false\n").unwrap();
        let args = strings(&["tmlmc", "train", "--sigma", "0.2", "--config", path.to_str().unwrap()]);
        let out = expand_config(args).unwrap();
        assert_eq!(out, strings(&["tmlmc", "train", "--sigma", "0.2", "--div=kl", "--nmax-auto"]));
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(parse_config("sigma 0.2").is_err());
        assert!(parse_config("= 3").is_err());
    }
}
