//! Flat `key = value` config files whose keys are long flag names.
//!
//! Config entries are spliced into the argument list right after the
//! subcommand, ahead of the user's own flags, so flags given on the command
//! line win.

use std::fs;

pub const SUBCOMMANDS: [&str; 6] = ["bench-ideal", "synth", "encode", "decode", "metrics", "convert"];

/// Parse a config file into `--key value` arguments.
pub fn parse_config(text: &str, source: &str) -> Result<Vec<String>, String> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{source}:{}: expected `key = value`, found `{line}`", i + 1));
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(format!("{source}:{}: invalid key `{key}`", i + 1));
        }
        if key == "config" {
            return Err(format!(
                "{source}:{}: config files cannot include other config files",
                i + 1
            ));
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

/// Remove `--config <path>` from `argv` and splice the file's entries in
/// after the subcommand name.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut config_path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config_path = Some(it.next().ok_or("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        } else {
            out.push(a);
        }
    }
    let Some(path) = config_path else {
        return Ok(out);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config file {path}: {e}"))?;
    let extra = parse_config(&text, &path)?;
    let pos = out
        .iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .map(|p| p + 2)
        .ok_or("--config given without a subcommand")?;
    out.splice(pos..pos, extra);
    Ok(out)
}
