//! `key = value` config files, merged into argv ahead of the user's flags.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;

use clap::Command;

pub type ConfigMap = BTreeMap<String, String>;

pub fn parse_config(text: &str) -> Result<ConfigMap, String> {
    let mut map = ConfigMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("config line {}: expected key = value", no + 1));
        };
        let key = k.trim().trim_start_matches('-');
        if key.is_empty() {
            return Err(format!("config line {}: empty key", no + 1));
        }
        map.insert(key.to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Value of `--config` in raw argv, if any.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Inserts config entries as flags right after the subcommand name, so any
/// flag the user passes later wins. Keys the subcommand does not know are
/// skipped.
pub fn merge_config(cmd: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.to_string_lossy()))?;
    let map = parse_config(&text)?;

    let Some(pos) = args
        .iter()
        .position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some())
    else {
        return Ok(args);
    };
    let sub = cmd
        .find_subcommand(args[pos].to_string_lossy().as_ref())
        .expect("position found above");

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in &map {
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else { continue };
        if key == "config" {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => injected.push(format!("--{key}").into()),
                "false" | "no" | "0" | "off" => {}
                _ => {
                    return Err(format!(
                        "config key {key}: expected true or false, got {value}"
                    ))
                }
            }
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
