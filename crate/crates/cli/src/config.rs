//! `--config FILE`: a flat TOML table whose keys are long flag names
//! (`burn_in` and `burn-in` both name `--burn-in`). The file's entries are
//! spliced in right after the subcommand, so flags given on the command line
//! win over the file.

use std::ffi::OsString;
use std::path::Path;

/// Subcommands that take a second, nested subcommand name.
const NESTED: [&str; 2] = ["experiment", "dataset"];

pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            out.push(a);
        }
    }
    let Some(path) = config else { return Ok(out) };
    let flags = flags_from_file(Path::new(&path))?;
    let at = insertion_point(&out);
    out.splice(at..at, flags);
    Ok(out)
}

fn insertion_point(args: &[OsString]) -> usize {
    let mut depth = 0;
    for (i, a) in args.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s.starts_with('-') {
            continue;
        }
        depth += 1;
        if depth == 2 || !NESTED.contains(&s.as_ref()) {
            return i + 1;
        }
    }
    args.len()
}

fn flags_from_file(path: &Path) -> Result<Vec<OsString>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    flags_from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn flags_from_str(text: &str) -> Result<Vec<OsString>, String> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String, String> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                _ => Err(format!("`{key}` must be a string, number, boolean or list of those")),
            }
        };
        match &value {
            toml::Value::Boolean(true) => flags.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                flags.push(flag.into());
                flags.push(parts.join(",").into());
            }
            v => {
                flags.push(flag.into());
                flags.push(scalar(v)?.into());
            }
        }
    }
    Ok(flags)
}
