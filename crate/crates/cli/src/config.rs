use std::path::Path;

use crate::{Failure, Flags, Format};

/// Fills every flag not given on the command line from a `key = value` file.
/// Blank lines and lines starting with `#` are skipped; `_` and `-` are
/// interchangeable in keys.
pub fn merge_file(flags: &mut Flags, path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    merge_str(flags, &text)
}

pub fn merge_str(flags: &mut Flags, text: &str) -> Result<(), Failure> {
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!("config line {}: expected key = value", n + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        let bad = |what: &str| Failure::Usage(format!("config line {}: {key} expects {what}, got {value:?}", n + 1));
        let real = || value.parse::<f64>().map_err(|_| bad("a number"));
        match key.as_str() {
            "a" => set(&mut flags.a, value.to_string()),
            "gamma" => set(&mut flags.gamma, value.to_string()),
            "b" => set(&mut flags.b, value.to_string()),
            "p" => set(&mut flags.p, value.to_string()),
            "k" => set(&mut flags.k, real()?),
            "z0" => set(&mut flags.z0, real()?),
            "t-end" => set(&mut flags.t_end, real()?),
            "period" => set(&mut flags.period, real()?),
            "k-lo" => set(&mut flags.k_lo, real()?),
            "k-hi" => set(&mut flags.k_hi, real()?),
            "k-step" => set(&mut flags.k_step, real()?),
            "tol" => set(&mut flags.tol, real()?),
            "horizon" => set(&mut flags.horizon, real()?),
            "samples" => set(&mut flags.samples, value.parse().map_err(|_| bad("a count"))?),
            "out" => set(&mut flags.out, value.into()),
            "rows" => set(&mut flags.rows, value.to_string()),
            "format" => set(
                &mut flags.format,
                match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad("csv or json")),
                },
            ),
            _ => return Err(Failure::Usage(format!("config line {}: unknown key {key:?}", n + 1))),
        }
    }
    Ok(())
}

fn set<T>(slot: &mut Option<T>, v: T) {
    if slot.is_none() {
        *slot = Some(v);
    }
}
