use std::io::{BufRead, Write};

use super::{Atom, Configuration};
use crate::error::{Error, Result};

/// Writes `T d n` followed by one `time mark...` line per atom, 17 significant digits.
pub fn write_configuration(cfg: &Configuration, mut out: impl Write) -> Result<()> {
    writeln!(out, "{:.16e} {} {}", cfg.horizon(), cfg.dim(), cfg.len())?;
    for a in cfg.atoms() {
        write!(out, "{:.16e}", a.time)?;
        for x in &a.mark {
            write!(out, " {x:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|e| parse_err(line, format!("bad number {tok:?}: {e}")))
}

/// Reads the format produced by [`write_configuration`]. Blank lines and `#` comments are skipped.
/// Times must be strictly increasing.
pub fn read_configuration(input: impl BufRead) -> Result<Configuration> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let header = header?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 {
        return Err(parse_err(hline, "header must be `T d n`"));
    }
    let horizon = parse_f64(toks[0], hline)?;
    let dim: usize = toks[1].parse().map_err(|_| parse_err(hline, "d must be a positive integer"))?;
    let n: usize = toks[2].parse().map_err(|_| parse_err(hline, "n must be a nonnegative integer"))?;
    if dim == 0 {
        return Err(parse_err(hline, "d must be a positive integer"));
    }
    let mut atoms = Vec::with_capacity(n);
    let mut last_time = f64::NEG_INFINITY;
    for (lineno, line) in lines {
        let line = line?;
        let vals = line.split_whitespace().map(|t| parse_f64(t, lineno)).collect::<Result<Vec<_>>>()?;
        if vals.len() != dim + 1 {
            return Err(parse_err(lineno, format!("expected {} fields, found {}", dim + 1, vals.len())));
        }
        if vals[0] <= last_time {
            let what = if vals[0] == last_time { "duplicate" } else { "unsorted" };
            return Err(parse_err(lineno, format!("{what} time {}", vals[0])));
        }
        last_time = vals[0];
        let atom = Atom::new(vals[0], vals[1..].to_vec()).map_err(|e| parse_err(lineno, e.to_string()))?;
        atoms.push(atom);
    }
    if atoms.len() != n {
        return Err(parse_err(hline, format!("header announces {n} atoms, found {}", atoms.len())));
    }
    Configuration::new(horizon, dim, atoms, "file").map_err(|e| parse_err(hline, e.to_string()))
}
