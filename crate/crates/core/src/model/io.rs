//! Plain-text parameter files.
//!
//! ```text
//! epf-params 1
//! architecture MLPReducedLinear
//! input_dim 175
//! hidden_n 16
//! skip_widths 15 15 ... 14      (or `skip_widths -` without a skip path)
//! values 6297
//! <one value per line>
//! ```
//!
//! Values are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the parameters bit for bit.

use std::io::{BufRead, Write};

use crate::error::{EpfError, Result};
use crate::model::{ParamSet, ParamShape};

const MAGIC: &str = "epf-params 1";

pub fn write_params<W: Write>(mut out: W, architecture: &str, params: &ParamSet) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "architecture {architecture}")?;
    writeln!(out, "input_dim {}", params.shape.input_dim)?;
    writeln!(out, "hidden_n {}", params.shape.hidden_n)?;
    if params.shape.skip_widths.is_empty() {
        writeln!(out, "skip_widths -")?;
    } else {
        let widths: Vec<String> = params.shape.skip_widths.iter().map(|w| w.to_string()).collect();
        writeln!(out, "skip_widths {}", widths.join(" "))?;
    }
    writeln!(out, "values {}", params.values.len())?;
    for v in &params.values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Returns the architecture name stored in the header and the parameters.
pub fn read_params<R: BufRead>(input: R) -> Result<(String, ParamSet)> {
    let mut lines = input.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| EpfError::Data(format!("parameter file truncated before {what}")))
    };
    if next("header")?.trim() != MAGIC {
        return Err(EpfError::Data("not an epf parameter file".into()));
    }
    let field = |line: String, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(|s| s.trim().to_string())
            .ok_or_else(|| EpfError::Data(format!("expected `{key}` line, got `{line}`")))
    };
    let parse_usize = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| EpfError::Data(format!("invalid integer `{s}` in parameter file")))
    };
    let architecture = field(next("architecture")?, "architecture")?;
    let input_dim = parse_usize(&field(next("input_dim")?, "input_dim")?)?;
    let hidden_n = parse_usize(&field(next("hidden_n")?, "hidden_n")?)?;
    let widths = field(next("skip_widths")?, "skip_widths")?;
    let skip_widths = if widths == "-" {
        Vec::new()
    } else {
        widths.split_whitespace().map(parse_usize).collect::<Result<_>>()?
    };
    let count = parse_usize(&field(next("values")?, "values")?)?;
    let shape = ParamShape {
        skip_widths,
        input_dim,
        hidden_n,
    };
    if shape.len() != count {
        return Err(EpfError::dim(shape.len(), count, "parameter file value count"));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next("values")?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| EpfError::Data(format!("invalid value `{line}` in parameter file")))?;
        values.push(v);
    }
    Ok((architecture, ParamSet { shape, values }))
}
