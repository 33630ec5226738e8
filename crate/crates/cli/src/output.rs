use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::config::Format;
use crate::error::{CliError, Result};

/// Formats `x` like C's `%.17g`: enough digits that parsing the text gives
/// back the same double.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn opt_g17(x: Option<f64>) -> String {
    x.map(g17).unwrap_or_default()
}

/// One command's result: a JSON document and an equivalent flat table.
#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => {
                let mut s =
                    serde_json::to_string_pretty(&self.json).expect("JSON values always serialize");
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
                w.write_record(&self.header).map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record(row).map_err(csv_err)?;
                }
                let bytes = w
                    .into_inner()
                    .map_err(|e| CliError::Config(format!("csv: {e}")))?;
                Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
            }
        }
    }

    pub fn emit(&self, format: Format, output: Option<&Path>) -> Result<()> {
        let text = self.render(format)?;
        match output {
            Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            }),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|source| CliError::Io {
                        path: "<stdout>".into(),
                        source,
                    })
            }
        }
    }
}
