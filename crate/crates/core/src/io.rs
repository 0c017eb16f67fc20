//! File formats and report serialization.
//!
//! - Signals: JSON `{"offset": i64, "re": [f64...], "im": [f64...]}`; `im` is
//!   optional and omitted when every imaginary part is zero.
//! - Sets: one integer per line; blank lines and `#` comments are ignored.
//! - Witnesses: CSV with header `x,y`.
//! - Reports: compact JSON whose floats carry 17 significant digits, so they
//!   round-trip exactly.

use std::io::{self, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::counting::ProgressionWitness;
use crate::error::{Error, Result};
use crate::signal::Signal;

#[derive(Serialize, Deserialize)]
struct SignalFile {
    offset: i64,
    re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<f64>>,
}

pub fn parse_signal(text: &str) -> Result<Signal> {
    let file: SignalFile = serde_json::from_str(text).map_err(|e| Error::Malformed(format!("signal JSON: {e}")))?;
    let values = match &file.im {
        Some(im) if im.len() != file.re.len() => {
            return Err(Error::Malformed(format!(
                "signal has {} real parts but {} imaginary parts",
                file.re.len(),
                im.len()
            )))
        }
        Some(im) => file.re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect(),
        None => file.re.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
    };
    if file.re.iter().chain(file.im.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Malformed("signal values must be finite".into()));
    }
    Ok(Signal::new(file.offset, values))
}

pub fn signal_to_json(f: &Signal) -> String {
    let re: Vec<f64> = f.values().iter().map(|z| z.re).collect();
    let im: Vec<f64> = f.values().iter().map(|z| z.im).collect();
    let file = SignalFile {
        offset: f.offset(),
        re,
        im: im.iter().any(|&v| v != 0.0).then_some(im),
    };
    to_json(&file)
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    parse_signal(&std::fs::read_to_string(path)?)
}

/// Sorted, deduplicated integers.
pub fn parse_set(text: &str) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line
            .parse()
            .map_err(|_| Error::Malformed(format!("set file line {}: {line:?} is not an integer", lineno + 1)))?;
        out.push(v);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn read_set(path: &Path) -> Result<Vec<i64>> {
    parse_set(&std::fs::read_to_string(path)?)
}

pub fn set_to_text(set: &[i64]) -> String {
    set.iter().map(|x| format!("{x}\n")).collect()
}

pub fn witnesses_to_csv(ws: &[ProgressionWitness]) -> String {
    let mut out = String::from("x,y\n");
    for w in ws {
        out.push_str(&format!("{},{}\n", w.x, w.y));
    }
    out
}

/// `v` with 17 significant digits; non-finite values become `null` in JSON
/// and `NaN`/`inf` in CSV.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// JSON formatter that prints every float with 17 significant digits.
pub struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
