//! Single-line JSON objects with fixed-precision floats.
//!
//! Floats are printed with 17 significant digits (`1.2345678901234567e-1`
//! style), which round-trips every `f64`. Non-finite floats become `null`.

use std::fmt::Write as _;

use crate::features::FeatureVector;
use crate::spectral::HarmonicReport;

#[derive(Debug, Default)]
pub struct JsonObject {
    buf: String,
    first: bool,
}

/// 17 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn escape_into(buf: &mut String, s: &str) {
    buf.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

impl JsonObject {
    pub fn new() -> Self {
        Self {
            buf: String::from("{"),
            first: true,
        }
    }

    fn key(&mut self, k: &str) {
        if !self.first {
            self.buf.push(',');
        }
        self.first = false;
        escape_into(&mut self.buf, k);
        self.buf.push(':');
    }

    pub fn str(mut self, k: &str, v: &str) -> Self {
        self.key(k);
        escape_into(&mut self.buf, v);
        self
    }

    pub fn float(mut self, k: &str, v: f64) -> Self {
        self.key(k);
        self.buf.push_str(&fmt_float(v));
        self
    }

    pub fn int(mut self, k: &str, v: i64) -> Self {
        self.key(k);
        let _ = write!(self.buf, "{v}");
        self
    }

    pub fn bool(mut self, k: &str, v: bool) -> Self {
        self.key(k);
        self.buf.push_str(if v { "true" } else { "false" });
        self
    }

    pub fn null(mut self, k: &str) -> Self {
        self.key(k);
        self.buf.push_str("null");
        self
    }

    /// Embeds an already-serialized JSON value.
    pub fn raw(mut self, k: &str, json: &str) -> Self {
        self.key(k);
        self.buf.push_str(json);
        self
    }

    pub fn finish(mut self) -> String {
        self.buf.push('}');
        self.buf
    }
}

/// Serializes a list of already-serialized JSON values.
pub fn array(items: &[String]) -> String {
    format!("[{}]", items.join(","))
}

/// One feature line: `t_us, channel, n, mean, std, rms, cf, ki, degenerate`.
pub fn feature_vector(fv: &FeatureVector) -> String {
    JsonObject::new()
        .int("t_us", fv.start_time_us)
        .str("channel", &fv.channel_id)
        .int("n", fv.n as i64)
        .float("mean", fv.mean)
        .float("std", fv.std)
        .float("rms", fv.rms)
        .float("cf", fv.cf)
        .float("ki", fv.ki)
        .bool("degenerate", fv.degenerate)
        .finish()
}

pub fn harmonic_report(r: &HarmonicReport) -> String {
    let harmonics: Vec<String> = r
        .harmonics
        .iter()
        .map(|h| {
            JsonObject::new()
                .int("order", h.order as i64)
                .float("freq_hz", h.freq_hz)
                .float("magnitude_db", h.magnitude_db)
                .finish()
        })
        .collect();
    JsonObject::new()
        .float("fundamental_hz", r.fundamental_hz)
        .raw("harmonics", &array(&harmonics))
        .float("confidence", r.confidence)
        .finish()
}
