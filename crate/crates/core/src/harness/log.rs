//! Per-step CSV log.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub time: f64,
    pub e_s_norm: f64,
    pub z_norm: f64,
    pub e_x: f64,
    pub d_cd: f64,
    pub e_d_norm: f64,
    pub l_t: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_norm: f64,
    pub v: Vec<f64>,
}

pub const HEADER_PREFIX: &str =
    "step,time,e_s_norm,z_norm,e_x,d_cd,e_d_norm,l_t,theta_min,theta_max,theta_norm";

/// Header with `v_0 .. v_{n-1}`.
pub fn header(v_len: usize) -> String {
    let mut h = HEADER_PREFIX.to_string();
    for i in 0..v_len {
        h.push_str(&format!(",v_{i}"));
    }
    h
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl StepLog {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},", self.step);
        for x in [self.time, self.e_s_norm, self.z_norm, self.e_x, self.d_cd, self.e_d_norm] {
            out.push_str(&format_float(x));
            out.push(',');
        }
        out.push_str(&self.l_t.to_string());
        for x in [self.theta_min, self.theta_max, self.theta_norm].iter().chain(&self.v) {
            out.push(',');
            out.push_str(&format_float(*x));
        }
        out
    }
}

/// Writes the header on creation and one line per row.
pub struct CsvLogger<'a> {
    sink: Option<&'a mut dyn Write>,
}

impl<'a> CsvLogger<'a> {
    pub fn new(mut sink: Option<&'a mut dyn Write>, v_len: usize) -> Result<Self> {
        if let Some(w) = sink.as_mut() {
            writeln!(w, "{}", header(v_len))?;
        }
        Ok(Self { sink })
    }

    pub fn write(&mut self, row: &StepLog) -> Result<()> {
        if let Some(w) = self.sink.as_mut() {
            writeln!(w, "{}", row.to_csv())?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(w) = self.sink.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}
