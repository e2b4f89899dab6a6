//! Run traces and their JSON Lines encoding.
//!
//! Line 1 is the header, then one record per iterate. Floats use the
//! shortest representation that parses back to the same bits, and the
//! non-finite values that can legitimately occur (an indicator `g` outside
//! its domain) are written as the strings `"inf"`, `"-inf"` and `"nan"`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ConstantsBundle, MeritRegime, ScheduleKind, Variant};

pub(crate) mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float '{other}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    DiffTol,
    KktTol,
    Failed,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MaxIter => "max_iter",
            StopReason::DiffTol => "diff_tol",
            StopReason::KktTol => "kkt_tol",
            StopReason::Failed => "failed",
        }
    }
}

/// Run metadata written on the first trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub label: String,
    pub variant: Variant,
    pub regime: MeritRegime,
    pub schedule: ScheduleKind,
    pub t: Option<f64>,
    pub m2: f64,
    pub x_solver: String,
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub max_iter: usize,
    pub diff_tol: f64,
    pub kkt_tol: f64,
    pub certified: bool,
    pub constants: ConstantsBundle,
    pub status: StopReason,
    pub iterations: usize,
}

/// One iterate and everything the audits need about the transition that
/// produced it. Record 0 is the starting point, with zero differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// `‖x^k − x^{k−1}‖`.
    pub dx: f64,
    pub dz: f64,
    pub dy: f64,
    /// `‖A*(y^k − y^{k−1})‖`.
    pub atdy: f64,
    /// `‖z^k − z^{k−1}‖²` in the `M2^{k−1}` metric.
    pub m2dz2: f64,
    /// `‖∇h(x^k)‖`.
    pub grad_norm: f64,
    #[serde(rename = "Lr", with = "extended_float")]
    pub lr: f64,
    #[serde(rename = "Fk", with = "extended_float")]
    pub fk: f64,
    /// `h(x^k) + g(z^k)`.
    #[serde(with = "extended_float")]
    pub obj: f64,
    pub d_norm: f64,
    #[serde(rename = "D_norm")]
    pub big_d_norm: f64,
    /// `‖Ax^k − z^k‖`.
    pub feas: f64,
    /// `‖A*y^k + ∇h(x^k)‖`.
    pub stat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace always holds the starting point")
    }

    pub fn merit_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fk).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::InvalidInput(format!("write failed: {e}"));
        let ser = |e: serde_json::Error| Error::InvalidInput(format!("serialization failed: {e}"));
        serde_json::to_writer(&mut w, &self.header).map_err(ser)?;
        w.write_all(b"\n").map_err(io)?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(ser)?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let parse_err = |e: serde_json::Error| Error::Parse(format!("trace: {e}"));
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trace".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let header: TraceHeader = serde_json::from_str(&first).map_err(parse_err)?;
        let mut records = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(parse_err)?);
        }
        if records.is_empty() {
            return Err(Error::Parse("trace has no records".into()));
        }
        Ok(Trace { header, records })
    }
}
