use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlInput, DEFAULT_STEER_MAX};
use crate::scalar::Real;

/// Column header of the trace file format.
pub const TRACE_HEADER: [&str; 7] = ["t", "s", "lat", "v", "throttle", "brake", "steering"];

/// Recording rate of expert traces (s).
pub const NOMINAL_INTERVAL: f64 = 0.05;

/// Relative jitter tolerated around [`NOMINAL_INTERVAL`].
pub const INTERVAL_JITTER: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("too few samples: a trace needs at least 2, got {0}")]
    TooFewSamples(usize),
    #[error("bad header: expected `t,s,lat,v,throttle,brake,steering`, got `{0}`")]
    Header(String),
    #[error("malformed row {row}: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("non-monotone time at row {0}")]
    NonMonotone(usize),
    #[error("sample interval {dt} s at row {row} is outside 20 Hz ±10%")]
    Interval { row: usize, dt: f64 },
    #[error("invalid sample at row {row}: {msg}")]
    InvalidSample { row: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertTraceSample<T> {
    pub t: T,
    pub s: T,
    pub lat: T,
    pub v: T,
    pub u: ControlInput<T>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub route: String,
    pub recording: String,
}

/// A validated expert recording: at least two samples, strictly increasing
/// time at the 20 Hz recording rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertTrace<T> {
    pub(crate) samples: Vec<ExpertTraceSample<T>>,
    pub meta: TraceMeta,
}

fn check_sample<T: Real>(row: usize, x: &ExpertTraceSample<T>) -> Result<(), TraceError> {
    let invalid = |msg: &str| TraceError::InvalidSample {
        row,
        msg: msg.to_string(),
    };
    if ![x.t, x.s, x.lat, x.v].iter().all(|v| v.is_finite()) {
        return Err(invalid("non-finite value"));
    }
    if x.v < T::zero() {
        return Err(invalid("negative speed"));
    }
    x.u
        .validate(T::of(DEFAULT_STEER_MAX))
        .map_err(|e| invalid(&e.to_string()))
}

impl<T: Real> ExpertTrace<T> {
    pub fn new(samples: Vec<ExpertTraceSample<T>>, meta: TraceMeta) -> Result<Self, TraceError> {
        if samples.len() < 2 {
            return Err(TraceError::TooFewSamples(samples.len()));
        }
        let lo = NOMINAL_INTERVAL * (1.0 - INTERVAL_JITTER) - 1e-9;
        let hi = NOMINAL_INTERVAL * (1.0 + INTERVAL_JITTER) + 1e-9;
        for (i, x) in samples.iter().enumerate() {
            let row = i + 1;
            check_sample(row, x)?;
            if i > 0 {
                let dt = (x.t - samples[i - 1].t).as_f64();
                if dt <= 0.0 {
                    return Err(TraceError::NonMonotone(row));
                }
                if dt < lo || dt > hi {
                    return Err(TraceError::Interval { row, dt });
                }
            }
        }
        Ok(Self { samples, meta })
    }

    pub fn samples(&self) -> &[ExpertTraceSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &ExpertTraceSample<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &ExpertTraceSample<T> {
        &self.samples[self.samples.len() - 1]
    }

    /// Control sequence in recording order.
    pub fn controls(&self) -> impl Iterator<Item = &ControlInput<T>> {
        self.samples.iter().map(|x| &x.u)
    }

    /// Writes the trace in its CSV file format.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", TRACE_HEADER.join(","))?;
        for x in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                x.t, x.s, x.lat, x.v, x.u.throttle, x.u.brake, x.u.steering
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }
}

/// Parses trace file content.
pub fn load_trace<T: Real>(bytes: &[u8]) -> Result<ExpertTrace<T>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = rdr.headers().map_err(|e| TraceError::Io(e.to_string()))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(TraceError::TooFewSamples(0));
    }
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(TraceError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut samples = Vec::new();
    let mut prev_t: Option<T> = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| TraceError::Malformed {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != TRACE_HEADER.len() {
            return Err(TraceError::Malformed {
                row,
                msg: format!("expected 7 fields, got {}", rec.len()),
            });
        }
        let mut vals = [T::zero(); 7];
        for (k, field) in rec.iter().enumerate() {
            vals[k] = field.parse::<T>().map_err(|_| TraceError::Malformed {
                row,
                msg: format!("cannot parse {} = {field:?}", TRACE_HEADER[k]),
            })?;
        }
        if let Some(p) = prev_t {
            if vals[0] <= p {
                return Err(TraceError::NonMonotone(row));
            }
        }
        prev_t = Some(vals[0]);
        samples.push(ExpertTraceSample {
            t: vals[0],
            s: vals[1],
            lat: vals[2],
            v: vals[3],
            u: ControlInput::new(vals[4], vals[5], vals[6]),
        });
    }
    ExpertTrace::new(samples, TraceMeta::default())
}
