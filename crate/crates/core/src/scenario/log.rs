//! Drive log: the fixed-rate record of a drive, with JSON-lines and CSV export.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::arbitrator::{AutomationMode, Disengagement, TakeoverTarget, TorEvent};
use crate::dynamics::{ControlInput, VehicleState};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination<T> {
    Duration,
    RouteEnd,
    Collision { t_impact: T },
    Disconnect,
    Overrun,
}

impl<T> Termination<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Duration => "duration",
            Self::RouteEnd => "route_end",
            Self::Collision { .. } => "collision",
            Self::Disconnect => "disconnect",
            Self::Overrun => "overrun",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEvent<T> {
    /// A takeover request was issued at this tick.
    Tor {
        index: usize,
        target: TakeoverTarget,
        disengagement: Disengagement,
    },
    /// A request trigger was reached outside automated driving and postponed.
    TorDeferred { index: usize, mode: AutomationMode },
    /// The lead starts its emergency stop.
    LeadBrake { decel: T },
    SteadyFollowing,
    ModeChange {
        from: AutomationMode,
        to: AutomationMode,
    },
    /// An event that had no effect in the current mode.
    Ignored { event: String, mode: AutomationMode },
    Collision { t_impact: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord<T> {
    pub t: T,
    pub ego: VehicleState<T>,
    pub lead: VehicleState<T>,
    pub mode: AutomationMode,
    pub u_driver: ControlInput<T>,
    pub u_expert: ControlInput<T>,
    pub u_applied: ControlInput<T>,
    pub tor_flag: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<LogEvent<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta<T> {
    pub spec_hash: String,
    pub route: String,
    pub seed: u64,
    pub driver_id: String,
    pub strategy: Option<TakeoverTarget>,
    pub disengagement: Option<Disengagement>,
    pub alpha: T,
    pub dt: T,
    pub termination: Termination<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveLog<T> {
    pub meta: LogMeta<T>,
    pub records: Vec<TickRecord<T>>,
}

#[derive(Serialize, Deserialize)]
struct MetaLine<T> {
    meta: LogMeta<T>,
}

const CSV_COLUMNS: [&str; 29] = [
    "t",
    "ego_s",
    "ego_lat",
    "ego_v",
    "ego_a",
    "ego_lane",
    "ego_length",
    "lead_s",
    "lead_lat",
    "lead_v",
    "lead_a",
    "lead_lane",
    "lead_length",
    "mode",
    "driver_throttle",
    "driver_brake",
    "driver_steering",
    "expert_throttle",
    "expert_brake",
    "expert_steering",
    "applied_throttle",
    "applied_brake",
    "applied_steering",
    "tor_flag",
    "events",
    "gap",
    "v_rel",
    "lane_match",
    "tick",
];

fn parse_err(line: usize, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Parse(format!("line {line}: {e}"))
}

impl<T: Real> DriveLog<T> {
    pub fn collided(&self) -> bool {
        matches!(self.meta.termination, Termination::Collision { .. })
    }

    /// Takeover requests issued during the drive, in order.
    pub fn tor_events(&self) -> Vec<TorEvent<T>> {
        self.records
            .iter()
            .flat_map(|r| {
                r.events.iter().filter_map(move |e| match e {
                    LogEvent::Tor {
                        target, disengagement, ..
                    } => Some(TorEvent {
                        target: *target,
                        disengagement: *disengagement,
                        t_issued: r.t,
                    }),
                    _ => None,
                })
            })
            .collect()
    }

    /// Driver inputs in tick order, as needed to replay the drive.
    pub fn driver_inputs(&self) -> Vec<ControlInput<T>> {
        self.records.iter().map(|r| r.u_driver).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let meta = MetaLine {
            meta: self.meta.clone(),
        };
        serde_json::to_writer(&mut w, &meta)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Reads the JSON-lines form: one meta line followed by one tick per line.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, ScenarioError> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| ScenarioError::Parse("empty drive log".into()))?;
        let first = first.map_err(|e| parse_err(1, e))?;
        let meta: MetaLine<T> = serde_json::from_str(&first).map_err(|e| parse_err(1, e))?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i + 1, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?);
        }
        Ok(Self {
            meta: meta.meta,
            records,
        })
    }

    pub fn from_jsonl_str(s: &str) -> Result<Self, ScenarioError> {
        Self::read_jsonl(s.as_bytes())
    }

    /// CSV form: a `# {"meta":…}` comment line, a header, then one row per
    /// tick. Events are embedded as a JSON array; `gap`, `v_rel`,
    /// `lane_match` and `tick` are derived columns for spreadsheet use.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ScenarioError> {
        let io = |e: std::io::Error| ScenarioError::Io(e.to_string());
        let meta = serde_json::to_string(&MetaLine {
            meta: self.meta.clone(),
        })
        .map_err(|e| ScenarioError::Io(e.to_string()))?;
        writeln!(w, "# {meta}").map_err(io)?;
        let mut wtr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| ScenarioError::Io(e.to_string());
        wtr.write_record(CSV_COLUMNS).map_err(csv_err)?;
        for (k, r) in self.records.iter().enumerate() {
            let events = serde_json::to_string(&r.events).map_err(|e| ScenarioError::Io(e.to_string()))?;
            let same_lane = r.ego.lane == r.lead.lane;
            let gap = if same_lane {
                (r.lead.s - r.ego.s - r.lead.length).to_string()
            } else {
                String::new()
            };
            let row = [
                r.t.to_string(),
                r.ego.s.to_string(),
                r.ego.lat.to_string(),
                r.ego.v.to_string(),
                r.ego.a.to_string(),
                r.ego.lane.to_string(),
                r.ego.length.to_string(),
                r.lead.s.to_string(),
                r.lead.lat.to_string(),
                r.lead.v.to_string(),
                r.lead.a.to_string(),
                r.lead.lane.to_string(),
                r.lead.length.to_string(),
                r.mode.to_string(),
                r.u_driver.throttle.to_string(),
                r.u_driver.brake.to_string(),
                r.u_driver.steering.to_string(),
                r.u_expert.throttle.to_string(),
                r.u_expert.brake.to_string(),
                r.u_expert.steering.to_string(),
                r.u_applied.throttle.to_string(),
                r.u_applied.brake.to_string(),
                r.u_applied.steering.to_string(),
                r.tor_flag.to_string(),
                events,
                gap,
                (r.ego.v - r.lead.v).to_string(),
                same_lane.to_string(),
                k.to_string(),
            ];
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn from_csv_str(s: &str) -> Result<Self, ScenarioError> {
        let (first, rest) = s
            .split_once('\n')
            .ok_or_else(|| ScenarioError::Parse("empty drive log".into()))?;
        let meta_json = first
            .strip_prefix("# ")
            .ok_or_else(|| parse_err(1, "missing meta comment"))?;
        let meta: MetaLine<T> = serde_json::from_str(meta_json).map_err(|e| parse_err(1, e))?;

        let mut rdr = csv::Reader::from_reader(rest.as_bytes());
        let header = rdr.headers().map_err(|e| parse_err(2, e))?;
        if header.iter().ne(CSV_COLUMNS.iter().copied()) {
            return Err(parse_err(2, "unexpected CSV header"));
        }
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 3;
            let rec = rec.map_err(|e| parse_err(line, e))?;
            let num = |k: usize| -> Result<T, ScenarioError> {
                rec[k]
                    .parse::<T>()
                    .map_err(|_| parse_err(line, format!("bad number in column {}", CSV_COLUMNS[k])))
            };
            let int = |k: usize| -> Result<i32, ScenarioError> {
                rec[k]
                    .parse::<i32>()
                    .map_err(|_| parse_err(line, format!("bad integer in column {}", CSV_COLUMNS[k])))
            };
            let vehicle = |o: usize| -> Result<VehicleState<T>, ScenarioError> {
                Ok(VehicleState {
                    s: num(o)?,
                    lat: num(o + 1)?,
                    v: num(o + 2)?,
                    a: num(o + 3)?,
                    lane: int(o + 4)?,
                    length: num(o + 5)?,
                })
            };
            let control = |o: usize| -> Result<ControlInput<T>, ScenarioError> {
                Ok(ControlInput::new(num(o)?, num(o + 1)?, num(o + 2)?))
            };
            let mode: AutomationMode = serde_json::from_str(&format!("\"{}\"", &rec[13]))
                .map_err(|e| parse_err(line, e))?;
            records.push(TickRecord {
                t: num(0)?,
                ego: vehicle(1)?,
                lead: vehicle(7)?,
                mode,
                u_driver: control(14)?,
                u_expert: control(17)?,
                u_applied: control(20)?,
                tor_flag: rec[23]
                    .parse::<bool>()
                    .map_err(|e| parse_err(line, e))?,
                events: serde_json::from_str(&rec[24]).map_err(|e| parse_err(line, e))?,
            });
        }
        Ok(Self {
            meta: meta.meta,
            records,
        })
    }
}
