//! Session wire protocol: newline-delimited JSON objects tagged by `type`.

use serde::{Deserialize, Serialize};
use takeover_core::arbitrator::{AutomationMode, Disengagement, TakeoverTarget, TorEvent};
use takeover_core::dynamics::{gap, ControlInput, VehicleState};
use takeover_core::metrics::ttc;
use takeover_core::scenario::TickRecord;

/// Text shown with a request to take over completely.
pub const TOR_MESSAGE_MANUAL: &str = "Autonomous driving ends. Please resume full control of the vehicle";
/// Text shown with a request to share control.
pub const TOR_MESSAGE_SHARED: &str = "Shared driving is activated. Please resume control of the vehicle";

/// How long a request stays on the dashboard after it is issued (s).
pub const TOR_DISPLAY_SECONDS: f64 = 4.0;

pub fn tor_message(target: TakeoverTarget) -> &'static str {
    match target {
        TakeoverTarget::Manual => TOR_MESSAGE_MANUAL,
        TakeoverTarget::Shared => TOR_MESSAGE_SHARED,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleView {
    pub s: f64,
    pub lat: f64,
    pub v: f64,
    pub a: f64,
    pub lane: i32,
}

impl From<&VehicleState<f64>> for VehicleView {
    fn from(v: &VehicleState<f64>) -> Self {
        Self {
            s: v.s,
            lat: v.lat,
            v: v.v,
            a: v.a,
            lane: v.lane,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorView {
    pub active: bool,
    pub target: Option<TakeoverTarget>,
    pub message: String,
}

/// Dashboard colour: blue under automation, amber while sharing, off otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hmi {
    Blue,
    Amber,
    Off,
}

impl From<AutomationMode> for Hmi {
    fn from(m: AutomationMode) -> Self {
        match m {
            AutomationMode::Auto => Self::Blue,
            AutomationMode::Shared => Self::Amber,
            AutomationMode::Manual => Self::Off,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub tick: usize,
    pub ego: VehicleView,
    pub lead: VehicleView,
    pub mode: AutomationMode,
    pub tor: TorView,
    pub hmi: Hmi,
    /// Gap to the lead (m); null without a leader.
    pub gap: Option<f64>,
    /// Time to collision (s); null while the gap is not closing.
    pub ttc: Option<f64>,
}

impl StateFrame {
    pub fn new(tick: usize, r: &TickRecord<f64>, tor: Option<&TorEvent<f64>>) -> Self {
        let shown = tor.filter(|e| r.t >= e.t_issued && r.t - e.t_issued < TOR_DISPLAY_SECONDS);
        let g = gap(&r.ego, &r.lead);
        let tt = g.map(|g| ttc(g, r.ego.v, r.lead.v)).filter(|x| x.is_finite());
        Self {
            t: r.t,
            tick,
            ego: (&r.ego).into(),
            lead: (&r.lead).into(),
            mode: r.mode,
            tor: TorView {
                active: shown.is_some(),
                target: shown.map(|e| e.target),
                message: shown.map(|e| tor_message(e.target)).unwrap_or_default().to_string(),
            },
            hmi: r.mode.into(),
            gap: g,
            ttc: tt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Hello {
        session: u64,
        scenario: String,
        strategy: Option<TakeoverTarget>,
        disengagement: Option<Disengagement>,
        dt: f64,
        ticks: usize,
    },
    State(StateFrame),
    End {
        termination: String,
        t_impact: Option<f64>,
        ticks: usize,
    },
    TlxRequest,
    Saved {
        log: String,
        tlx: Option<String>,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlxScores {
    pub mental: f64,
    pub physical: f64,
    pub temporal: f64,
    pub performance: f64,
    pub effort: f64,
    pub frustration: f64,
}

impl TlxScores {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.mental,
            self.physical,
            self.temporal,
            self.performance,
            self.effort,
            self.frustration,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Control {
        throttle: f64,
        brake: f64,
        steering: f64,
    },
    Tlx(TlxScores),
    Ready,
}

impl ClientMsg {
    pub fn control(u: &ControlInput<f64>) -> Self {
        Self::Control {
            throttle: u.throttle,
            brake: u.brake,
            steering: u.steering,
        }
    }
}

pub fn encode<M: Serialize>(msg: &M) -> String {
    let mut s = serde_json::to_string(msg).expect("protocol messages serialise");
    s.push('\n');
    s
}

/// Dashboard panel the cockpit shows for a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HmiPanel {
    BlueAuto,
    AmberShared,
    TorManual,
    TorShared,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audio {
    Tune,
    Beep,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HmiState {
    pub panel: HmiPanel,
    pub message: String,
    pub audio: Audio,
    /// Set when the frame could not be interpreted.
    pub error: Option<String>,
}

/// Reference mapping from a raw state frame to the cockpit dashboard, used
/// to pin down the behaviour the browser client must reproduce. `prev` is
/// the panel shown before this frame; sounds play only on entry.
pub fn map_state_to_hmi(prev: Option<HmiPanel>, frame: &serde_json::Value) -> HmiState {
    let tor_active = frame["tor"]["active"].as_bool().unwrap_or(false);
    let (panel, message, error) = if tor_active {
        match frame["tor"]["target"].as_str() {
            Some("MANUAL") => (HmiPanel::TorManual, TOR_MESSAGE_MANUAL.to_string(), None),
            Some("SHARED") => (HmiPanel::TorShared, TOR_MESSAGE_SHARED.to_string(), None),
            other => (HmiPanel::Off, String::new(), Some(format!("unknown takeover target {other:?}"))),
        }
    } else {
        match frame["mode"].as_str() {
            Some("AUTO") => (HmiPanel::BlueAuto, String::new(), None),
            Some("SHARED") => (HmiPanel::AmberShared, String::new(), None),
            Some("MANUAL") => (HmiPanel::Off, String::new(), None),
            other => (HmiPanel::Off, String::new(), Some(format!("unknown mode {other:?}"))),
        }
    };
    let entered = prev != Some(panel);
    let audio = match panel {
        HmiPanel::TorManual | HmiPanel::TorShared if entered => Audio::Beep,
        HmiPanel::BlueAuto | HmiPanel::AmberShared if entered => Audio::Tune,
        _ => Audio::None,
    };
    HmiState {
        panel,
        message,
        audio,
        error,
    }
}
