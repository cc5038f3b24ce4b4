//! Fixed-step drive loop coupling dynamics, automation, arbitration and the driver.

use std::sync::Arc;

use super::log::{DriveLog, LogEvent, LogMeta, Termination, TickRecord};
use super::spec::ScenarioSpec;
use super::ScenarioError;
use crate::arbitrator::{
    blend, transition, ArbiterConfig, ArbiterEvent, AutomationMode, FollowSample, SteadyDetector, TorEvent,
};
use crate::driver::{driver_input, DriverParams, Percept};
use crate::dynamics::{gap, step_lead, step_vehicle, ControlInput, LeadProfile, VehicleState};
use crate::expert::{Automation, ExpertModel, ExpertTrace, MatchConfig};
use crate::scalar::Real;

/// Source of the human-side pedal input.
pub trait DriverSource<T: Real> {
    fn input(&mut self, tick: usize, t: T, tor: Option<&TorEvent<T>>, percept: &Percept<T>) -> ControlInput<T>;

    fn id(&self) -> &str;
}

/// Hands-off driver that never touches the controls.
#[derive(Debug, Clone, Default)]
pub struct ZeroDriver;

impl<T: Real> DriverSource<T> for ZeroDriver {
    fn input(&mut self, _: usize, _: T, _: Option<&TorEvent<T>>, _: &Percept<T>) -> ControlInput<T> {
        ControlInput::zero()
    }

    fn id(&self) -> &str {
        "none"
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDriver<T>(pub DriverParams<T>);

impl<T: Real> DriverSource<T> for SimulatedDriver<T> {
    fn input(&mut self, _: usize, t: T, tor: Option<&TorEvent<T>>, percept: &Percept<T>) -> ControlInput<T> {
        driver_input(&self.0, t, tor, percept)
    }

    fn id(&self) -> &str {
        &self.0.id
    }
}

/// Plays back a recorded per-tick input sequence; zero past its end.
#[derive(Debug, Clone)]
pub struct ReplayDriver<T> {
    id: String,
    inputs: Vec<ControlInput<T>>,
}

impl<T: Real> ReplayDriver<T> {
    pub fn new(id: impl Into<String>, inputs: Vec<ControlInput<T>>) -> Self {
        Self { id: id.into(), inputs }
    }
}

impl<T: Real> DriverSource<T> for ReplayDriver<T> {
    fn input(&mut self, tick: usize, _: T, _: Option<&TorEvent<T>>, _: &Percept<T>) -> ControlInput<T> {
        self.inputs.get(tick).copied().unwrap_or_else(ControlInput::zero)
    }

    fn id(&self) -> &str {
        &self.id
    }
}

/// Single-threaded drive simulation, advanced one logged tick at a time.
pub struct Engine<T: Real, A: Automation<T>> {
    spec: ScenarioSpec<T>,
    cfg: ArbiterConfig<T>,
    automation: A,
    seed: u64,
    driver_id: String,
    n_ticks: usize,
    tick: usize,
    ego: VehicleState<T>,
    lead: VehicleState<T>,
    lead_profile: LeadProfile<T>,
    ambient: Vec<VehicleState<T>>,
    mode: AutomationMode,
    next_tor: usize,
    deferred_reported: bool,
    active_tor: Option<TorEvent<T>>,
    brake_tick: Option<usize>,
    steady: SteadyDetector<T>,
    impact: Option<T>,
    records: Vec<TickRecord<T>>,
    termination: Option<Termination<T>>,
}

impl<T: Real, A: Automation<T>> Engine<T, A> {
    pub fn new(
        spec: ScenarioSpec<T>,
        cfg: ArbiterConfig<T>,
        automation: A,
        seed: u64,
        driver_id: impl Into<String>,
    ) -> Result<Self, ScenarioError> {
        spec.validate()?;
        cfg.validate().map_err(ScenarioError::Invalid)?;
        let ego = VehicleState::new(spec.ego_init.s, spec.ego_init.v).with_lane(spec.ego_init.lane);
        let lead = VehicleState::new(spec.lead_init.s, spec.lead_init.v).with_lane(spec.lead_init.lane);
        let lead_profile = LeadProfile::cruise(spec.lead_init.v);
        let ambient = spec
            .ambient
            .iter()
            .map(|a| VehicleState::new(a.s, a.v).with_lane(a.lane))
            .collect();
        Ok(Self {
            n_ticks: spec.n_ticks(),
            steady: SteadyDetector::new(cfg.steady, spec.dt),
            records: Vec::with_capacity(spec.n_ticks()),
            spec,
            cfg,
            automation,
            seed,
            driver_id: driver_id.into(),
            tick: 0,
            ego,
            lead,
            lead_profile,
            ambient,
            mode: AutomationMode::Auto,
            next_tor: 0,
            deferred_reported: false,
            active_tor: None,
            brake_tick: None,
            impact: None,
            termination: None,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec<T> {
        &self.spec
    }

    pub fn time(&self) -> T {
        self.spec.tick_time(self.tick)
    }

    pub fn tick_index(&self) -> usize {
        self.tick
    }

    pub fn ego(&self) -> &VehicleState<T> {
        &self.ego
    }

    pub fn lead(&self) -> &VehicleState<T> {
        &self.lead
    }

    pub fn ambient(&self) -> &[VehicleState<T>] {
        &self.ambient
    }

    pub fn mode(&self) -> AutomationMode {
        self.mode
    }

    /// Most recent takeover request.
    pub fn active_tor(&self) -> Option<&TorEvent<T>> {
        self.active_tor.as_ref()
    }

    pub fn records(&self) -> &[TickRecord<T>] {
        &self.records
    }

    pub fn last_record(&self) -> Option<&TickRecord<T>> {
        self.records.last()
    }

    pub fn automation(&self) -> &A {
        &self.automation
    }

    pub fn is_finished(&self) -> bool {
        self.termination.is_some()
    }

    pub fn termination(&self) -> Option<&Termination<T>> {
        self.termination.as_ref()
    }

    pub fn percept(&self) -> Percept<T> {
        Percept {
            gap: gap(&self.ego, &self.lead),
            v_ego: self.ego.v,
            v_lead: self.lead.v,
            a_lead: self.lead_profile.accel_at(self.time()),
        }
    }

    /// Stops the drive early, e.g. on client disconnect.
    pub fn abort(&mut self, reason: Termination<T>) {
        if self.termination.is_none() {
            self.termination = Some(reason);
        }
    }

    fn apply(&mut self, event: ArbiterEvent<T>, events: &mut Vec<LogEvent<T>>) {
        let tr = transition(self.mode, &event);
        if tr.ignored {
            events.push(LogEvent::Ignored {
                event: event.name().to_string(),
                mode: self.mode,
            });
        } else if tr.mode != self.mode {
            events.push(LogEvent::ModeChange {
                from: self.mode,
                to: tr.mode,
            });
            self.mode = tr.mode;
        }
    }

    fn fire_requests(&mut self, k: usize, t: T, events: &mut Vec<LogEvent<T>>) -> bool {
        let Some(trigger) = self.spec.tor_events.get(self.next_tor).copied() else {
            return false;
        };
        if !trigger.reached(t, self.ego.s) {
            return false;
        }
        // a new request needs automated driving and a lead back at cruise
        if self.mode != AutomationMode::Auto || !self.lead_profile.is_cruising(t) {
            if !self.deferred_reported {
                events.push(LogEvent::TorDeferred {
                    index: self.next_tor,
                    mode: self.mode,
                });
                self.deferred_reported = true;
            }
            return false;
        }

        let tor = TorEvent {
            target: trigger.target,
            disengagement: trigger.disengagement,
            t_issued: t,
        };
        events.push(LogEvent::Tor {
            index: self.next_tor,
            target: tor.target,
            disengagement: tor.disengagement,
        });
        self.apply(ArbiterEvent::Tor(tor), events);
        self.active_tor = Some(tor);
        self.next_tor += 1;
        self.deferred_reported = false;
        self.steady.reset();

        let lb = &self.spec.lead_brake;
        let offset_ticks = (lb.offset(tor.disengagement) / self.spec.dt)
            .round()
            .to_usize()
            .unwrap_or(0);
        let brake_tick = k + offset_ticks;
        self.lead_profile = LeadProfile::braking(self.spec.lead_init.v, self.spec.tick_time(brake_tick), lb.decel)
            .with_resume(lb.dwell, lb.resume_accel);
        self.brake_tick = Some(brake_tick);
        true
    }

    /// Runs one logged tick. Returns the record written, or `None` once the
    /// drive has ended.
    pub fn step(&mut self, driver: &mut dyn DriverSource<T>) -> Result<Option<&TickRecord<T>>, ScenarioError> {
        if self.termination.is_some() {
            return Ok(None);
        }
        let k = self.tick;
        let t = self.spec.tick_time(k);
        let mut events = Vec::new();

        let tor_flag = self.fire_requests(k, t, &mut events);
        if self.brake_tick == Some(k) {
            events.push(LogEvent::LeadBrake {
                decel: self.spec.lead_brake.decel,
            });
        }

        let percept = self.percept();
        let follow = FollowSample {
            gap: percept.gap.unwrap_or_else(T::infinity),
            v_ego: percept.v_ego,
            v_lead: percept.v_lead,
        };
        if self.steady.push(follow) && self.mode != AutomationMode::Auto {
            events.push(LogEvent::SteadyFollowing);
            self.apply(ArbiterEvent::SteadyFollowing, &mut events);
            self.steady.reset();
        }

        let steer_max = self.spec.dynamics.steer_max;
        let u_driver = driver
            .input(k, t, self.active_tor.as_ref(), &percept)
            .clamped(steer_max);
        let u_expert = self.automation.control(t, &self.ego, &percept).clamped(steer_max);
        let u_applied = blend(&u_driver, &u_expert, self.mode, self.cfg.alpha);

        let collided = percept.gap.is_some_and(|g| g <= T::zero());
        if collided {
            let t_impact = self.impact.unwrap_or(t);
            events.push(LogEvent::Collision { t_impact });
            self.termination = Some(Termination::Collision { t_impact });
        } else if k + 1 >= self.n_ticks {
            self.termination = Some(Termination::Duration);
        }

        self.records.push(TickRecord {
            t,
            ego: self.ego,
            lead: self.lead,
            mode: self.mode,
            u_driver,
            u_expert,
            u_applied,
            tor_flag,
            events,
        });

        if self.termination.is_none() {
            self.advance(t, &u_applied)?;
            self.tick += 1;
            if self.ego.s >= self.spec.route_length {
                self.termination = Some(Termination::RouteEnd);
            }
        }
        Ok(self.records.last())
    }

    fn advance(&mut self, t: T, u: &ControlInput<T>) -> Result<(), ScenarioError> {
        let n = self.spec.substeps;
        let h = self.spec.dt / T::of_usize(n);
        let p = self.spec.dynamics;
        let mut prev_gap = gap(&self.ego, &self.lead);
        for i in 0..n {
            let ts = t + T::of_usize(i) * h;
            self.ego = step_vehicle(&self.ego, u, &p, h)?;
            self.lead = step_lead(&self.lead_profile, ts, &self.lead, h)?;
            let g = gap(&self.ego, &self.lead);
            if self.impact.is_none() {
                if let (Some(g0), Some(g1)) = (prev_gap, g) {
                    if g0 > T::zero() && g1 <= T::zero() {
                        self.impact = Some(ts + h * g0 / (g0 - g1));
                    }
                }
            }
            prev_gap = g;
        }
        let zero = ControlInput::zero();
        for a in &mut self.ambient {
            *a = step_vehicle(a, &zero, &p, self.spec.dt)?;
        }
        Ok(())
    }

    /// Consumes the engine and returns the log of the drive so far.
    pub fn finish(self) -> DriveLog<T> {
        let termination = self.termination.unwrap_or(Termination::Duration);
        DriveLog {
            meta: LogMeta {
                spec_hash: self.spec.spec_hash(),
                route: self.spec.name.clone(),
                seed: self.seed,
                driver_id: self.driver_id,
                strategy: self.spec.strategy(),
                disengagement: self.spec.disengagement(),
                alpha: self.cfg.alpha,
                dt: self.spec.dt,
                termination,
            },
            records: self.records,
        }
    }
}

/// Runs a whole drive with an arbitrary automation.
pub fn run_drive_with<T: Real, A: Automation<T>>(
    spec: &ScenarioSpec<T>,
    driver: &mut dyn DriverSource<T>,
    cfg: &ArbiterConfig<T>,
    automation: A,
    seed: u64,
) -> Result<DriveLog<T>, ScenarioError> {
    let id = driver.id().to_string();
    let mut engine = Engine::new(spec.clone(), *cfg, automation, seed, id)?;
    while engine.step(driver)?.is_some() {}
    Ok(engine.finish())
}

/// Checks that a trace spans the drive, in time or along the route.
pub fn check_trace_coverage<T: Real>(spec: &ScenarioSpec<T>, trace: &ExpertTrace<T>) -> Result<(), ScenarioError> {
    let last = trace.last();
    let last_tick = spec.tick_time(spec.n_ticks().saturating_sub(1));
    let eps = spec.dt * T::of(1e-6);
    if last.s >= spec.route_length || last.t + eps >= last_tick {
        Ok(())
    } else {
        Err(ScenarioError::TraceTooShort {
            trace_s: last.s.as_f64(),
            trace_t: last.t.as_f64(),
            route_length: spec.route_length.as_f64(),
            duration: last_tick.as_f64(),
        })
    }
}

/// Runs a drive with the expert model replaying `trace`.
pub fn run_drive<T: Real>(
    spec: &ScenarioSpec<T>,
    driver: &mut dyn DriverSource<T>,
    cfg: &ArbiterConfig<T>,
    trace: &Arc<ExpertTrace<T>>,
    seed: u64,
) -> Result<DriveLog<T>, ScenarioError> {
    run_drive_matched(spec, driver, cfg, trace, MatchConfig::default(), seed)
}

pub fn run_drive_matched<T: Real>(
    spec: &ScenarioSpec<T>,
    driver: &mut dyn DriverSource<T>,
    cfg: &ArbiterConfig<T>,
    trace: &Arc<ExpertTrace<T>>,
    match_cfg: MatchConfig<T>,
    seed: u64,
) -> Result<DriveLog<T>, ScenarioError> {
    spec.validate()?;
    match_cfg.validate().map_err(ScenarioError::Invalid)?;
    check_trace_coverage(spec, trace)?;
    run_drive_with(spec, driver, cfg, ExpertModel::new(Arc::clone(trace), match_cfg), seed)
}
