//! Live session protocol.
//!
//! Every message is one JSON envelope, `{"kind":"frame","seq":12,"payload":{…}}`,
//! carried one per line over TCP or one per WebSocket text message. Client
//! `seq` values must strictly increase. Server messages reuse the `seq` of
//! the client message that caused them, so each accepted frame yields exactly
//! one `state` with the frame's `seq`, followed by an `action` when the robot
//! started a new gaze action on that tick.
//!
//! [`Session`] is the sans-IO state machine; transports feed it envelopes and
//! write back whatever it returns.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classifier::AgentGazeState;
use crate::config::EngineConfig;
use crate::controller::{BehaviorProfile, GazeAction, Personality};
use crate::engine::{Engine, Step};
use crate::error::Error;
use crate::events::SensorFrame;
use crate::geometry::{GazeTarget, Vec3};

pub const ENGINE_NAME: &str = "sgs-core";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Hello,
    Frame,
    State,
    Action,
    Config,
    Error,
    Bye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub kind: Kind,
    pub seq: u64,
    #[serde(default)]
    pub payload: Value,
}

impl Envelope {
    pub fn new(kind: Kind, seq: u64, payload: Value) -> Self {
        Self { kind, seq, payload }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelope serialization is infallible")
    }
}

/// Engine clock source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Each frame is one tick at the frame's own timestamp.
    #[default]
    Frames,
    /// The transport calls [`Session::tick`] every `tick` seconds; frames only
    /// update the latest observation of the partner.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    pub t: f64,
    pub self_state: AgentGazeState,
    pub other_state: AgentGazeState,
    pub stable: bool,
    pub gate: bool,
    pub self_target: GazeTarget,
    pub other_target: GazeTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPayload {
    pub t: f64,
    pub intent: Option<AgentGazeState>,
    pub action: GazeAction,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClientHello {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    client: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigUpdate {
    profile: Personality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitHello,
    Open,
    Closed,
}

/// One live session: its own engine, random stream and sequence state.
#[derive(Debug)]
pub struct Session {
    config: EngineConfig,
    clock: Clock,
    phase: Phase,
    engine: Option<Engine>,
    last_seq: Option<u64>,
    last_frame: Option<(u64, SensorFrame)>,
    last_state: Option<StatePayload>,
}

impl Session {
    pub fn new(config: EngineConfig, clock: Clock) -> Self {
        Self {
            config,
            clock,
            phase: Phase::AwaitHello,
            engine: None,
            last_seq: None,
            last_frame: None,
            last_state: None,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn tick_interval(&self) -> f64 {
        self.config.tick
    }

    fn fail(&mut self, seq: u64, message: impl Into<String>) -> Vec<Envelope> {
        self.phase = Phase::Closed;
        vec![
            Envelope::new(Kind::Error, seq, json!({ "message": message.into() })),
            Envelope::new(Kind::Bye, seq, Value::Null),
        ]
    }

    /// Parses and handles one raw message.
    pub fn handle_text(&mut self, text: &str, now: f64) -> Vec<Envelope> {
        match serde_json::from_str::<Envelope>(text) {
            Ok(env) => self.handle(env, now),
            Err(e) => {
                let seq = self.last_seq.unwrap_or(0);
                self.fail(seq, format!("malformed message: {e}"))
            }
        }
    }

    /// Handles one client message. `now` is the session's wall-clock time in
    /// seconds and is only used with [`Clock::Wall`].
    pub fn handle(&mut self, env: Envelope, now: f64) -> Vec<Envelope> {
        if self.phase == Phase::Closed {
            return Vec::new();
        }
        if let Some(prev) = self.last_seq {
            if env.seq <= prev {
                return self.fail(env.seq, format!("seq {} does not follow {prev}", env.seq));
            }
        }
        self.last_seq = Some(env.seq);

        match (self.phase, env.kind) {
            (Phase::AwaitHello, Kind::Hello) => self.hello(env),
            (Phase::AwaitHello, kind) => self.fail(env.seq, format!("expected hello, got {kind:?}")),
            (Phase::Open, Kind::Frame) => self.frame(env, now),
            (Phase::Open, Kind::Config) => self.reconfigure(env),
            (Phase::Open, Kind::Bye) => {
                self.phase = Phase::Closed;
                vec![Envelope::new(Kind::Bye, env.seq, Value::Null)]
            }
            (Phase::Open, kind) => self.fail(env.seq, format!("unexpected {kind:?} from client")),
            (Phase::Closed, _) => Vec::new(),
        }
    }

    fn hello(&mut self, env: Envelope) -> Vec<Envelope> {
        let hello: ClientHello = if env.payload.is_null() {
            ClientHello::default()
        } else {
            match serde_json::from_value(env.payload) {
                Ok(h) => h,
                Err(e) => return self.fail(env.seq, format!("bad hello: {e}")),
            }
        };
        let seed = hello.seed.unwrap_or(self.config.seed);
        match self.config.engine(Vec3::zero(), Some(seed)) {
            Ok(engine) => self.engine = Some(engine),
            Err(e) => return self.fail(env.seq, e.to_string()),
        }
        self.phase = Phase::Open;
        let payload = json!({
            "engine": ENGINE_NAME,
            "version": ENGINE_VERSION,
            "seed": seed,
            "clock": self.clock,
            "client": hello.client,
            "config": self.config.to_file(),
        });
        vec![Envelope::new(Kind::Hello, env.seq, payload)]
    }

    fn reconfigure(&mut self, env: Envelope) -> Vec<Envelope> {
        let update: ConfigUpdate = match serde_json::from_value(env.payload) {
            Ok(u) => u,
            Err(e) => return self.fail(env.seq, format!("bad config: {e}")),
        };
        let profile = BehaviorProfile::for_personality(update.profile);
        let engine = self.engine.as_mut().expect("engine exists once open");
        if let Err(e) = engine.controller_mut().set_profile(profile) {
            return self.fail(env.seq, e.to_string());
        }
        vec![Envelope::new(Kind::Config, env.seq, json!({ "profile": profile }))]
    }

    fn frame(&mut self, env: Envelope, now: f64) -> Vec<Envelope> {
        let frame: SensorFrame = match serde_json::from_value(env.payload) {
            Ok(f) => f,
            Err(e) => return self.fail(env.seq, format!("bad frame: {e}")),
        };
        match self.clock {
            Clock::Frames => {
                let t = frame.t;
                self.advance(t, env.seq, &frame)
            }
            Clock::Wall => {
                let first = self.last_state.is_none();
                self.last_frame = Some((env.seq, frame.clone()));
                if first {
                    return self.advance(now, env.seq, &frame);
                }
                let state = self.last_state.clone().expect("checked above");
                vec![Envelope::new(Kind::State, env.seq, serde_json::to_value(state).expect("serializable"))]
            }
        }
    }

    /// Wall-clock tick: advances the engine with the latest frame. Returns
    /// `action` messages only; states go out in reply to frames.
    pub fn tick(&mut self, now: f64) -> Vec<Envelope> {
        if self.phase != Phase::Open || self.clock != Clock::Wall {
            return Vec::new();
        }
        let Some((seq, frame)) = self.last_frame.clone() else {
            return Vec::new();
        };
        let mut out = self.advance(now, seq, &frame);
        out.retain(|e| e.kind != Kind::State);
        out
    }

    fn advance(&mut self, t: f64, seq: u64, frame: &SensorFrame) -> Vec<Envelope> {
        let engine = self.engine.as_mut().expect("engine exists once open");
        engine.set_robot_face(frame.self_pose.face_center);
        let step = engine.step(t, frame.other_pose, frame.objects.clone(), frame.other_pointing.clone());
        match step {
            Ok(step) => self.emit(seq, &step),
            Err(e) => {
                let msg = match e {
                    Error::Event(e) => e.to_string(),
                    other => other.to_string(),
                };
                self.fail(seq, msg)
            }
        }
    }

    fn emit(&mut self, seq: u64, step: &Step) -> Vec<Envelope> {
        let o = &step.observation;
        let state = StatePayload {
            t: o.t,
            self_state: o.dyad.self_state,
            other_state: o.dyad.other_state,
            stable: o.dyad.stable,
            gate: o.dyad.gate,
            self_target: o.self_target.clone(),
            other_target: o.other_target.clone(),
        };
        self.last_state = Some(state.clone());
        let mut out = vec![Envelope::new(Kind::State, seq, serde_json::to_value(state).expect("serializable"))];
        if let Some(em) = &step.emission {
            let payload = ActionPayload { t: o.t, intent: em.intent, action: em.action.clone() };
            out.push(Envelope::new(Kind::Action, seq, serde_json::to_value(payload).expect("serializable")));
        }
        out
    }
}
