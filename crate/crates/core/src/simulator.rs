//! Deterministic closed-loop simulation of a robot and a partner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{streams, EngineConfig, EngineConfigFile, RowsSpec};
use crate::controller::{Controller, SceneView};
use crate::engine::{synthesize_gaze, Engine, GazeNoise};
use crate::error::{ConfigError, Result};
use crate::events::SensorFrame;
use crate::geometry::{self, Agent, AgentPose, GazeTarget, SceneObject, Vec3};
use crate::rng::SimRng;
use crate::trace::{Trace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub self_face: Vec3<f64>,
    pub other_face: Vec3<f64>,
    pub objects: Vec<SceneObject<f64>>,
}

impl Default for SceneSpec {
    /// Robot and partner facing each other across a table with three objects.
    fn default() -> Self {
        Self {
            self_face: Vec3::zero(),
            other_face: Vec3::new(0.0, 0.0, 1.2),
            objects: vec![
                SceneObject::new("cube", "cube", Vec3::new(-0.25, -0.3, 0.6)),
                SceneObject::new("ball", "ball", Vec3::new(0.0, -0.3, 0.6)),
                SceneObject::new("cup", "cup", Vec3::new(0.25, -0.3, 0.6)),
            ],
        }
    }
}

/// One step of a scripted partner, held until the next step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    pub t: f64,
    pub target: GazeTarget,
    /// Object the partner points at during this step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<String>,
}

/// The partner's controller config: the policy subset of an engine config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactiveSpec {
    pub rows: RowsSpec,
    #[serde(default)]
    pub guards: crate::controller::GuardTable,
    #[serde(default = "introvert")]
    pub profile: crate::controller::Personality,
    #[serde(default)]
    pub seed: u64,
}

fn introvert() -> crate::controller::Personality {
    crate::controller::Personality::Introvert
}

impl Default for ReactiveSpec {
    fn default() -> Self {
        Self { rows: RowsSpec::Named("default".into()), guards: Default::default(), profile: introvert(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum PartnerPolicy {
    Static { target: GazeTarget },
    Scripted { timeline: Vec<ScriptStep> },
    Reactive(ReactiveSpec),
}

fn default_robot() -> EngineConfigFile {
    EngineConfig::default().to_file()
}

fn default_duration() -> f64 {
    60.0
}

fn default_sim_tick() -> f64 {
    0.05
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub scene: SceneSpec,
    pub partner: PartnerPolicy,
    #[serde(default = "default_robot")]
    pub robot: EngineConfigFile,
    #[serde(default = "default_sim_tick")]
    pub tick: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// Default robot against a reactive introvert partner in the default scene.
    pub fn reactive_default(seed: u64, duration: f64) -> Self {
        Self {
            scene: SceneSpec::default(),
            partner: PartnerPolicy::Reactive(ReactiveSpec::default()),
            robot: default_robot(),
            tick: default_sim_tick(),
            duration,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn robot_config(&self) -> Result<EngineConfig, ConfigError> {
        self.robot.clone().try_into()
    }

    pub fn tick_count(&self) -> usize {
        (((self.duration / self.tick) + 1e-9).floor() as usize).max(1)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return bad("tick must be positive");
        }
        if !(self.duration.is_finite() && self.duration + 1e-9 >= self.tick) {
            return bad("duration must be at least one tick");
        }
        geometry::check_unique_ids(&self.scene.objects)?;
        let robot = self.robot_config()?;
        if self.scene.self_face.distance(self.scene.other_face) < robot.geometry.face_hit_radius {
            return bad("faces closer than face_hit_radius");
        }
        let known = |target: &GazeTarget| match target {
            GazeTarget::Object(id) => self.scene.objects.iter().any(|o| &o.id == id),
            _ => true,
        };
        match &self.partner {
            PartnerPolicy::Static { target } if !known(target) => bad("static target names an unknown object"),
            PartnerPolicy::Scripted { timeline } => {
                if timeline.windows(2).any(|w| w[1].t < w[0].t) {
                    return bad("timeline must be time-ordered");
                }
                for step in timeline {
                    if !known(&step.target) {
                        return bad("timeline target names an unknown object");
                    }
                    if let Some(p) = &step.point {
                        if !known(&GazeTarget::Object(p.clone())) {
                            return bad("timeline points at an unknown object");
                        }
                    }
                }
                Ok(())
            }
            PartnerPolicy::Reactive(spec) => spec.rows.to_model().map(|_| ()),
            _ => Ok(()),
        }
    }
}

enum Partner {
    Static(GazeTarget),
    Scripted(Vec<ScriptStep>),
    Reactive(Box<Controller>),
}

impl Partner {
    fn step_at(timeline: &[ScriptStep], t: f64) -> Option<&ScriptStep> {
        timeline.iter().rev().find(|s| s.t <= t)
    }

    fn target_at(&self, t: f64) -> GazeTarget {
        match self {
            Partner::Static(target) => target.clone(),
            Partner::Scripted(timeline) => {
                Self::step_at(timeline, t).map_or(GazeTarget::Unresolved, |s| s.target.clone())
            }
            Partner::Reactive(c) => c.target_at(t),
        }
    }

    fn pointing_at(&self, t: f64) -> Option<String> {
        match self {
            Partner::Scripted(timeline) => Self::step_at(timeline, t).and_then(|s| s.point.clone()),
            _ => None,
        }
    }
}

/// Trace and the frames the engine ingested to produce it.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Trace,
    pub frames: Vec<SensorFrame>,
}

/// Runs `scenario`; `seed` overrides the scenario's own seed.
///
/// Each tick: read both agents' current targets, synthesize the frame, let
/// the engine ingest and classify it, then let each controller start new
/// actions. Controllers resample only when their queue runs dry or the
/// partner starts pointing.
pub fn run(scenario: &Scenario, seed: Option<u64>) -> Result<SimOutput> {
    scenario.validate()?;
    let seed = seed.unwrap_or(scenario.seed);
    let robot_cfg = scenario.robot_config()?;
    let root = SimRng::new(seed);
    let mut engine: Engine = robot_cfg.engine(scenario.scene.self_face, Some(seed))?;

    let mut partner = match &scenario.partner {
        PartnerPolicy::Static { target } => Partner::Static(target.clone()),
        PartnerPolicy::Scripted { timeline } => Partner::Scripted(timeline.clone()),
        PartnerPolicy::Reactive(spec) => {
            let cfg = EngineConfig {
                model: spec.rows.to_model()?,
                guards: spec.guards,
                profile: crate::controller::BehaviorProfile::for_personality(spec.profile),
                ..robot_cfg.clone()
            };
            // Mix the partner's own seed into the run seed.
            let rng = SimRng::new(seed ^ spec.seed.rotate_left(32)).fork(streams::PARTNER_CONTROLLER);
            Partner::Reactive(Box::new(cfg.controller(rng)?))
        }
    };
    let mut partner_noise = GazeNoise::new(robot_cfg.noise_deg.to_radians(), root.fork(streams::PARTNER_NOISE));

    let scene = &scenario.scene;
    let n = scenario.tick_count();
    let mut trace = Vec::with_capacity(n);
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * scenario.tick;
        let target = partner.target_at(t);
        let dir = synthesize_gaze(scene.other_face, &target, Some(scene.self_face), &scene.objects, &robot_cfg.geometry);
        let other = AgentPose::new(Agent::Partner, scene.other_face, partner_noise.perturb(dir))?;
        let step = engine.step(t, Some(other), scene.objects.clone(), partner.pointing_at(t))?;

        if let Partner::Reactive(c) = &mut partner {
            let classifier = engine.pipeline().classifier();
            let theirs = step.observation.dyad.swapped(classifier.table());
            let view = SceneView::new(&scene.objects, classifier.latest_object(Agent::Robot));
            c.step(t, &theirs, &view, None)?;
        }

        trace.push(TraceRecord::from_step(&step));
        frames.push(step.frame);
    }
    Ok(SimOutput { trace, frames })
}

/// Runs one scenario per seed in parallel; results are in seed order.
pub fn run_seeds(scenario: &Scenario, seeds: &[u64]) -> Vec<Result<SimOutput>> {
    seeds.par_iter().map(|s| run(scenario, Some(*s))).collect()
}
