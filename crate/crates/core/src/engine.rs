//! The per-tick loop shared by the simulator, replay and live sessions.
//!
//! [`Pipeline`] turns frames into dyad states and is all that replay needs.
//! [`Engine`] adds the robot: it synthesizes the robot's own gaze from the
//! controller's current target, runs the pipeline, then lets the controller
//! react.

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierConfig, DyadClassifier, DyadState, StabilityTable};
use crate::controller::{Controller, Emission, SceneView};
use crate::error::{EventError, Result};
use crate::events::{FrameIngestor, Segmenter, SegmenterConfig, SensorFrame};
use crate::geometry::{angular_distance, Agent, AgentPose, GazeRay, GazeTarget, GeometryConfig, SceneObject, Vec3};
use crate::rng::SimRng;

/// Result of observing one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub self_target: GazeTarget,
    pub other_target: GazeTarget,
    pub dyad: DyadState,
}

/// One line of the state log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: f64,
    pub self_state: crate::classifier::AgentGazeState,
    pub other_state: crate::classifier::AgentGazeState,
    pub stable: bool,
    pub gate: bool,
}

impl From<&Observation> for StateRecord {
    fn from(o: &Observation) -> Self {
        Self {
            t: o.t,
            self_state: o.dyad.self_state,
            other_state: o.dyad.other_state,
            stable: o.dyad.stable,
            gate: o.dyad.gate,
        }
    }
}

/// Ingest, segment and classify.
#[derive(Debug, Clone)]
pub struct Pipeline {
    ingestor: FrameIngestor,
    robot: Segmenter,
    partner: Segmenter,
    classifier: DyadClassifier,
}

impl Pipeline {
    pub fn new(
        geometry: GeometryConfig<f64>,
        segmenter: SegmenterConfig,
        classifier: ClassifierConfig,
        table: StabilityTable,
    ) -> Result<Self> {
        geometry.validate()?;
        segmenter.validate()?;
        Ok(Self {
            ingestor: FrameIngestor::new(geometry),
            robot: Segmenter::new(Agent::Robot, segmenter),
            partner: Segmenter::new(Agent::Partner, segmenter),
            classifier: DyadClassifier::new(classifier, table)?,
        })
    }

    pub fn geometry(&self) -> &GeometryConfig<f64> {
        self.ingestor.config()
    }

    pub fn classifier(&self) -> &DyadClassifier {
        &self.classifier
    }

    pub fn observe(&mut self, frame: &SensorFrame) -> Result<Observation, EventError> {
        let [me, you] = self.ingestor.ingest(frame)?;
        self.robot.push(&me)?;
        self.partner.push(&you)?;
        self.classifier.update(Agent::Robot, self.robot.drain_settled(), self.robot.tail());
        self.classifier.update(Agent::Partner, self.partner.drain_settled(), self.partner.tail());
        let dyad = self.classifier.classify(frame.t);
        Ok(Observation { t: frame.t, self_target: me.target, other_target: you.target, dyad })
    }
}

/// Gaussian angular noise on synthesized gaze directions.
#[derive(Debug, Clone)]
pub struct GazeNoise {
    sigma: f64,
    rng: SimRng,
}

impl GazeNoise {
    /// `sigma` in radians; zero disables noise without consuming draws.
    pub fn new(sigma: f64, rng: SimRng) -> Self {
        Self { sigma, rng }
    }

    pub fn perturb(&mut self, dir: Vec3<f64>) -> Vec3<f64> {
        if self.sigma <= 0.0 {
            return dir;
        }
        let d = dir.normalized().unwrap_or(dir);
        let helper = if d.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
        let u = d.cross(helper).normalized().expect("helper is not parallel");
        let v = d.cross(u);
        let a = self.rng.standard_normal() * self.sigma;
        let b = self.rng.standard_normal() * self.sigma;
        d + u * a + v * b
    }
}

const AVERTED: [[f64; 3]; 8] = [
    [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0],
    [0.7, 0.7, 0.0],
    [-0.7, 0.7, 0.0],
];

/// Gaze direction for an agent at `face` attending to `target`.
///
/// Targets that are unavailable in the frame, and `Unresolved`, produce an
/// averted direction at least twice the cone half-angle from every candidate.
pub fn synthesize_gaze(
    face: Vec3<f64>,
    target: &GazeTarget,
    counterpart_face: Option<Vec3<f64>>,
    objects: &[SceneObject<f64>],
    cfg: &GeometryConfig<f64>,
) -> Vec3<f64> {
    let aim = match target {
        GazeTarget::Partner => counterpart_face,
        GazeTarget::Object(id) => objects.iter().find(|o| &o.id == id).map(|o| o.position),
        GazeTarget::Unresolved => None,
    };
    if let Some(dir) = aim.map(|p| p - face).and_then(|d| d.normalized()) {
        return dir;
    }
    let candidates: Vec<Vec3<f64>> =
        counterpart_face.into_iter().chain(objects.iter().map(|o| o.position)).collect();
    AVERTED
        .iter()
        .map(|a| Vec3::from_array(*a).normalized().expect("nonzero"))
        .find(|d| {
            let ray = GazeRay::new(face, *d).expect("unit direction");
            candidates
                .iter()
                .all(|c| angular_distance(&ray, *c).map_or(true, |ang| ang > 2.0 * cfg.cone_half_angle))
        })
        .unwrap_or(Vec3::new(0.0, 1.0, 0.0))
}

/// Everything produced by one engine tick.
#[derive(Debug, Clone)]
pub struct Step {
    pub frame: SensorFrame,
    pub observation: Observation,
    pub emission: Option<Emission>,
}

/// Robot-side engine for one session.
#[derive(Debug, Clone)]
pub struct Engine {
    pipeline: Pipeline,
    controller: Controller,
    robot_face: Vec3<f64>,
    noise: GazeNoise,
    last_pointing: Option<String>,
}

impl Engine {
    pub fn new(pipeline: Pipeline, controller: Controller, robot_face: Vec3<f64>, noise: GazeNoise) -> Self {
        Self { pipeline, controller, robot_face, noise, last_pointing: None }
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut Controller {
        &mut self.controller
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn set_robot_face(&mut self, face: Vec3<f64>) {
        self.robot_face = face;
    }

    /// One tick at time `t` given the partner's pose, the scene objects and
    /// the object the partner is pointing at (if any). A pointing gesture
    /// triggers a reaction once, when it starts or changes object.
    pub fn step(
        &mut self,
        t: f64,
        other: Option<AgentPose<f64>>,
        objects: Vec<SceneObject<f64>>,
        pointing: Option<String>,
    ) -> Result<Step> {
        let target = self.controller.target_at(t);
        let other_face = other.as_ref().map(|p| p.face_center);
        let dir = synthesize_gaze(self.robot_face, &target, other_face, &objects, self.pipeline.geometry());
        let dir = self.noise.perturb(dir);
        let me = AgentPose::new(Agent::Robot, self.robot_face, dir)?;
        let frame = SensorFrame::new(t, me, other, objects)?.with_pointing(pointing);
        let observation = self.pipeline.observe(&frame)?;

        let fresh = match (&frame.other_pointing, &self.last_pointing) {
            (Some(now), Some(before)) if now == before => None,
            (p, _) => p.clone(),
        };
        self.last_pointing = frame.other_pointing.clone();
        let cue = self.pipeline.classifier().latest_object(Agent::Partner);
        let view = SceneView::new(&frame.objects, cue);
        let emission = self.controller.step(t, &observation.dyad, &view, fresh.as_deref())?;
        Ok(Step { frame, observation, emission })
    }
}
