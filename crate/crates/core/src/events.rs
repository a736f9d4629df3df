//! Sensor frames, per-agent target samples and dwell-based fixation segmentation.

use serde::{Deserialize, Serialize};

use crate::error::EventError;
use crate::geometry::{self, Agent, AgentPose, GazeRay, GazeTarget, GeometryConfig, SceneObject, Vec3};

/// One fused perception frame.
///
/// Wire form (one JSON object per line):
/// `{"t":0.5,"self":{"face":[..],"gaze":[..]},"other":null,"objects":[{"id","label","pos"}]}`.
/// `other_pointing` is an optional extension naming the object the partner is
/// pointing at; it is omitted from output when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub t: f64,
    pub self_pose: AgentPose<f64>,
    pub other_pose: Option<AgentPose<f64>>,
    pub objects: Vec<SceneObject<f64>>,
    pub other_pointing: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseWire {
    face: Vec3<f64>,
    gaze: Vec3<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameWire {
    t: f64,
    #[serde(rename = "self")]
    self_pose: PoseWire,
    other: Option<PoseWire>,
    objects: Vec<SceneObject<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    other_pointing: Option<String>,
}

impl PoseWire {
    fn from_pose(p: &AgentPose<f64>) -> Self {
        Self { face: p.face_center, gaze: p.gaze.direction() }
    }

    fn into_pose(self, agent: Agent) -> Result<AgentPose<f64>, EventError> {
        AgentPose::new(agent, self.face, self.gaze)
            .map_err(|e| EventError::InvalidFrame(format!("{agent} pose: {e}")))
    }
}

impl TryFrom<FrameWire> for SensorFrame {
    type Error = EventError;

    fn try_from(w: FrameWire) -> Result<Self, EventError> {
        SensorFrame::new(
            w.t,
            w.self_pose.into_pose(Agent::Robot)?,
            w.other.map(|p| p.into_pose(Agent::Partner)).transpose()?,
            w.objects,
        )
        .map(|f| f.with_pointing(w.other_pointing))
    }
}

impl Serialize for SensorFrame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FrameWire {
            t: self.t,
            self_pose: PoseWire::from_pose(&self.self_pose),
            other: self.other_pose.as_ref().map(PoseWire::from_pose),
            objects: self.objects.clone(),
            other_pointing: self.other_pointing.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SensorFrame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        FrameWire::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

impl SensorFrame {
    pub fn new(
        t: f64,
        self_pose: AgentPose<f64>,
        other_pose: Option<AgentPose<f64>>,
        objects: Vec<SceneObject<f64>>,
    ) -> Result<Self, EventError> {
        if !t.is_finite() {
            return Err(EventError::InvalidFrame("timestamp must be finite".into()));
        }
        geometry::check_unique_ids(&objects)?;
        Ok(Self { t, self_pose, other_pose, objects, other_pointing: None })
    }

    pub fn with_pointing(mut self, pointing: Option<String>) -> Self {
        self.other_pointing = pointing;
        self
    }

    /// Faces closer than `face_hit_radius` cannot belong to two people.
    pub fn validate(&self, cfg: &GeometryConfig<f64>) -> Result<(), EventError> {
        if let Some(other) = &self.other_pose {
            if self.self_pose.face_center.distance(other.face_center) < cfg.face_hit_radius {
                return Err(EventError::InvalidFrame(
                    "faces closer than face_hit_radius".into(),
                ));
            }
        }
        if let Some(id) = &self.other_pointing {
            if !self.objects.iter().any(|o| &o.id == id) {
                return Err(EventError::InvalidFrame(format!("pointing at unknown object `{id}`")));
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("frame serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSample {
    pub t: f64,
    pub agent: Agent,
    pub target: GazeTarget,
}

fn resolve_for(ray: &GazeRay<f64>, counterpart: Option<Vec3<f64>>, frame: &SensorFrame, cfg: &GeometryConfig<f64>) -> GazeTarget {
    geometry::resolve_among(ray, counterpart, &frame.objects, cfg)
}

/// Resolves both agents' targets for one frame: robot first, partner second.
/// A missing partner pose yields `Unresolved` for the partner.
pub fn ingest_frame(frame: &SensorFrame, cfg: &GeometryConfig<f64>) -> [TargetSample; 2] {
    let other_face = frame.other_pose.as_ref().map(|p| p.face_center);
    let robot = resolve_for(&frame.self_pose.gaze, other_face, frame, cfg);
    let partner = frame
        .other_pose
        .as_ref()
        .map(|p| resolve_for(&p.gaze, Some(frame.self_pose.face_center), frame, cfg))
        .unwrap_or(GazeTarget::Unresolved);
    [
        TargetSample { t: frame.t, agent: Agent::Robot, target: robot },
        TargetSample { t: frame.t, agent: Agent::Partner, target: partner },
    ]
}

/// Stateful front end enforcing monotonic timestamps across a stream.
#[derive(Debug, Clone)]
pub struct FrameIngestor {
    cfg: GeometryConfig<f64>,
    last_t: Option<f64>,
}

impl FrameIngestor {
    pub fn new(cfg: GeometryConfig<f64>) -> Self {
        Self { cfg, last_t: None }
    }

    pub fn config(&self) -> &GeometryConfig<f64> {
        &self.cfg
    }

    pub fn ingest(&mut self, frame: &SensorFrame) -> Result<[TargetSample; 2], EventError> {
        if let Some(previous) = self.last_t {
            if frame.t < previous {
                return Err(EventError::TimeRegression { previous, current: frame.t });
            }
        }
        frame.validate(&self.cfg)?;
        self.last_t = Some(frame.t);
        Ok(ingest_frame(frame, &self.cfg))
    }
}

/// A dwell on one resolved target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub agent: Agent,
    pub target: GazeTarget,
    pub start: f64,
    pub end: f64,
}

impl Fixation {
    pub fn new(agent: Agent, target: GazeTarget, start: f64, end: f64) -> Self {
        Self { agent, target, start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    pub min_dwell: f64,
    pub gap_tolerance: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self { min_dwell: 0.20, gap_tolerance: 0.10 }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), EventError> {
        if !(self.min_dwell > 0.0 && self.min_dwell.is_finite()) {
            return Err(EventError::Config("min_dwell must be positive"));
        }
        if !(self.gap_tolerance > 0.0 && self.gap_tolerance.is_finite()) {
            return Err(EventError::Config("gap_tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct OpenRun {
    target: GazeTarget,
    start: f64,
}

#[derive(Debug, Clone)]
struct Run {
    target: GazeTarget,
    start: f64,
    end: f64,
}

/// Incremental fixation segmenter for one agent.
///
/// Each sample holds until the next one, so a run of identical targets spans
/// from its first sample to the first differing sample; the final run ends at
/// the last sample. A run that resumes the same target after less than
/// `gap_tolerance` absorbs the interruption. Runs shorter than `min_dwell`
/// and `Unresolved` runs are never emitted.
///
/// Runs that can no longer be extended are moved to a settled queue, which
/// the caller drains; `tail` reports the provisional remainder as if the
/// stream ended at the latest sample.
#[derive(Debug, Clone)]
pub struct Segmenter {
    agent: Agent,
    cfg: SegmenterConfig,
    open: Option<OpenRun>,
    last_t: Option<f64>,
    pending: Vec<Run>,
    settled: Vec<Fixation>,
}

impl Segmenter {
    pub fn new(agent: Agent, cfg: SegmenterConfig) -> Self {
        Self { agent, cfg, open: None, last_t: None, pending: Vec::new(), settled: Vec::new() }
    }

    pub fn agent(&self) -> Agent {
        self.agent
    }

    pub fn push(&mut self, sample: &TargetSample) -> Result<(), EventError> {
        if sample.agent != self.agent {
            return Err(EventError::MixedAgents { expected: self.agent, found: sample.agent });
        }
        if let Some(previous) = self.last_t {
            if sample.t < previous {
                return Err(EventError::Unordered { previous, current: sample.t });
            }
        }
        self.last_t = Some(sample.t);
        match &self.open {
            Some(open) if open.target == sample.target => {}
            Some(_) => {
                let closed = self.open.replace(OpenRun { target: sample.target.clone(), start: sample.t });
                let closed = closed.expect("open run present");
                fold_run(&mut self.pending, &self.cfg, closed.target, closed.start, sample.t);
                self.settle(sample.t);
            }
            None => self.open = Some(OpenRun { target: sample.target.clone(), start: sample.t }),
        }
        Ok(())
    }

    // Pending runs ending at least `gap_tolerance` before the open run's
    // start can no longer merge with anything that closes later.
    fn settle(&mut self, horizon: f64) {
        let n = self
            .pending
            .iter()
            .take_while(|r| r.end + self.cfg.gap_tolerance <= horizon)
            .count();
        for run in self.pending.drain(..n) {
            if run.end - run.start >= self.cfg.min_dwell {
                self.settled.push(Fixation::new(self.agent, run.target, run.start, run.end));
            }
        }
    }

    /// Fixations that are final, in time order, since the last drain.
    pub fn drain_settled(&mut self) -> Vec<Fixation> {
        std::mem::take(&mut self.settled)
    }

    /// Provisional fixations not yet settled, closed at the latest sample.
    pub fn tail(&self) -> Vec<Fixation> {
        let mut runs = self.pending.clone();
        if let (Some(open), Some(t)) = (&self.open, self.last_t) {
            fold_run(&mut runs, &self.cfg, open.target.clone(), open.start, t);
        }
        runs.into_iter()
            .filter(|r| r.end - r.start >= self.cfg.min_dwell)
            .map(|r| Fixation::new(self.agent, r.target, r.start, r.end))
            .collect()
    }

    /// Closes the stream and returns every fixation not yet drained.
    pub fn finish(mut self) -> Vec<Fixation> {
        let mut out = std::mem::take(&mut self.settled);
        out.extend(self.tail());
        out
    }
}

fn fold_run(runs: &mut Vec<Run>, cfg: &SegmenterConfig, target: GazeTarget, start: f64, end: f64) {
    if !target.is_resolved() {
        return;
    }
    if let Some(i) = runs.iter().rposition(|r| r.target == target) {
        if start - runs[i].end < cfg.gap_tolerance {
            runs[i].end = end;
            runs.truncate(i + 1);
            return;
        }
    }
    runs.push(Run { target, start, end });
}

/// Batch segmentation of one agent's time-ordered samples.
pub fn segment_fixations(samples: &[TargetSample], cfg: &SegmenterConfig) -> Result<Vec<Fixation>, EventError> {
    cfg.validate()?;
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let mut seg = Segmenter::new(first.agent, *cfg);
    for s in samples {
        seg.push(s)?;
    }
    Ok(seg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TICK: f64 = 0.05;

    fn samples(agent: Agent, spans: &[(GazeTarget, usize)]) -> Vec<TargetSample> {
        let mut out = Vec::new();
        let mut k = 0usize;
        for (target, n) in spans {
            for _ in 0..*n {
                out.push(TargetSample { t: k as f64 * TICK, agent, target: target.clone() });
                k += 1;
            }
        }
        out
    }

    fn obj(id: &str) -> GazeTarget {
        GazeTarget::Object(id.into())
    }

    #[test]
    fn continuous_run_is_one_fixation() {
        let s = samples(Agent::Partner, &[(GazeTarget::Partner, 11)]);
        let f = segment_fixations(&s, &SegmenterConfig::default()).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].target, GazeTarget::Partner);
        assert!((f[0].start - 0.0).abs() < 1e-12 && (f[0].end - 0.5).abs() < 1e-12);
    }

    #[test]
    fn short_run_is_dropped() {
        // 0.00..0.15 on A, then unresolved.
        let s = samples(Agent::Robot, &[(obj("A"), 3), (GazeTarget::Unresolved, 1), (GazeTarget::Unresolved, 4)]);
        assert!(segment_fixations(&s, &SegmenterConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn short_gap_is_merged() {
        // Partner [0, 0.3), unresolved [0.3, 0.35), partner [0.35, 0.6].
        let s = samples(
            Agent::Partner,
            &[(GazeTarget::Partner, 6), (GazeTarget::Unresolved, 1), (GazeTarget::Partner, 6)],
        );
        let f = segment_fixations(&s, &SegmenterConfig::default()).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f[0].start).abs() < 1e-12);
        assert!((f[0].end - 0.6).abs() < 1e-12);
    }

    #[test]
    fn long_gap_splits() {
        let s = samples(
            Agent::Partner,
            &[(GazeTarget::Partner, 6), (GazeTarget::Unresolved, 4), (GazeTarget::Partner, 6)],
        );
        let f = segment_fixations(&s, &SegmenterConfig::default()).unwrap();
        assert_eq!(f.len(), 2);
        assert!(f[0].end <= f[1].start);
    }

    #[test]
    fn brief_other_target_is_absorbed() {
        let cfg = SegmenterConfig { min_dwell: 0.04, gap_tolerance: 0.1 };
        let s = samples(Agent::Robot, &[(obj("A"), 6), (obj("B"), 1), (obj("A"), 6)]);
        let f = segment_fixations(&s, &cfg).unwrap();
        assert_eq!(f.len(), 1, "{f:?}");
        assert_eq!(f[0].target, obj("A"));
    }

    #[test]
    fn mixed_agents_rejected() {
        let mut s = samples(Agent::Robot, &[(obj("A"), 3)]);
        s[1].agent = Agent::Partner;
        assert!(matches!(
            segment_fixations(&s, &SegmenterConfig::default()),
            Err(EventError::MixedAgents { .. })
        ));
    }

    #[test]
    fn settled_plus_tail_equals_batch() {
        let s = samples(
            Agent::Robot,
            &[
                (obj("A"), 9),
                (GazeTarget::Unresolved, 5),
                (GazeTarget::Partner, 12),
                (obj("B"), 1),
                (GazeTarget::Partner, 4),
                (obj("A"), 20),
            ],
        );
        let cfg = SegmenterConfig::default();
        let batch = segment_fixations(&s, &cfg).unwrap();
        let mut seg = Segmenter::new(Agent::Robot, cfg);
        let mut got = Vec::new();
        for x in &s {
            seg.push(x).unwrap();
            got.extend(seg.drain_settled());
        }
        got.extend(seg.tail());
        assert_eq!(got, batch);
    }

    fn frame_json(other: &str) -> String {
        format!(
            r#"{{"t":1.0,"self":{{"face":[0,0,0],"gaze":[0,0,1]}},"other":{other},"objects":[{{"id":"ball","label":"ball","pos":[0,-0.3,0.6]}}]}}"#
        )
    }

    #[test]
    fn frame_wire_roundtrip() {
        let f: SensorFrame = serde_json::from_str(&frame_json(r#"{"face":[0,0,1.2],"gaze":[0,0,-1]}"#)).unwrap();
        let back: SensorFrame = serde_json::from_str(&f.to_json_line()).unwrap();
        assert_eq!(f, back);
        assert!(!f.to_json_line().contains("other_pointing"));
    }

    #[test]
    fn partner_looking_at_robot_face() {
        let f: SensorFrame = serde_json::from_str(&frame_json(r#"{"face":[0,0,1.2],"gaze":[0,0,-1]}"#)).unwrap();
        let [me, you] = ingest_frame(&f, &GeometryConfig::default());
        assert_eq!(you.target, GazeTarget::Partner);
        assert_eq!(you.agent, Agent::Partner);
        assert_eq!(me.target, GazeTarget::Partner);
    }

    #[test]
    fn missing_partner_is_unresolved() {
        let f: SensorFrame = serde_json::from_str(&frame_json("null")).unwrap();
        let [me, you] = ingest_frame(&f, &GeometryConfig::default());
        assert_eq!(you.target, GazeTarget::Unresolved);
        // No partner face to land on either.
        assert_eq!(me.target, GazeTarget::Unresolved);
    }

    #[test]
    fn robot_three_degrees_off_ball() {
        let ball = Vec3::new(0.0, -0.3, 0.6);
        let to_ball = ball.normalized().unwrap();
        let side = to_ball.cross(Vec3::new(1.0, 0.0, 0.0)).normalized().unwrap();
        let a = 3f64.to_radians();
        let dir = to_ball * a.cos() + side * a.sin();
        let me = AgentPose::new(Agent::Robot, Vec3::zero(), dir).unwrap();
        let f = SensorFrame::new(0.0, me, None, vec![SceneObject::new("ball", "ball", ball)]).unwrap();
        let [s, _] = ingest_frame(&f, &GeometryConfig::default());
        assert_eq!(s.target, GazeTarget::Object("ball".into()));
    }

    #[test]
    fn time_regression_names_both_timestamps() {
        let mut ing = FrameIngestor::new(GeometryConfig::default());
        let mut f: SensorFrame = serde_json::from_str(&frame_json("null")).unwrap();
        ing.ingest(&f).unwrap();
        f.t = 0.5;
        let err = ing.ingest(&f).unwrap_err();
        assert_eq!(err, EventError::TimeRegression { previous: 1.0, current: 0.5 });
        let msg = err.to_string();
        assert!(msg.contains("0.5") && msg.contains('1'));
    }

    #[test]
    fn malformed_frames_rejected() {
        assert!(serde_json::from_str::<SensorFrame>(&frame_json(r#"{"face":[0,0,1.2],"gaze":[0,0,0]}"#)).is_err());
        let dup = r#"{"t":0,"self":{"face":[0,0,0],"gaze":[0,0,1]},"other":null,"objects":[{"id":"a","label":"x","pos":[1,0,0]},{"id":"a","label":"y","pos":[0,1,0]}]}"#;
        assert!(serde_json::from_str::<SensorFrame>(dup).is_err());
        let mut ing = FrameIngestor::new(GeometryConfig::default());
        let f: SensorFrame = serde_json::from_str(&frame_json(r#"{"face":[0,0,0.05],"gaze":[0,0,-1]}"#)).unwrap();
        assert!(ing.ingest(&f).is_err());
    }
}
