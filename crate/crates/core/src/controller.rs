//! Robot-side gaze policy: guarded probabilistic choice of the next intended
//! state, expansion into timed gaze actions, and the pointing/speaking rules
//! that decide where the eyes go while an action runs.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::classifier::{AgentGazeState, DyadState, PairKey};
use crate::error::ControllerError;
use crate::geometry::{GazeTarget, SceneObject};
use crate::rng::SimRng;

use AgentGazeState::*;

/// Weights over intended next self-states, one row per dyad pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    rows: [[f64; 5]; 25],
}

impl TransitionModel {
    /// Builds a model from explicit rows. All 25 pairs must be present, every
    /// weight finite and non-negative, and every row must carry some mass.
    pub fn from_rows(rows: &BTreeMap<PairKey, [f64; 5]>) -> Result<Self, ControllerError> {
        let mut out = [[0.0; 5]; 25];
        for pair in PairKey::all() {
            let row = rows.get(&pair).ok_or(ControllerError::MissingRow(pair))?;
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(ControllerError::InvalidRow(pair, "weights must be finite and non-negative"));
            }
            if !row.iter().any(|w| *w > 0.0) {
                return Err(ControllerError::InvalidRow(pair, "row has no positive weight"));
            }
            out[pair.index()] = *row;
        }
        Ok(Self { rows: out })
    }

    /// A model where every row is `row`.
    pub fn uniform_rows(row: [f64; 5]) -> Result<Self, ControllerError> {
        let rows = PairKey::all().map(|p| (p, row)).collect();
        Self::from_rows(&rows)
    }

    pub fn row(&self, pair: PairKey) -> [f64; 5] {
        self.rows[pair.index()]
    }

    pub fn rows(&self) -> BTreeMap<PairKey, [f64; 5]> {
        PairKey::all().map(|p| (p, self.row(p))).collect()
    }
}

impl Default for TransitionModel {
    /// Mostly mirror the partner's state, bid for joint attention at the gate
    /// and answer a partner's initiation.
    fn default() -> Self {
        let mut rows = BTreeMap::new();
        for pair in PairKey::all() {
            //            PO    OO    INT   RJA   IJA
            let row = match (pair.self_state, pair.other_state) {
                (PO, PO) => [0.55, 0.10, 0.05, 0.00, 0.30],
                (_, PO) => [0.75, 0.15, 0.05, 0.00, 0.05],
                (_, OO) => [0.25, 0.70, 0.05, 0.00, 0.00],
                (INT, INT) => [0.20, 0.10, 0.70, 0.00, 0.00],
                (_, INT) => [0.45, 0.20, 0.35, 0.00, 0.00],
                (_, IJA) => [0.05, 0.05, 0.00, 0.90, 0.00],
                (IJA, RJA) => [0.40, 0.60, 0.00, 0.00, 0.00],
                (_, RJA) => [0.45, 0.55, 0.00, 0.00, 0.00],
            };
            rows.insert(pair, row);
        }
        Self::from_rows(&rows).expect("default rows are valid")
    }
}

/// What the guards need to know about the world.
#[derive(Debug, Clone, Copy)]
pub struct SceneView<'a> {
    pub objects: &'a [SceneObject<f64>],
    /// Object the partner most recently shifted attention to.
    pub partner_cue: Option<&'a str>,
}

impl<'a> SceneView<'a> {
    pub fn new(objects: &'a [SceneObject<f64>], partner_cue: Option<&'a str>) -> Self {
        Self { objects, partner_cue }
    }

    fn has_object(&self, id: &str) -> bool {
        self.objects.iter().any(|o| o.id == id)
    }
}

/// Rule half of the hybrid policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardTable {
    /// IJA only from (PO, PO); RJA only when the partner initiates. PO, OO and
    /// INT are always allowed. Intents that need a referent are also blocked
    /// when the scene cannot supply one.
    #[default]
    Default,
    /// Only the referent checks apply.
    None,
}

impl GuardTable {
    pub fn allows(&self, intent: AgentGazeState, current: &DyadState, scene: &SceneView<'_>) -> bool {
        let referent = match intent {
            OO | IJA => !scene.objects.is_empty(),
            RJA => scene.partner_cue.is_some_and(|id| scene.has_object(id)),
            PO | INT => true,
        };
        let rule = match self {
            GuardTable::None => true,
            GuardTable::Default => match intent {
                IJA => current.pair() == PairKey::GATE,
                RJA => current.other_state == IJA,
                PO | OO | INT => true,
            },
        };
        referent && rule
    }
}

/// Guard-filtered weights for `current`, renormalized; `None` when every
/// intent is blocked.
pub fn filtered_distribution(
    current: &DyadState,
    scene: &SceneView<'_>,
    model: &TransitionModel,
    guards: &GuardTable,
) -> Option<[f64; 5]> {
    let mut w = model.row(current.pair());
    for (i, state) in AgentGazeState::ALL.into_iter().enumerate() {
        if !guards.allows(state, current, scene) {
            w[i] = 0.0;
        }
    }
    let total: f64 = w.iter().sum();
    (total > 0.0).then(|| w.map(|x| x / total))
}

/// Samples the next intended self-state. When the guards block every
/// weighted intent the result is PO.
pub fn sample_intent(
    current: &DyadState,
    scene: &SceneView<'_>,
    model: &TransitionModel,
    guards: &GuardTable,
    rng: &mut SimRng,
) -> AgentGazeState {
    let Some(p) = filtered_distribution(current, scene, model, guards) else {
        return PO;
    };
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last = PO;
    for (i, state) in AgentGazeState::ALL.into_iter().enumerate() {
        if p[i] <= 0.0 {
            continue;
        }
        acc += p[i];
        last = state;
        if u < acc {
            return state;
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionKind {
    FixatePartner,
    FixateObject { object: String },
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeAction {
    pub kind: ActionKind,
    pub onset_latency: f64,
    pub hold: f64,
    pub pointing: bool,
    pub speaking: bool,
}

impl GazeAction {
    pub fn new(kind: ActionKind, onset_latency: f64, hold: f64) -> Self {
        Self { kind, onset_latency, hold, pointing: false, speaking: false }
    }

    pub fn pointing(mut self, on: bool) -> Self {
        self.pointing = on;
        self
    }

    pub fn speaking(mut self, on: bool) -> Self {
        self.speaking = on;
        self
    }

    pub fn duration(&self) -> f64 {
        self.onset_latency + self.hold
    }
}

/// Where the eyes go for `action`. Pointing without speech looks at the
/// pointed object; speaking while pointing looks at the partner.
pub fn apply_deixis(action: &GazeAction) -> GazeTarget {
    match (&action.kind, action.pointing, action.speaking) {
        (_, true, true) => GazeTarget::Partner,
        (ActionKind::FixateObject { object }, _, _) => GazeTarget::Object(object.clone()),
        (ActionKind::FixatePartner, _, _) => GazeTarget::Partner,
        (ActionKind::Idle, _, _) => GazeTarget::Unresolved,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Personality {
    Introvert,
    Extrovert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointingStyle {
    StraightArm,
    HipBend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub name: Personality,
    pub fixation_hold_mean: f64,
    pub onset_latency_mean: f64,
    pub pointing_style: PointingStyle,
}

impl BehaviorProfile {
    pub fn introvert() -> Self {
        Self {
            name: Personality::Introvert,
            fixation_hold_mean: 1.6,
            onset_latency_mean: 0.45,
            pointing_style: PointingStyle::StraightArm,
        }
    }

    pub fn extrovert() -> Self {
        Self {
            name: Personality::Extrovert,
            fixation_hold_mean: 1.0,
            onset_latency_mean: 0.25,
            pointing_style: PointingStyle::HipBend,
        }
    }

    pub fn for_personality(p: Personality) -> Self {
        match p {
            Personality::Introvert => Self::introvert(),
            Personality::Extrovert => Self::extrovert(),
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.fixation_hold_mean) || !positive(self.onset_latency_mean) {
            return Err(ControllerError::Profile("means must be positive"));
        }
        let expected = match self.name {
            Personality::Introvert => PointingStyle::StraightArm,
            Personality::Extrovert => PointingStyle::HipBend,
        };
        if self.pointing_style != expected {
            return Err(ControllerError::Profile("pointing style does not match personality"));
        }
        Ok(())
    }
}

// Exponential jitter around `mean`, floored at half the mean so holds never
// collapse below the fixation dwell floor. Monotone in `mean` for a fixed draw.
fn jittered(mean: f64, rng: &mut SimRng) -> f64 {
    mean * (0.5 + 0.5 * rng.exp1())
}

fn timed(kind: ActionKind, profile: &BehaviorProfile, rng: &mut SimRng) -> GazeAction {
    let latency = jittered(profile.onset_latency_mean, rng);
    let hold = jittered(profile.fixation_hold_mean, rng);
    GazeAction::new(kind, latency, hold)
}

/// Expands an intended state into gaze actions.
///
/// `mutual_hold` is the minimum partner-fixation hold before an IJA shift.
pub fn plan_actions(
    intent: AgentGazeState,
    scene: &SceneView<'_>,
    profile: &BehaviorProfile,
    mutual_hold: f64,
    rng: &mut SimRng,
) -> Result<Vec<GazeAction>, ControllerError> {
    let pick_object = |rng: &mut SimRng, why| {
        if scene.objects.is_empty() {
            return Err(ControllerError::NoReferent(why));
        }
        Ok(scene.objects[rng.index(scene.objects.len())].id.clone())
    };
    Ok(match intent {
        PO => vec![timed(ActionKind::FixatePartner, profile, rng)],
        INT => vec![timed(ActionKind::Idle, profile, rng)],
        OO => {
            let object = pick_object(rng, "OO")?;
            vec![timed(ActionKind::FixateObject { object }, profile, rng)]
        }
        IJA => {
            let object = pick_object(rng, "IJA")?;
            let mut face = timed(ActionKind::FixatePartner, profile, rng);
            face.hold = face.hold.max(mutual_hold);
            let show = timed(ActionKind::FixateObject { object }, profile, rng).pointing(true);
            vec![face, show]
        }
        RJA => {
            let object = scene
                .partner_cue
                .filter(|id| scene.has_object(id))
                .ok_or(ControllerError::NoReferent("RJA"))?
                .to_string();
            vec![timed(ActionKind::FixateObject { object }, profile, rng)]
        }
    })
}

/// Attentive response to the partner pointing at `object`.
pub fn react_to_partner_pointing(
    object: &str,
    objects: &[SceneObject<f64>],
    profile: &BehaviorProfile,
) -> Result<GazeAction, ControllerError> {
    if !objects.iter().any(|o| o.id == object) {
        return Err(ControllerError::UnknownObject(object.to_string()));
    }
    Ok(GazeAction::new(
        ActionKind::FixateObject { object: object.to_string() },
        profile.onset_latency_mean,
        profile.fixation_hold_mean,
    ))
}

#[derive(Debug, Clone)]
struct Active {
    action: GazeAction,
    start: f64,
    prior: GazeTarget,
}

/// A newly started action, with the intent it was planned from when it
/// came straight from sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub action: GazeAction,
    pub intent: Option<AgentGazeState>,
}

/// Single-session gaze controller: owns its random stream and action queue.
///
/// Intents are sampled only when the queue runs dry or a partner pointing
/// gesture preempts the current action.
#[derive(Debug, Clone)]
pub struct Controller {
    model: TransitionModel,
    guards: GuardTable,
    profile: BehaviorProfile,
    mutual_hold: f64,
    rng: SimRng,
    active: Option<Active>,
    queue: VecDeque<GazeAction>,
}

impl Controller {
    pub fn new(
        model: TransitionModel,
        guards: GuardTable,
        profile: BehaviorProfile,
        mutual_hold: f64,
        rng: SimRng,
    ) -> Result<Self, ControllerError> {
        profile.validate()?;
        Ok(Self { model, guards, profile, mutual_hold, rng, active: None, queue: VecDeque::new() })
    }

    pub fn profile(&self) -> &BehaviorProfile {
        &self.profile
    }

    /// Takes effect for actions planned after the call.
    pub fn set_profile(&mut self, profile: BehaviorProfile) -> Result<(), ControllerError> {
        profile.validate()?;
        self.profile = profile;
        Ok(())
    }

    /// Gaze target at `t`: the previous target until the onset latency of the
    /// running action has elapsed, then that action's deictic target.
    pub fn target_at(&self, t: f64) -> GazeTarget {
        match &self.active {
            None => GazeTarget::Unresolved,
            Some(a) if t >= a.start + a.action.onset_latency => apply_deixis(&a.action),
            Some(a) => a.prior.clone(),
        }
    }

    pub fn current_action(&self) -> Option<&GazeAction> {
        self.active.as_ref().map(|a| &a.action)
    }

    fn finished(&self, t: f64) -> bool {
        self.active.as_ref().is_none_or(|a| t >= a.start + a.action.duration())
    }

    fn start(&mut self, t: f64, action: GazeAction) {
        let prior = self.target_at(t);
        self.active = Some(Active { action, start: t, prior });
    }

    /// Advances the controller after perception at time `t`.
    ///
    /// `pointing` is a fresh partner pointing gesture, which preempts whatever
    /// is running. Returns the action started at `t`, if any.
    pub fn step(
        &mut self,
        t: f64,
        current: &DyadState,
        scene: &SceneView<'_>,
        pointing: Option<&str>,
    ) -> Result<Option<Emission>, ControllerError> {
        if let Some(object) = pointing {
            let action = react_to_partner_pointing(object, scene.objects, &self.profile)?;
            self.queue.clear();
            self.start(t, action.clone());
            return Ok(Some(Emission { action, intent: None }));
        }
        if !self.finished(t) {
            return Ok(None);
        }
        if let Some(action) = self.queue.pop_front() {
            self.start(t, action.clone());
            return Ok(Some(Emission { action, intent: None }));
        }
        let intent = sample_intent(current, scene, &self.model, &self.guards, &mut self.rng);
        let mut actions: VecDeque<_> =
            plan_actions(intent, scene, &self.profile, self.mutual_hold, &mut self.rng)?.into();
        let first = actions.pop_front().expect("plans are non-empty");
        self.queue = actions;
        self.start(t, first.clone());
        Ok(Some(Emission { action: first, intent: Some(intent) }))
    }
}
