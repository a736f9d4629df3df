//! Five-state social gaze classification and the 5×5 dyad state space.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ClassifyError;
use crate::events::Fixation;
use crate::geometry::{Agent, GazeTarget};

/// Per-agent social gaze state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentGazeState {
    /// Partner-oriented.
    PO,
    /// Object-oriented.
    OO,
    /// Introspective.
    INT,
    /// Responding to joint attention.
    RJA,
    /// Initiating joint attention.
    IJA,
}

impl AgentGazeState {
    pub const ALL: [AgentGazeState; 5] = [Self::PO, Self::OO, Self::INT, Self::RJA, Self::IJA];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PO => "PO",
            Self::OO => "OO",
            Self::INT => "INT",
            Self::RJA => "RJA",
            Self::IJA => "IJA",
        }
    }
}

impl fmt::Display for AgentGazeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentGazeState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown gaze state `{s}`"))
    }
}

/// Ordered `(self, other)` pair; text form `"PO,PO"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub self_state: AgentGazeState,
    pub other_state: AgentGazeState,
}

impl PairKey {
    pub const GATE: PairKey = PairKey::new(AgentGazeState::PO, AgentGazeState::PO);

    pub const fn new(self_state: AgentGazeState, other_state: AgentGazeState) -> Self {
        Self { self_state, other_state }
    }

    /// The same pair seen from the other agent's side.
    pub fn swapped(self) -> Self {
        Self::new(self.other_state, self.self_state)
    }

    /// All 25 pairs, row-major over `AgentGazeState::ALL`.
    pub fn all() -> impl Iterator<Item = PairKey> {
        AgentGazeState::ALL
            .into_iter()
            .flat_map(|s| AgentGazeState::ALL.into_iter().map(move |o| PairKey::new(s, o)))
    }

    pub fn index(self) -> usize {
        self.self_state.index() * 5 + self.other_state.index()
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.self_state, self.other_state)
    }
}

impl FromStr for PairKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("pair `{s}` must be `SELF,OTHER`"))?;
        Ok(PairKey::new(a.trim().parse()?, b.trim().parse()?))
    }
}

impl Serialize for PairKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PairKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Which dyad pairs count as stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StabilityTable {
    stable_pairs: BTreeSet<PairKey>,
}

impl StabilityTable {
    pub fn new(stable_pairs: impl IntoIterator<Item = PairKey>) -> Self {
        Self { stable_pairs: stable_pairs.into_iter().collect() }
    }

    pub fn is_stable(&self, pair: PairKey) -> bool {
        self.stable_pairs.contains(&pair)
    }

    pub fn len(&self) -> usize {
        self.stable_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stable_pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PairKey> + '_ {
        self.stable_pairs.iter().copied()
    }
}

impl Default for StabilityTable {
    fn default() -> Self {
        default_stability_table()
    }
}

/// Mutual pairs and the two complementary joint-attention pairs.
pub fn default_stability_table() -> StabilityTable {
    use AgentGazeState::*;
    StabilityTable::new([
        PairKey::new(PO, PO),
        PairKey::new(OO, OO),
        PairKey::new(INT, INT),
        PairKey::new(IJA, RJA),
        PairKey::new(RJA, IJA),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadState {
    pub self_state: AgentGazeState,
    pub other_state: AgentGazeState,
    pub stable: bool,
    pub gate: bool,
}

impl DyadState {
    pub fn pair(&self) -> PairKey {
        PairKey::new(self.self_state, self.other_state)
    }

    /// This dyad as the other agent sees it.
    pub fn swapped(&self, table: &StabilityTable) -> DyadState {
        dyad_state(self.other_state, self.self_state, table)
    }
}

pub fn dyad_state(self_state: AgentGazeState, other_state: AgentGazeState, table: &StabilityTable) -> DyadState {
    let pair = PairKey::new(self_state, other_state);
    DyadState { self_state, other_state, stable: table.is_stable(pair), gate: pair == PairKey::GATE }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub window: f64,
    pub po_min_dwell: f64,
    pub int_threshold: f64,
    pub mutual_gaze_window: f64,
    pub follow_latency: f64,
    /// RJA requires a mutual-gaze episode before the partner's shift.
    pub rja_requires_mutual_gaze: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            window: 4.0,
            po_min_dwell: 0.5,
            int_threshold: 1.5,
            mutual_gaze_window: 0.5,
            follow_latency: 2.0,
            rja_requires_mutual_gaze: true,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let all = [self.window, self.po_min_dwell, self.int_threshold, self.mutual_gaze_window, self.follow_latency];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ClassifyError::Config("all durations must be positive"));
        }
        if self.follow_latency > self.window {
            return Err(ClassifyError::Config("follow_latency must not exceed window"));
        }
        Ok(())
    }
}

fn check_order(fix: &[Fixation]) -> Result<(), ClassifyError> {
    for (i, w) in fix.windows(2).enumerate() {
        if w[1].start < w[0].end || w[1].start < w[0].start {
            return Err(ClassifyError::Unordered { index: i + 1 });
        }
    }
    if let Some(i) = fix.iter().position(|f| !(f.end >= f.start)) {
        return Err(ClassifyError::Unordered { index: i });
    }
    Ok(())
}

/// Time at which an agent left fixation `f`; infinite while it is still ongoing.
fn left_at(f: &Fixation, now: f64) -> f64 {
    if f.end < now {
        f.end
    } else {
        f64::INFINITY
    }
}

fn overlap(a: &Fixation, b: &Fixation) -> f64 {
    a.end.min(b.end) - a.start.max(b.start)
}

/// Indices `(i, j)` of mutual-gaze pairs: `own[i]` and `partner[j]` both on
/// the partner's face, overlapping by at least `mutual_gaze_window`.
fn mutual_pairs<'a>(
    own: &'a [&'a Fixation],
    partner: &'a [&'a Fixation],
    cfg: &'a ClassifierConfig,
) -> impl Iterator<Item = (usize, usize)> + 'a {
    own.iter().enumerate().filter(|(_, a)| a.target == GazeTarget::Partner).flat_map(move |(i, a)| {
        partner
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.target == GazeTarget::Partner && overlap(a, b) >= cfg.mutual_gaze_window)
            .map(move |(j, _)| (i, j))
    })
}

fn initiates(own: &[&Fixation], partner: &[&Fixation], now: f64, cfg: &ClassifierConfig) -> bool {
    mutual_pairs(own, partner, cfg).any(|(i, j)| {
        let shifted_to_object = own.get(i + 1).is_some_and(|n| n.target.object_id().is_some());
        shifted_to_object && left_at(own[i], now) < left_at(partner[j], now)
    })
}

fn responds(own: &[&Fixation], partner: &[&Fixation], now: f64, cfg: &ClassifierConfig) -> bool {
    let follows = |shift_from: &Fixation, partner_next: &Fixation, own_next: Option<&&Fixation>| {
        let Some(object) = partner_next.target.object_id() else {
            return false;
        };
        own_next.is_some_and(|n| {
            n.target.object_id() == Some(object) && n.start - shift_from.end <= cfg.follow_latency
        })
    };

    if cfg.rja_requires_mutual_gaze {
        mutual_pairs(own, partner, cfg).any(|(i, j)| {
            let Some(partner_next) = partner.get(j + 1) else {
                return false;
            };
            left_at(partner[j], now) < left_at(own[i], now) && follows(partner[j], partner_next, own.get(i + 1))
        })
    } else {
        // Gaze following alone: the partner moves onto an object and our
        // first fixation starting after that move is on the same object.
        partner.windows(2).any(|w| {
            let shift = w[1].start;
            let own_next = own.iter().find(|f| f.start >= shift);
            own_next.is_some_and(|n| {
                w[1].target.object_id().is_some()
                    && n.target == w[1].target
                    && n.start - shift <= cfg.follow_latency
            })
        })
    }
}

/// Classifies agent A from its fixations (`own`) and its partner's, at time `now`.
///
/// Only fixations ending within `[now - window, now]` are considered. An agent
/// with no fixation in the last `int_threshold` seconds is introspective;
/// otherwise the rules are tried in the order IJA, RJA, PO, OO, with a
/// fallback on the most recent fixation.
pub fn classify_agent(
    now: f64,
    own: &[Fixation],
    partner: &[Fixation],
    cfg: &ClassifierConfig,
) -> Result<AgentGazeState, ClassifyError> {
    check_order(own)?;
    check_order(partner)?;
    let horizon = now - cfg.window;
    let own: Vec<&Fixation> = own.iter().filter(|f| f.end >= horizon && f.start <= now).collect();
    let partner: Vec<&Fixation> = partner.iter().filter(|f| f.end >= horizon && f.start <= now).collect();
    Ok(classify_window(now, &own, &partner, cfg))
}

fn classify_window(now: f64, own: &[&Fixation], partner: &[&Fixation], cfg: &ClassifierConfig) -> AgentGazeState {
    use AgentGazeState::*;

    if !own.iter().any(|f| f.end >= now - cfg.int_threshold) {
        return INT;
    }
    if initiates(own, partner, now, cfg) {
        return IJA;
    }
    if responds(own, partner, now, cfg) {
        return RJA;
    }
    let last = own.last().expect("non-empty when active");
    let any_object = own.iter().any(|f| f.target.object_id().is_some());
    let any_partner = own.iter().any(|f| f.target == GazeTarget::Partner);
    if last.target == GazeTarget::Partner && last.duration() >= cfg.po_min_dwell && !any_object {
        return PO;
    }
    if any_object && !any_partner {
        return OO;
    }
    match last.target {
        GazeTarget::Object(_) => OO,
        GazeTarget::Partner => PO,
        GazeTarget::Unresolved => INT,
    }
}

#[derive(Debug, Clone, Default)]
struct History {
    settled: VecDeque<Fixation>,
    tail: Vec<Fixation>,
}

impl History {
    fn evict(&mut self, horizon: f64) {
        while self.settled.front().is_some_and(|f| f.end < horizon) {
            self.settled.pop_front();
        }
    }

    fn visible(&self, horizon: f64, now: f64) -> Vec<&Fixation> {
        self.settled
            .iter()
            .chain(self.tail.iter())
            .filter(|f| f.end >= horizon && f.start <= now)
            .collect()
    }
}

/// Sliding-window classifier over both agents' fixation streams.
///
/// Settled fixations are appended as they become final and evicted once they
/// fall out of the window; the provisional tail is replaced on every update.
#[derive(Debug, Clone)]
pub struct DyadClassifier {
    cfg: ClassifierConfig,
    table: StabilityTable,
    robot: History,
    partner: History,
}

impl DyadClassifier {
    pub fn new(cfg: ClassifierConfig, table: StabilityTable) -> Result<Self, ClassifyError> {
        cfg.validate()?;
        Ok(Self { cfg, table, robot: History::default(), partner: History::default() })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.cfg
    }

    pub fn table(&self) -> &StabilityTable {
        &self.table
    }

    fn history_mut(&mut self, agent: Agent) -> &mut History {
        match agent {
            Agent::Robot => &mut self.robot,
            Agent::Partner => &mut self.partner,
        }
    }

    pub fn update(&mut self, agent: Agent, settled: Vec<Fixation>, tail: Vec<Fixation>) {
        let h = self.history_mut(agent);
        h.settled.extend(settled);
        h.tail = tail;
    }

    /// The most recent object `agent` fixated within the window.
    pub fn latest_object(&self, agent: Agent) -> Option<&str> {
        let h = match agent {
            Agent::Robot => &self.robot,
            Agent::Partner => &self.partner,
        };
        h.settled.iter().chain(h.tail.iter()).rev().find_map(|f| f.target.object_id())
    }

    pub fn classify(&mut self, now: f64) -> DyadState {
        let horizon = now - self.cfg.window;
        self.robot.evict(horizon);
        self.partner.evict(horizon);
        let robot = self.robot.visible(horizon, now);
        let partner = self.partner.visible(horizon, now);
        let self_state = classify_window(now, &robot, &partner, &self.cfg);
        let other_state = classify_window(now, &partner, &robot, &self.cfg);
        dyad_state(self_state, other_state, &self.table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AgentGazeState::*;

    fn fx(agent: Agent, target: GazeTarget, start: f64, end: f64) -> Fixation {
        Fixation::new(agent, target, start, end)
    }

    fn obj(id: &str) -> GazeTarget {
        GazeTarget::Object(id.into())
    }

    const A: Agent = Agent::Robot;
    const B: Agent = Agent::Partner;

    #[test]
    fn partner_oriented() {
        let now = 10.0;
        let own = [fx(A, GazeTarget::Partner, now - 1.2, now)];
        assert_eq!(classify_agent(now, &own, &[], &ClassifierConfig::default()).unwrap(), PO);
    }

    #[test]
    fn object_oriented() {
        let own = [fx(A, obj("A"), 7.0, 8.0), fx(A, obj("B"), 8.2, 10.0)];
        assert_eq!(classify_agent(10.0, &own, &[], &ClassifierConfig::default()).unwrap(), OO);
    }

    #[test]
    fn initiating_joint_attention() {
        // Mutual gaze overlapping 0.6 s, then A moves to the cube while B stays on A's face.
        let own = [fx(A, GazeTarget::Partner, 5.0, 6.0), fx(A, obj("cube"), 6.0, 7.0)];
        let partner = [fx(B, GazeTarget::Partner, 5.4, 7.0)];
        assert_eq!(classify_agent(7.0, &own, &partner, &ClassifierConfig::default()).unwrap(), IJA);
    }

    #[test]
    fn responding_joint_attention() {
        // B leads: mutual gaze, B shifts to the ball at 6.0, A follows at 6.8.
        let partner = [fx(B, GazeTarget::Partner, 4.0, 6.0), fx(B, obj("ball"), 6.0, 8.0)];
        let own = [fx(A, GazeTarget::Partner, 4.5, 6.8), fx(A, obj("ball"), 6.8, 8.0)];
        let cfg = ClassifierConfig::default();
        assert_eq!(classify_agent(8.0, &own, &partner, &cfg).unwrap(), RJA);
        assert_eq!(classify_agent(8.0, &partner, &own, &cfg).unwrap(), IJA);
    }

    #[test]
    fn late_follow_is_not_rja() {
        let partner = [fx(B, GazeTarget::Partner, 4.0, 6.0), fx(B, obj("ball"), 6.0, 9.5)];
        let own = [fx(A, GazeTarget::Partner, 4.5, 8.5), fx(A, obj("ball"), 8.5, 9.5)];
        assert_ne!(classify_agent(9.5, &own, &partner, &ClassifierConfig::default()).unwrap(), RJA);
    }

    #[test]
    fn gaze_following_without_mutual_gaze() {
        let cfg = ClassifierConfig { rja_requires_mutual_gaze: false, ..Default::default() };
        let partner = [fx(B, obj("cup"), 4.0, 5.0), fx(B, obj("ball"), 5.0, 8.0)];
        let own = [fx(A, obj("cup"), 4.0, 5.5), fx(A, obj("ball"), 5.6, 8.0)];
        assert_eq!(classify_agent(8.0, &own, &partner, &cfg).unwrap(), RJA);
        assert_ne!(classify_agent(8.0, &own, &partner, &ClassifierConfig::default()).unwrap(), RJA);
    }

    #[test]
    fn introspective_when_nothing_recent() {
        assert_eq!(classify_agent(3.0, &[], &[], &ClassifierConfig::default()).unwrap(), INT);
        // A stale partner fixation does not keep PO alive.
        let own = [fx(A, GazeTarget::Partner, 0.0, 1.0)];
        assert_eq!(classify_agent(3.0, &own, &[], &ClassifierConfig::default()).unwrap(), INT);
        assert_eq!(classify_agent(2.0, &own, &[], &ClassifierConfig::default()).unwrap(), PO);
    }

    #[test]
    fn ija_beats_po() {
        let own = [
            fx(A, GazeTarget::Partner, 1.0, 2.0),
            fx(A, obj("cube"), 2.0, 2.6),
            fx(A, GazeTarget::Partner, 2.6, 4.0),
        ];
        let partner = [fx(B, GazeTarget::Partner, 1.0, 4.0)];
        assert_eq!(classify_agent(4.0, &own, &partner, &ClassifierConfig::default()).unwrap(), IJA);
    }

    #[test]
    fn fallback_on_latest_fixation() {
        let own = [fx(A, obj("cube"), 1.0, 2.0), fx(A, GazeTarget::Partner, 2.0, 2.2)];
        assert_eq!(classify_agent(2.2, &own, &[], &ClassifierConfig::default()).unwrap(), PO);
        let own = [fx(A, GazeTarget::Partner, 1.0, 2.0), fx(A, obj("cube"), 2.0, 2.2)];
        assert_eq!(classify_agent(2.2, &own, &[], &ClassifierConfig::default()).unwrap(), OO);
    }

    #[test]
    fn unordered_input_rejected() {
        let own = [fx(A, obj("a"), 2.0, 3.0), fx(A, obj("b"), 1.0, 1.5)];
        assert_eq!(
            classify_agent(3.0, &own, &[], &ClassifierConfig::default()),
            Err(ClassifyError::Unordered { index: 1 })
        );
    }

    #[test]
    fn dyad_pairs_and_gate() {
        let table = default_stability_table();
        let all: BTreeSet<PairKey> = PairKey::all().collect();
        assert_eq!(all.len(), 25);
        for pair in PairKey::all() {
            let d = dyad_state(pair.self_state, pair.other_state, &table);
            assert_eq!(d.gate, pair == PairKey::GATE);
            assert_eq!(d.pair(), pair);
        }
        let gate = dyad_state(PO, PO, &table);
        assert!(gate.gate && gate.stable);
        assert!(dyad_state(IJA, RJA, &table).stable);
        assert!(!dyad_state(IJA, IJA, &table).stable);
        assert_eq!(table.len(), 5);
    }

    #[test]
    fn pair_key_text_form() {
        let k: PairKey = "RJA,IJA".parse().unwrap();
        assert_eq!(k, PairKey::new(RJA, IJA));
        assert_eq!(k.to_string(), "RJA,IJA");
        assert!("PO".parse::<PairKey>().is_err());
        assert!("PO,XX".parse::<PairKey>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::default().validate().is_ok());
        let bad = ClassifierConfig { follow_latency: 5.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn window_evicts_old_fixations() {
        let mut c = DyadClassifier::new(ClassifierConfig::default(), default_stability_table()).unwrap();
        c.update(A, vec![fx(A, obj("cube"), 0.0, 1.0)], vec![fx(A, GazeTarget::Partner, 1.0, 6.0)]);
        c.update(B, vec![], vec![fx(B, GazeTarget::Partner, 1.0, 6.0)]);
        let d = c.classify(6.0);
        // The cube fixation ended before now - window, so A reads as plain PO.
        assert_eq!((d.self_state, d.other_state), (PO, PO));
        assert!(d.gate);
        assert_eq!(c.latest_object(A), None);
    }
}
