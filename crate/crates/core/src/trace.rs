//! Tick-by-tick traces, their JSONL form, and summary metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::classifier::{AgentGazeState, PairKey};
use crate::controller::GazeAction;
use crate::engine::{StateRecord, Step};
use crate::error::{Error, Result};
use crate::geometry::GazeTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub self_target: GazeTarget,
    pub other_target: GazeTarget,
    pub self_state: AgentGazeState,
    pub other_state: AgentGazeState,
    pub stable: bool,
    pub gate: bool,
    /// Intent sampled at this tick, if the controller resampled.
    pub intent: Option<AgentGazeState>,
    /// Robot action started at this tick.
    pub action: Option<GazeAction>,
}

impl TraceRecord {
    pub fn from_step(step: &Step) -> Self {
        let o = &step.observation;
        Self {
            t: o.t,
            self_target: o.self_target.clone(),
            other_target: o.other_target.clone(),
            self_state: o.dyad.self_state,
            other_state: o.dyad.other_state,
            stable: o.dyad.stable,
            gate: o.dyad.gate,
            intent: step.emission.as_ref().and_then(|e| e.intent),
            action: step.emission.as_ref().map(|e| e.action.clone()),
        }
    }

    pub fn pair(&self) -> PairKey {
        PairKey::new(self.self_state, self.other_state)
    }

    pub fn state_record(&self) -> StateRecord {
        StateRecord {
            t: self.t,
            self_state: self.self_state,
            other_state: self.other_state,
            stable: self.stable,
            gate: self.gate,
        }
    }
}

pub type Trace = Vec<TraceRecord>;

/// Serializes items as newline-delimited JSON.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

/// Parses newline-delimited JSON, skipping blank lines. Errors carry the
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Line { line: i + 1, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

/// Both agents on the same object for at least this long counts as a joint
/// attention episode.
pub const JOINT_ATTENTION_MIN: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ticks: usize,
    /// Fraction of ticks per dyad pair; all 25 pairs are listed.
    pub occupancy: BTreeMap<PairKey, f64>,
    pub joint_attention_episodes: usize,
    pub gate_passages: usize,
    pub time_to_first_stable: Option<f64>,
    pub stable_fraction: f64,
}

pub fn compute_metrics(trace: &[TraceRecord]) -> Result<Metrics> {
    let first = trace.first().ok_or(Error::EmptyTrace)?;
    let n = trace.len();
    let mut counts = [0usize; 25];
    for r in trace {
        counts[r.pair().index()] += 1;
    }
    let occupancy = PairKey::all().map(|p| (p, counts[p.index()] as f64 / n as f64)).collect();

    let gate_passages = trace
        .iter()
        .enumerate()
        .filter(|(i, r)| r.pair() == PairKey::GATE && (*i == 0 || trace[i - 1].pair() != PairKey::GATE))
        .count();

    let stable = trace.iter().filter(|r| r.stable).count();
    let time_to_first_stable = trace.iter().find(|r| r.stable).map(|r| r.t - first.t);

    Ok(Metrics {
        ticks: n,
        occupancy,
        joint_attention_episodes: joint_attention_episodes(trace),
        gate_passages,
        time_to_first_stable,
        stable_fraction: stable as f64 / n as f64,
    })
}

// A run spans from its first record to the first record after it; a run
// reaching the end of the trace ends at the last record.
fn joint_attention_episodes(trace: &[TraceRecord]) -> usize {
    let shared = |r: &TraceRecord| match (&r.self_target, &r.other_target) {
        (GazeTarget::Object(a), GazeTarget::Object(b)) if a == b => Some(a.clone()),
        _ => None,
    };
    let mut episodes = 0;
    let mut i = 0;
    while i < trace.len() {
        let Some(object) = shared(&trace[i]) else {
            i += 1;
            continue;
        };
        let mut j = i + 1;
        while j < trace.len() && shared(&trace[j]).as_deref() == Some(object.as_str()) {
            j += 1;
        }
        let end = trace.get(j).map_or(trace[j - 1].t, |r| r.t);
        if end - trace[i].t >= JOINT_ATTENTION_MIN - 1e-9 {
            episodes += 1;
        }
        i = j;
    }
    episodes
}

impl Metrics {
    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<26}{}", "ticks", self.ticks);
        let _ = writeln!(s, "{:<26}{:.4}", "stable_fraction", self.stable_fraction);
        let ttfs = self.time_to_first_stable.map_or_else(|| "none".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(s, "{:<26}{}", "time_to_first_stable", ttfs);
        let _ = writeln!(s, "{:<26}{}", "gate_passages", self.gate_passages);
        let _ = writeln!(s, "{:<26}{}", "joint_attention_episodes", self.joint_attention_episodes);
        let _ = writeln!(s, "occupancy (self \\ other)");
        let _ = write!(s, "{:>6}", "");
        for o in AgentGazeState::ALL {
            let _ = write!(s, "{:>8}", o.as_str());
        }
        s.push('\n');
        for me in AgentGazeState::ALL {
            let _ = write!(s, "{:>6}", me.as_str());
            for o in AgentGazeState::ALL {
                let v = self.occupancy.get(&PairKey::new(me, o)).copied().unwrap_or(0.0);
                let _ = write!(s, "{v:>8.4}");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AgentGazeState::*;

    fn rec(t: f64, st: (AgentGazeState, AgentGazeState), targets: (GazeTarget, GazeTarget)) -> TraceRecord {
        let d = crate::classifier::dyad_state(st.0, st.1, &crate::classifier::default_stability_table());
        TraceRecord {
            t,
            self_target: targets.0,
            other_target: targets.1,
            self_state: d.self_state,
            other_state: d.other_state,
            stable: d.stable,
            gate: d.gate,
            intent: None,
            action: None,
        }
    }

    #[test]
    fn constant_gate_trace() {
        let trace: Trace = (0..40)
            .map(|k| rec(k as f64 * 0.05, (PO, PO), (GazeTarget::Partner, GazeTarget::Partner)))
            .collect();
        let m = compute_metrics(&trace).unwrap();
        assert_eq!(m.occupancy[&PairKey::GATE], 1.0);
        assert_eq!(m.occupancy.len(), 25);
        assert_eq!(m.stable_fraction, 1.0);
        assert_eq!(m.gate_passages, 1);
        assert_eq!(m.time_to_first_stable, Some(0.0));
        assert_eq!(m.joint_attention_episodes, 0);
    }

    #[test]
    fn shared_object_episode() {
        let cube = GazeTarget::Object("cube".into());
        let mut trace = Vec::new();
        for k in 0..30 {
            let t = k as f64 * 0.05;
            let targets = if (5..15).contains(&k) {
                (cube.clone(), cube.clone())
            } else {
                (GazeTarget::Partner, GazeTarget::Unresolved)
            };
            trace.push(rec(t, (OO, OO), targets));
        }
        assert_eq!(compute_metrics(&trace).unwrap().joint_attention_episodes, 1);
        // Too short: 0.2 s.
        for r in trace.iter_mut().skip(9) {
            r.self_target = GazeTarget::Partner;
        }
        assert_eq!(compute_metrics(&trace).unwrap().joint_attention_episodes, 0);
    }

    #[test]
    fn gate_entries_counted() {
        let seq = [(PO, PO), (PO, PO), (OO, PO), (PO, PO), (INT, INT), (PO, PO)];
        let trace: Trace = seq
            .iter()
            .enumerate()
            .map(|(k, s)| rec(k as f64, *s, (GazeTarget::Unresolved, GazeTarget::Unresolved)))
            .collect();
        let m = compute_metrics(&trace).unwrap();
        assert_eq!(m.gate_passages, 3);
        assert!((m.stable_fraction - 5.0 / 6.0).abs() < 1e-12);
        assert!(m.to_table().contains("gate_passages"));
    }

    #[test]
    fn empty_trace_errors() {
        assert!(matches!(compute_metrics(&[]), Err(Error::EmptyTrace)));
    }

    #[test]
    fn jsonl_line_numbers() {
        let input = "{\"t\":0}\n\nnot json\n";
        #[derive(Deserialize)]
        #[allow(dead_code)]
        struct T {
            t: f64,
        }
        match read_jsonl::<T, _>(input.as_bytes()) {
            Err(Error::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {:?}", other.map(|v| v.len())),
        }
    }
}
