//! Offline replay of recorded frames through the perception pipeline.

use std::io::BufRead;

use crate::config::EngineConfig;
use crate::engine::StateRecord;
use crate::error::{Error, Result};
use crate::events::SensorFrame;

/// Replays newline-delimited frames into state records. Parse errors and
/// time regressions report the 1-based line number.
pub fn replay_jsonl<R: BufRead>(reader: R, config: &EngineConfig) -> Result<Vec<StateRecord>> {
    let mut pipeline = config.pipeline()?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: SensorFrame = serde_json::from_str(&line)
            .map_err(|e| Error::Line { line: line_no, message: e.to_string() })?;
        let obs = pipeline
            .observe(&frame)
            .map_err(|e| Error::Line { line: line_no, message: e.to_string() })?;
        out.push(StateRecord::from(&obs));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{run, Scenario};
    use crate::trace::to_jsonl;

    #[test]
    fn replay_matches_simulated_states() {
        let out = run(&Scenario::reactive_default(2, 20.0), None).unwrap();
        let frames = to_jsonl(&out.frames);
        let states = replay_jsonl(frames.as_bytes(), &EngineConfig::default()).unwrap();
        let expected: Vec<_> = out.trace.iter().map(|r| r.state_record()).collect();
        assert_eq!(to_jsonl(&states), to_jsonl(&expected));
    }

    #[test]
    fn empty_input_is_empty_output() {
        assert!(replay_jsonl("".as_bytes(), &EngineConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn regression_names_line() {
        let f = |t: f64| {
            format!(r#"{{"t":{t},"self":{{"face":[0,0,0],"gaze":[0,0,1]}},"other":null,"objects":[]}}"#)
        };
        let input = format!("{}\n{}\n{}\n", f(0.0), f(0.1), f(0.05));
        match replay_jsonl(input.as_bytes(), &EngineConfig::default()) {
            Err(Error::Line { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("time regression"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
