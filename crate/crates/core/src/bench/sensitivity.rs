//! Paraphrase pairs that should mean the same thing. With a mock gateway
//! every pair must agree; with a live model the report shows which wordings
//! change the generated behavior.

use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::gateway::GatewayConfig;
use crate::parser::OutputMode;
use crate::session::{Session, SessionConfig, SessionError};
use crate::sim::{GoalClause, Scenario, TaskSpec, Zone};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphrasePair {
    pub label: String,
    pub a: String,
    pub b: String,
    pub goals: Vec<GoalClause>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub label: String,
    pub a: String,
    pub b: String,
    pub behavior_a: Option<Behavior>,
    pub behavior_b: Option<Behavior>,
    /// Both parsed and structurally equal.
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub gateway: String,
    pub pairs: Vec<PairResult>,
}

impl SensitivityReport {
    pub fn divergent(&self) -> Vec<&str> {
        self.pairs.iter().filter(|p| !p.equal).map(|p| p.label.as_str()).collect()
    }
}

pub const CORPUS_SCENE: Scenario = Scenario::Tabletop {
    n_boxes: 2,
    seed: 17,
    occlusion: false,
};

/// The fixed corpus, phrased over the two cubes of [`CORPUS_SCENE`].
pub fn corpus() -> Vec<ParaphrasePair> {
    let world = CORPUS_SCENE.reset().expect("corpus scene resets");
    let (a, b) = (world.descriptor("box1"), world.descriptor("box2"));
    let on = vec![GoalClause::On {
        object: "box1".into(),
        target: "box2".into(),
    }];
    let bowl = vec![GoalClause::InZone {
        object: "box1".into(),
        zone: Zone::Bowl,
    }];
    let pair = |label: &str, x: String, y: String, goals: &Vec<GoalClause>| ParaphrasePair {
        label: label.into(),
        a: x,
        b: y,
        goals: goals.clone(),
    };
    vec![
        pair(
            "the other / another",
            format!("put the {a} on the other cube"),
            format!("put the {a} on another cube"),
            &on,
        ),
        pair(
            "on / on top of",
            format!("put the {a} on the {b}"),
            format!("put the {a} on top of the {b}"),
            &on,
        ),
        pair(
            "move / put",
            format!("move the {a} into the bowl"),
            format!("put the {a} into the bowl"),
            &bowl,
        ),
        pair(
            "in / to the bowl",
            format!("put the {a} in the bowl"),
            format!("put the {a} to the bowl"),
            &bowl,
        ),
    ]
}

fn behavior_for(
    gateway: &GatewayConfig,
    mode: OutputMode,
    label: &str,
    text: &str,
    goals: &[GoalClause],
) -> Result<Option<Behavior>, SessionError> {
    let task = TaskSpec {
        id: format!("sensitivity-{label}"),
        scenario: CORPUS_SCENE,
        instruction: text.to_string(),
        goals: goals.to_vec(),
        ordered: false,
    };
    let cfg = SessionConfig::new(CORPUS_SCENE, gateway.clone())
        .with_mode(mode)
        .with_task(task);
    let mut s = Session::create_with_id(format!("sensitivity-{label}"), cfg)?;
    Ok(s.submit_message(text)?.behavior)
}

pub fn run_sensitivity_corpus(gateway: &GatewayConfig, mode: OutputMode) -> Result<SensitivityReport, SessionError> {
    let mut pairs = Vec::new();
    for p in corpus() {
        let x = behavior_for(gateway, mode, &p.label, &p.a, &p.goals)?;
        let y = behavior_for(gateway, mode, &p.label, &p.b, &p.goals)?;
        pairs.push(PairResult {
            equal: x.is_some() && x == y,
            label: p.label,
            a: p.a,
            b: p.b,
            behavior_a: x,
            behavior_b: y,
        });
    }
    Ok(SensitivityReport {
        gateway: gateway.to_string(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Backend, TranscriptEntry};

    #[test]
    fn oracle_is_paraphrase_blind() {
        let r = run_sensitivity_corpus(&GatewayConfig::oracle(), OutputMode::Sequence).unwrap();
        assert_eq!(r.pairs.len(), 4);
        assert!(r.divergent().is_empty());
    }

    #[test]
    fn replay_with_divergent_answer_is_flagged() {
        // record the oracle, then tamper with the answer to one phrasing
        let mut entries: Vec<TranscriptEntry> = Vec::new();
        for p in corpus() {
            for text in [&p.a, &p.b] {
                let task = TaskSpec {
                    id: format!("sensitivity-{}", p.label),
                    scenario: CORPUS_SCENE,
                    instruction: text.clone(),
                    goals: p.goals.clone(),
                    ordered: false,
                };
                let cfg = SessionConfig::new(CORPUS_SCENE, GatewayConfig::oracle()).with_task(task);
                let mut s = Session::create_with_id(format!("sensitivity-{}", p.label), cfg).unwrap();
                s.submit_message(text).unwrap();
                entries.extend(s.transcript());
            }
        }
        let on_top = corpus()[1].b.clone();
        let idx = 3;
        assert!(entries[idx].response.contains("place_on"), "{on_top}");
        entries[idx].response = entries[idx].response.replace("place_on", "place_in");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let body: String = entries
            .iter()
            .map(|e| serde_json::to_string(e).unwrap() + "\n")
            .collect();
        std::fs::write(&path, body).unwrap();
        let gw = GatewayConfig::new(Backend::Replay { transcript_path: path });
        let r = run_sensitivity_corpus(&gw, OutputMode::Sequence).unwrap();
        assert_eq!(r.divergent(), vec!["on / on top of"]);
    }
}
