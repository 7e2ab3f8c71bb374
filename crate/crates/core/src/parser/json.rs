use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::ParseError;
use crate::behavior::{Behavior, FsmGraph, FsmState, Step, TerminalKind};

fn parse_json(payload: &str) -> Result<Value, ParseError> {
    serde_json::from_str(payload).map_err(|e| ParseError::schema("/", format!("invalid JSON: {e}")))
}

pub(super) fn has_fsm_key(payload: &str) -> bool {
    matches!(serde_json::from_str::<Value>(payload), Ok(Value::Object(m)) if m.contains_key("fsm"))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| ParseError::schema(path, "expected an object"))
}

fn string_field(obj: &Map<String, Value>, key: &str, path: &str, required: bool) -> Result<String, ParseError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        None | Some(Value::Null) if !required => Ok(String::new()),
        None => Err(ParseError::schema(format!("{path}/{key}"), "missing")),
        Some(_) => Err(ParseError::schema(format!("{path}/{key}"), "expected a string")),
    }
}

/// `{"actions":[{"name":"pick_up","input":"blue cube"}, ...]}`; `input` may be omitted.
pub fn parse_sequence(payload: &str) -> Result<Behavior, ParseError> {
    let value = parse_json(payload)?;
    let root = object(&value, "/")?;
    let actions = root
        .get("actions")
        .ok_or_else(|| ParseError::schema("/actions", "missing"))?
        .as_array()
        .ok_or_else(|| ParseError::schema("/actions", "expected an array"))?;
    let steps = actions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let path = format!("/actions/{i}");
            let obj = object(a, &path)?;
            Ok(Step::new(
                string_field(obj, "name", &path, true)?,
                string_field(obj, "input", &path, false)?,
            ))
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    Ok(Behavior::sequence(steps))
}

/// `{"fsm":{"initial":"s0","states":{"s0":{"action":..,"input":..,"on_success":..,"on_failure":..}},
/// "terminals":{"done":"success","failed":"failure"}}}`
pub fn parse_fsm(payload: &str) -> Result<Behavior, ParseError> {
    let value = parse_json(payload)?;
    let root = object(&value, "/")?;
    let fsm = object(root.get("fsm").ok_or_else(|| ParseError::schema("/fsm", "missing"))?, "/fsm")?;
    let initial = string_field(fsm, "initial", "/fsm", true)?;

    let mut states = BTreeMap::new();
    let raw_states = fsm.get("states").ok_or_else(|| ParseError::schema("/fsm/states", "missing"))?;
    for (id, s) in object(raw_states, "/fsm/states")? {
        let path = format!("/fsm/states/{id}");
        let obj = object(s, &path)?;
        states.insert(
            id.clone(),
            FsmState {
                action: string_field(obj, "action", &path, true)?,
                input: string_field(obj, "input", &path, false)?,
                on_success: string_field(obj, "on_success", &path, true)?,
                on_failure: string_field(obj, "on_failure", &path, true)?,
            },
        );
    }

    let mut terminals = BTreeMap::new();
    let raw_terminals = fsm
        .get("terminals")
        .ok_or_else(|| ParseError::schema("/fsm/terminals", "missing"))?;
    for (id, t) in object(raw_terminals, "/fsm/terminals")? {
        let kind = match t.as_str() {
            Some("success") => TerminalKind::Success,
            Some("failure") => TerminalKind::Failure,
            _ => {
                return Err(ParseError::schema(
                    format!("/fsm/terminals/{id}"),
                    "expected \"success\" or \"failure\"",
                ))
            }
        };
        terminals.insert(id.clone(), kind);
    }

    let graph = FsmGraph {
        initial,
        states,
        terminals,
    };
    graph.validate()?;
    Ok(Behavior::fsm(graph))
}
