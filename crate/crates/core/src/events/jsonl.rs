//! JSONL persistence: a versioned header line followed by one event per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::level::{SpriteId, LEVEL_HEIGHT, SPRITE_COUNT};

use super::{Actor, EventKind, LogError, Ranking, SessionEvent, SessionLog, Task};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    v: u32,
    session_id: String,
    participant_id: String,
    agent_name: String,
    task: Task,
    level_width: usize,
}

#[derive(Serialize, Deserialize)]
struct RawPlace {
    x: usize,
    y: usize,
    sprite: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDelete {
    x: usize,
    y: usize,
    deleted_actor: Actor,
}

#[derive(Serialize, Deserialize)]
struct RawEvent {
    timestamp_ms: u64,
    actor: Actor,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    place: Option<RawPlace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delete: Option<RawDelete>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera_x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<Ranking>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

impl From<&SessionEvent> for RawEvent {
    fn from(e: &SessionEvent) -> Self {
        let mut raw = RawEvent {
            timestamp_ms: e.timestamp_ms,
            actor: e.actor,
            kind: e.kind.name().to_string(),
            place: None,
            delete: None,
            camera_x: None,
            rank: None,
            extra: BTreeMap::new(),
        };
        match &e.kind {
            EventKind::Place { x, y, sprite } => {
                raw.place = Some(RawPlace { x: *x, y: *y, sprite: sprite.index() })
            }
            EventKind::Delete { x, y, deleted_actor } => {
                raw.delete = Some(RawDelete { x: *x, y: *y, deleted_actor: *deleted_actor })
            }
            EventKind::EndTurn { camera_x } => raw.camera_x = *camera_x,
            EventKind::Rank(r) => raw.rank = Some(*r),
            EventKind::SessionStart | EventKind::SessionEnd | EventKind::Run => {}
        }
        raw
    }
}

fn event_from_raw(raw: RawEvent, width: usize) -> Result<SessionEvent, String> {
    let check_cell = |x: usize, y: usize| {
        if x >= width || y >= LEVEL_HEIGHT {
            Err(format!("cell ({x},{y}) outside a {width}x{LEVEL_HEIGHT} level"))
        } else {
            Ok(())
        }
    };
    let kind = match raw.kind.as_str() {
        "session_start" => EventKind::SessionStart,
        "session_end" => EventKind::SessionEnd,
        "run" => EventKind::Run,
        "end_turn" => EventKind::EndTurn { camera_x: raw.camera_x },
        "place" => {
            let p = raw.place.ok_or("place event without place payload")?;
            check_cell(p.x, p.y)?;
            if p.sprite >= SPRITE_COUNT {
                return Err(format!("sprite {} outside the palette", p.sprite));
            }
            EventKind::Place { x: p.x, y: p.y, sprite: SpriteId(p.sprite as u8) }
        }
        "delete" => {
            let d = raw.delete.ok_or("delete event without delete payload")?;
            check_cell(d.x, d.y)?;
            EventKind::Delete { x: d.x, y: d.y, deleted_actor: d.deleted_actor }
        }
        "rank" => EventKind::Rank(raw.rank.ok_or("rank event without rank payload")?),
        other => return Err(format!("unknown event kind {other:?}")),
    };
    Ok(SessionEvent { timestamp_ms: raw.timestamp_ms, actor: raw.actor, kind, extra: raw.extra })
}

/// Header line of a log file, without the trailing newline.
pub fn header_line(log: &SessionLog) -> String {
    let header = Header {
        v: LOG_SCHEMA_VERSION,
        session_id: log.session_id.clone(),
        participant_id: log.participant_id.clone(),
        agent_name: log.agent_name.clone(),
        task: log.task,
        level_width: log.level_width,
    };
    serde_json::to_string(&header).expect("header serializes")
}

/// One event as a compact JSON line, without the trailing newline.
pub fn event_line(event: &SessionEvent) -> String {
    serde_json::to_string(&RawEvent::from(event)).expect("event serializes")
}

/// Canonical serialization: header line then one compact JSON object per event.
pub fn to_jsonl_string(log: &SessionLog) -> String {
    let mut out = header_line(log);
    out.push('\n');
    for e in &log.events {
        out.push_str(&event_line(e));
        out.push('\n');
    }
    out
}

fn parse_lines(text: &str, lenient: bool) -> Result<(SessionLog, usize), LogError> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty()).collect();
    let (first_no, first) = *lines.first().ok_or(LogError::Parse { line: 1, message: "empty log".into() })?;
    let header: Header = serde_json::from_str(first)
        .map_err(|e| LogError::Parse { line: first_no, message: format!("bad header: {e}") })?;
    if header.v != LOG_SCHEMA_VERSION {
        return Err(LogError::Parse {
            line: first_no,
            message: format!("unsupported schema version {}", header.v),
        });
    }
    let mut log = SessionLog::new(
        header.session_id,
        header.participant_id,
        header.agent_name,
        header.task,
        header.level_width,
    );
    let parsed: Vec<(usize, Result<SessionEvent, String>)> = lines[1..]
        .iter()
        .map(|&(no, l)| {
            let ev = serde_json::from_str::<RawEvent>(l)
                .map_err(|e| e.to_string())
                .and_then(|raw| event_from_raw(raw, log.level_width));
            (no, ev)
        })
        .collect();
    let mut skipped = 0;
    for (k, (no, ev)) in parsed.iter().enumerate() {
        match ev {
            Ok(e) => log.events.push(e.clone()),
            Err(msg) => {
                let trailing = parsed[k..].iter().all(|(_, r)| r.is_err());
                if lenient && trailing {
                    skipped = parsed.len() - k;
                    ::log::warn!(
                        "session {}: skipping {skipped} unparseable trailing line(s) from line {no}: {msg}",
                        log.session_id
                    );
                    break;
                }
                return Err(LogError::Parse { line: *no, message: msg.clone() });
            }
        }
    }
    log.validate()?;
    Ok((log, skipped))
}

/// Strict parse: any malformed line is an error.
pub fn parse_jsonl(text: &str) -> Result<SessionLog, LogError> {
    parse_lines(text, false).map(|(log, _)| log)
}

/// Like [`parse_jsonl`] but drops unparseable lines at the end of the file,
/// returning how many were skipped. Such logs usually lack `session_end` and
/// report `is_complete() == false`.
pub fn parse_jsonl_lenient(text: &str) -> Result<(SessionLog, usize), LogError> {
    parse_lines(text, true)
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<SessionLog, LogError> {
    parse_jsonl(&fs::read_to_string(path)?)
}

pub fn read_jsonl_lenient(path: impl AsRef<Path>) -> Result<(SessionLog, usize), LogError> {
    parse_jsonl_lenient(&fs::read_to_string(path)?)
}

pub fn write_jsonl(log: &SessionLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    fs::write(path, to_jsonl_string(log))?;
    Ok(())
}

/// `{participant_id}_{session_id}.jsonl`
pub fn log_file_name(participant_id: &str, session_id: &str) -> String {
    format!("{participant_id}_{session_id}.jsonl")
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::LogBuilder;
    use super::super::segment_turns;
    use super::*;

    const SIX_EVENTS: &str = r#"{"v":1,"session_id":"a","participant_id":"7","agent_name":"markov","task":"above_ground","level_width":40}
{"timestamp_ms":0,"actor":"human","kind":"session_start"}
{"timestamp_ms":1200,"actor":"human","kind":"place","place":{"x":3,"y":14,"sprite":0}}
{"timestamp_ms":2500,"actor":"human","kind":"end_turn","camera_x":20}
{"timestamp_ms":2600,"actor":"ai","kind":"place","place":{"x":4,"y":14,"sprite":0}}
{"timestamp_ms":9000,"actor":"human","kind":"session_end"}
{"timestamp_ms":9500,"actor":"human","kind":"rank","rank":{"reuse_rank":1,"fun":2}}
"#;

    #[test]
    fn hand_authored_file_parses_to_one_turn() {
        let log = parse_jsonl(SIX_EVENTS).unwrap();
        assert_eq!(log.participant_id, "7");
        assert_eq!(log.events.len(), 6);
        let turns = segment_turns(&log).unwrap();
        assert_eq!(turns.len(), 1);
        assert_eq!(turns[0].camera_x, Some(20));
        assert_eq!(turns[0].ai_additions.len(), 1);
        assert_eq!(log.ranking().unwrap().fun, Some(2));
    }

    #[test]
    fn canonical_text_round_trips_byte_for_byte() {
        assert_eq!(to_jsonl_string(&parse_jsonl(SIX_EVENTS).unwrap()), SIX_EVENTS);
        let log = LogBuilder::new(12).human_place(0, 14, 0).end_turn().ai_place(1, 3, 17).end().build();
        assert_eq!(parse_jsonl(&to_jsonl_string(&log)).unwrap(), log);
    }

    #[test]
    fn unknown_fields_are_kept_on_read_and_dropped_on_write() {
        let text = SIX_EVENTS.replace(
            r#""kind":"session_start"}"#,
            r#""kind":"session_start","client":"web-1.2"}"#,
        );
        let log = parse_jsonl(&text).unwrap();
        assert_eq!(log.events[0].extra.get("client"), Some(&Value::from("web-1.2")));
        assert_eq!(to_jsonl_string(&log), SIX_EVENTS);
    }

    #[test]
    fn truncated_line_reports_line_number() {
        let mut text = SIX_EVENTS.to_string();
        text.truncate(text.len() - 20);
        match parse_jsonl(&text) {
            Err(LogError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn lenient_read_skips_trailing_garbage_only() {
        let cut = SIX_EVENTS.lines().take(5).collect::<Vec<_>>().join("\n") + "\n{\"timestamp_ms\":90";
        let (log, skipped) = parse_jsonl_lenient(&cut).unwrap();
        assert_eq!(skipped, 1);
        assert!(!log.is_complete());
        let mut lines: Vec<&str> = SIX_EVENTS.lines().collect();
        lines.insert(3, "not json");
        assert!(parse_jsonl_lenient(&lines.join("\n")).is_err());
    }

    #[test]
    fn invariant_violation_is_validation_error() {
        let text = SIX_EVENTS.replace(r#""x":4,"y":14"#, r#""x":3,"y":14"#);
        assert!(matches!(parse_jsonl(&text), Err(LogError::Replay { index: 3, .. })));
        let text = SIX_EVENTS.replace("\"sprite\":0}}\n{\"timestamp_ms\":2500", "\"sprite\":40}}\n{\"timestamp_ms\":2500");
        assert!(matches!(parse_jsonl(&text), Err(LogError::Parse { line: 3, .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let log = parse_jsonl(SIX_EVENTS).unwrap();
        let path = dir.path().join(log_file_name(&log.participant_id, &log.session_id));
        write_jsonl(&log, &path).unwrap();
        assert!(path.ends_with("7_a.jsonl"));
        assert_eq!(read_jsonl(&path).unwrap(), log);
    }
}
