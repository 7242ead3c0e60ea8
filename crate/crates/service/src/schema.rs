//! Published JSON schemas of every response body.

pub const CREATED: &str = include_str!("../schemas/created.json");
pub const STEP: &str = include_str!("../schemas/step.json");
pub const DONE: &str = include_str!("../schemas/done.json");
pub const SESSION: &str = include_str!("../schemas/session.json");
pub const OBJECT: &str = include_str!("../schemas/object.json");
pub const ERROR: &str = include_str!("../schemas/error.json");

pub const NAMES: [&str; 6] = ["created", "step", "done", "session", "object", "error"];

pub fn by_name(name: &str) -> Option<&'static str> {
    Some(match name.trim_end_matches(".json") {
        "created" => CREATED,
        "step" => STEP,
        "done" => DONE,
        "session" => SESSION,
        "object" => OBJECT,
        "error" => ERROR,
        _ => return None,
    })
}
