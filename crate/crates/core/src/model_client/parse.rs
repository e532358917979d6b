use serde_json::{Map, Value};

/// Removes a surrounding ```` ``` ```` or ```` ```json ```` fence, if the whole
/// (trimmed) reply is one fenced block.
pub fn strip_code_fence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return t;
    };
    match body.find('\n') {
        Some(nl) if body[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => body[nl + 1..].trim(),
        _ => body.trim(),
    }
}

/// Drops a leading `<think>...</think>` reasoning block.
pub fn strip_reasoning(reply: &str) -> &str {
    match reply.rfind("</think>") {
        Some(i) => &reply[i + "</think>".len()..],
        None => reply,
    }
}

/// Parses the reply as exactly one JSON object (after fence stripping).
pub fn strict_json_object(reply: &str) -> Option<Map<String, Value>> {
    match serde_json::from_str::<Value>(strip_code_fence(reply)) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    }
}

/// The last top-level JSON object in the reply. Text before it (reasoning,
/// prose, fences) is ignored.
pub fn last_json_object(reply: &str) -> Option<Map<String, Value>> {
    let reply = strip_reasoning(reply);
    let mut found = None;
    let mut search_from = 0;
    while let Some(rel) = reply[search_from..].find('{') {
        let start = search_from + rel;
        let mut stream = serde_json::Deserializer::from_str(&reply[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(m))) => {
                found = Some(m);
                search_from = start + stream.byte_offset();
            }
            _ => search_from = start + 1,
        }
    }
    found
}
