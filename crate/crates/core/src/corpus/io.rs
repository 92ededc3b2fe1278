//! Dataset files.
//!
//! Each record is a `#intent<TAB>label` line, zero or more
//! `#userinfo<TAB>type<TAB>content` lines, one `token<TAB>slot_tag` line per
//! token, and exactly one blank line. Files are UTF-8 with LF endings.

use std::fmt::Write as _;
use std::path::Path;

use super::{derive_info_sequence, UserInfoDictionary, UserInfoEntry, Utterance};
use crate::error::{Error, Result};

const INTENT: &str = "#intent";
const USERINFO: &str = "#userinfo";

enum State {
    Idle,
    Header(Utterance),
    Tokens(Utterance),
}

pub fn parse_dataset(text: &str, dictionary: &UserInfoDictionary) -> Result<Vec<Utterance>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let body = text.strip_suffix('\n').ok_or_else(|| Error::Parse {
        line: text.lines().count(),
        message: "file does not end with a newline".into(),
    })?;

    let mut out = Vec::new();
    let mut state = State::Idle;
    let mut last_line = 0;
    for (i, line) in body.split('\n').enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        if line.contains('\r') {
            return Err(err("carriage return in line (LF endings required)".into()));
        }
        let fields: Vec<&str> = line.split('\t').collect();
        state = match state {
            State::Idle => {
                if fields.len() == 2 && fields[0] == INTENT && !fields[1].is_empty() {
                    State::Header(Utterance::new(Vec::<String>::new(), Vec::new(), fields[1]))
                } else if line.is_empty() {
                    return Err(err("unexpected blank line".into()));
                } else {
                    return Err(err(format!("expected {INTENT}<TAB>label")));
                }
            }
            State::Header(mut u) => {
                if fields[0] == USERINFO {
                    if fields.len() != 3 || fields[1].is_empty() || fields[2].is_empty() {
                        return Err(err(format!("expected {USERINFO}<TAB>type<TAB>content")));
                    }
                    if dictionary.index_of(fields[1]).is_none() {
                        return Err(err(format!("unknown info type {:?}", fields[1])));
                    }
                    u.user_info.push(UserInfoEntry::new(fields[1], fields[2]));
                    State::Header(u)
                } else if line.is_empty() {
                    return Err(Error::InvalidIob {
                        utterance: out.len(),
                        position: 0,
                        message: "utterance has no tokens".into(),
                    });
                } else {
                    push_token(&mut u, &fields).map_err(err)?;
                    State::Tokens(u)
                }
            }
            State::Tokens(mut u) => {
                if line.is_empty() {
                    u.validate(out.len())?;
                    u.info_tags = Some(derive_info_sequence(&u, dictionary));
                    out.push(u);
                    State::Idle
                } else {
                    push_token(&mut u, &fields).map_err(err)?;
                    State::Tokens(u)
                }
            }
        };
    }
    if !matches!(state, State::Idle) {
        return Err(Error::Parse {
            line: last_line,
            message: "record is not terminated by a blank line".into(),
        });
    }
    Ok(out)
}

fn push_token(u: &mut Utterance, fields: &[&str]) -> std::result::Result<(), String> {
    if fields.len() != 2 {
        return Err(format!(
            "expected token<TAB>slot_tag, found {} fields",
            fields.len()
        ));
    }
    if fields[0].is_empty() || fields[1].is_empty() || fields[0].contains(' ') {
        return Err("empty token or tag".into());
    }
    if fields[0] == INTENT || fields[0] == USERINFO {
        return Err(format!("header {} inside token block", fields[0]));
    }
    u.tokens.push(fields[0].to_string());
    u.slot_tags.push(fields[1].to_string());
    Ok(())
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    dictionary: &UserInfoDictionary,
) -> Result<Vec<Utterance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, dictionary)
}

/// Canonical serialization; info tags are not written (they are derived).
pub fn format_dataset(data: &[Utterance]) -> String {
    let mut s = String::new();
    for u in data {
        let _ = writeln!(s, "{INTENT}\t{}", u.intent);
        for e in &u.user_info {
            let _ = writeln!(s, "{USERINFO}\t{}\t{}", e.info_type, e.content);
        }
        for (tok, tag) in u.tokens.iter().zip(&u.slot_tags) {
            let _ = writeln!(s, "{tok}\t{tag}");
        }
        s.push('\n');
    }
    s
}

pub fn save_dataset(path: impl AsRef<Path>, data: &[Utterance]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_dataset(data)).map_err(|e| Error::io(path, e))
}
