//! IOB tag helpers shared by the corpus, distillation and scoring code.

use std::fmt;

pub const OUTSIDE: &str = "O";

/// One parsed IOB tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    pub fn parse(tag: &'a str) -> Option<Tag<'a>> {
        if tag == OUTSIDE {
            return Some(Tag::Outside);
        }
        let (prefix, label) = tag.split_once('-')?;
        if label.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(Tag::Begin(label)),
            "I" => Some(Tag::Inside(label)),
            _ => None,
        }
    }

    pub fn label(&self) -> Option<&'a str> {
        match *self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }
}

/// A maximal `B-X (I-X)*` run covering tokens `start..end`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(label: impl Into<String>, start: usize, end: usize) -> Self {
        Span {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.label, self.start, self.end)
    }
}

/// Why a sequence is not valid IOB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IobViolation {
    pub position: usize,
    pub message: String,
}

/// Checks that every tag parses and every `I-X` continues a run of `X`.
pub fn validate<S: AsRef<str>>(tags: &[S]) -> Result<(), IobViolation> {
    let mut open: Option<&str> = None;
    for (i, tag) in tags.iter().enumerate() {
        let raw = tag.as_ref();
        let parsed = Tag::parse(raw).ok_or_else(|| IobViolation {
            position: i,
            message: format!("malformed tag {raw:?}"),
        })?;
        match parsed {
            Tag::Outside => open = None,
            Tag::Begin(l) => open = Some(l),
            Tag::Inside(l) => {
                if open != Some(l) {
                    return Err(IobViolation {
                        position: i,
                        message: format!("{raw} does not continue a {l} span"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Rewrites every `I-X` that does not continue an `X` run as `B-X`.
///
/// Malformed tags become `O`. Returns the repaired tags and the number of
/// positions that changed.
pub fn repair<S: AsRef<str>>(tags: &[S]) -> (Vec<String>, usize) {
    let mut out = Vec::with_capacity(tags.len());
    let mut fixes = 0;
    let mut open: Option<String> = None;
    for tag in tags {
        let raw = tag.as_ref();
        match Tag::parse(raw) {
            None => {
                fixes += 1;
                open = None;
                out.push(OUTSIDE.to_string());
            }
            Some(Tag::Outside) => {
                open = None;
                out.push(raw.to_string());
            }
            Some(Tag::Begin(l)) => {
                open = Some(l.to_string());
                out.push(raw.to_string());
            }
            Some(Tag::Inside(l)) => {
                if open.as_deref() != Some(l) {
                    fixes += 1;
                    out.push(format!("B-{l}"));
                } else {
                    out.push(raw.to_string());
                }
                open = Some(l.to_string());
            }
        }
    }
    (out, fixes)
}

/// Spans of a valid IOB sequence, in order.
pub fn spans<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Span>, IobViolation> {
    validate(tags)?;
    let mut out: Vec<Span> = Vec::new();
    for (i, tag) in tags.iter().enumerate() {
        match Tag::parse(tag.as_ref()).expect("validated") {
            Tag::Outside => {}
            Tag::Begin(l) => out.push(Span::new(l, i, i + 1)),
            Tag::Inside(_) => out.last_mut().expect("validated").end = i + 1,
        }
    }
    Ok(out)
}

/// Writes spans back out as IOB tags over `len` tokens.
pub fn expand(spans: &[Span], len: usize) -> Vec<String> {
    let mut tags = vec![OUTSIDE.to_string(); len];
    for s in spans {
        for t in s.start..s.end {
            let prefix = if t == s.start { "B" } else { "I" };
            tags[t] = format!("{prefix}-{}", s.label);
        }
    }
    tags
}
