//! Brute-force pair scans of the labeling rules.

use std::collections::BTreeSet;

use mailintent::corpus::{AttachmentKind, Corpus};

fn normalize(s: &str) -> String {
    let mut s = s.trim().to_lowercase();
    'outer: loop {
        for p in ["re:", "fw:", "fwd:"] {
            if s.starts_with(p) {
                s = s[p.len()..].trim().to_string();
                continue 'outer;
            }
        }
        return s;
    }
}

/// Message ids with a reply carrying a non-trivial attachment.
pub fn request_information(c: &Corpus) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for b in c.messages() {
        for a in c.messages() {
            let nontrivial = a.attachments.iter().any(|t| {
                !matches!(
                    t.kind,
                    AttachmentKind::Image | AttachmentKind::Signature | AttachmentKind::Contact
                )
            });
            if a.in_reply_to.as_deref() == Some(b.id.as_str()) && nontrivial {
                out.insert(b.id.clone());
            }
        }
    }
    out
}

/// Earlier same-subject messages of a calendar-linked response.
pub fn schedule_meeting(c: &Corpus) -> BTreeSet<String> {
    let cal: Vec<String> = c.calendar().iter().map(|e| normalize(&e.subject)).collect();
    let mut out = BTreeSet::new();
    for a in c.messages() {
        for b in c.messages() {
            let is_response = b.in_reply_to.is_some() || b.subject.trim().to_lowercase().starts_with("re:");
            let sb = normalize(&b.subject);
            if is_response && cal.contains(&sb) && normalize(&a.subject) == sb && a.timestamp < b.timestamp {
                out.insert(a.id.clone());
            }
        }
    }
    out
}

/// Replies to a flagged message.
pub fn promise_action(c: &Corpus) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in c.messages() {
        for b in c.messages() {
            if a.in_reply_to.as_deref() == Some(b.id.as_str()) && b.follow_up_flag {
                out.insert(a.id.clone());
            }
        }
    }
    out
}
