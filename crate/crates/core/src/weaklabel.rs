//! Interaction-derived labeling functions and the labeling-quality audit.
//!
//! * request information: `b` is positive when some reply to `b` carries a
//!   non-trivial attachment;
//! * schedule meeting: `a` is positive when a later confirmation shares its
//!   normalized subject; a confirmation is a response whose subject names a
//!   calendar entry;
//! * promise action: `a` is positive when it replies to a flagged message.
//!
//! Every message receives exactly one assignment per intent; messages the
//! rule does not fire on are negatives with provenance `discarded`.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Attachment, AttachmentKind, Corpus, GoldLabels, Intent};
use crate::error::{Error, Result};

pub const RULE_REPLY_WITH_ATTACHMENT: &str = "reply_with_attachment";
pub const RULE_CONFIRMED_SCHEDULE: &str = "confirmed_schedule";
pub const RULE_URGENCY_REPLY: &str = "urgency_reply";
pub const DISCARDED: &str = "discarded";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn is_positive(self) -> bool {
        self == Polarity::Positive
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakLabelAssignment {
    pub message_id: String,
    pub intent: Intent,
    pub label: Polarity,
    pub provenance: String,
}

/// Signatures, contact cards and images carry no requested content.
pub fn is_trivial_attachment(att: &Attachment) -> bool {
    matches!(
        att.kind,
        AttachmentKind::Image | AttachmentKind::Signature | AttachmentKind::Contact
    )
}

/// Case-folds, trims and strips any run of leading `re:` / `fw:` / `fwd:` prefixes.
pub fn normalize_subject(subject: &str) -> String {
    let mut s = subject.trim().to_lowercase();
    loop {
        let stripped = ["re:", "fwd:", "fw:"]
            .iter()
            .find_map(|p| s.strip_prefix(p).map(|rest| rest.trim_start().to_string()));
        match stripped {
            Some(rest) => s = rest,
            None => break,
        }
    }
    s.trim().to_string()
}

fn assignments(
    corpus: &Corpus,
    intent: Intent,
    rule: &str,
    positive: impl Fn(usize) -> bool,
) -> Vec<WeakLabelAssignment> {
    corpus
        .messages()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let hit = positive(i);
            WeakLabelAssignment {
                message_id: m.id.clone(),
                intent,
                label: if hit { Polarity::Positive } else { Polarity::Negative },
                provenance: if hit { rule } else { DISCARDED }.to_string(),
            }
        })
        .collect()
}

/// reply_with_attachment
pub fn label_request_information(corpus: &Corpus) -> Vec<WeakLabelAssignment> {
    let msgs = corpus.messages();
    assignments(corpus, Intent::RequestInformation, RULE_REPLY_WITH_ATTACHMENT, |b| {
        corpus
            .replies_to(b)
            .iter()
            .any(|&a| msgs[a].attachments.iter().any(|att| !is_trivial_attachment(att)))
    })
}

/// A response (reply link or `re:` prefix) whose normalized subject names a calendar entry.
fn is_confirmation(corpus: &Corpus, i: usize, normalized: &str, scheduled: &HashSet<String>) -> bool {
    let m = &corpus.messages()[i];
    let is_response = m.in_reply_to.is_some() || m.subject.trim_start().to_lowercase().starts_with("re:");
    is_response && scheduled.contains(normalized)
}

/// confirmed_schedule
pub fn label_schedule_meeting(corpus: &Corpus) -> Vec<WeakLabelAssignment> {
    let scheduled: HashSet<String> = corpus
        .calendar()
        .iter()
        .map(|e| normalize_subject(&e.subject))
        .collect();
    let normalized: Vec<String> = corpus
        .messages()
        .iter()
        .map(|m| normalize_subject(&m.subject))
        .collect();
    // Latest confirmation per subject; anything strictly earlier precedes a confirmation.
    let mut latest: HashMap<&str, i64> = HashMap::new();
    for (i, (m, subj)) in corpus.messages().iter().zip(&normalized).enumerate() {
        if is_confirmation(corpus, i, subj, &scheduled) {
            let e = latest.entry(subj.as_str()).or_insert(m.timestamp);
            *e = (*e).max(m.timestamp);
        }
    }
    assignments(corpus, Intent::ScheduleMeeting, RULE_CONFIRMED_SCHEDULE, |a| {
        latest
            .get(normalized[a].as_str())
            .is_some_and(|&t| corpus.messages()[a].timestamp < t)
    })
}

/// urgency_reply
pub fn label_promise_action(corpus: &Corpus) -> Vec<WeakLabelAssignment> {
    let msgs = corpus.messages();
    assignments(corpus, Intent::PromiseAction, RULE_URGENCY_REPLY, |a| {
        msgs[a]
            .in_reply_to
            .as_deref()
            .and_then(|b| corpus.message(b))
            .is_some_and(|b| b.follow_up_flag)
    })
}

pub fn label_intent(corpus: &Corpus, intent: Intent) -> Vec<WeakLabelAssignment> {
    match intent {
        Intent::RequestInformation => label_request_information(corpus),
        Intent::ScheduleMeeting => label_schedule_meeting(corpus),
        Intent::PromiseAction => label_promise_action(corpus),
    }
}

/// Message id → positive, for one intent's assignments.
pub fn as_label_map(assignments: &[WeakLabelAssignment]) -> BTreeMap<String, bool> {
    assignments
        .iter()
        .map(|a| (a.message_id.clone(), a.label.is_positive()))
        .collect()
}

/// Audit outcome for one intent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub intent: Intent,
    /// `confusion[w][g]`: weak label `w`, gold label `g`; index 1 is positive.
    pub confusion: [[u64; 2]; 2],
    pub accuracy: f64,
}

impl QualityReport {
    pub fn true_positive(&self) -> u64 {
        self.confusion[1][1]
    }

    pub fn false_positive(&self) -> u64 {
        self.confusion[1][0]
    }

    pub fn false_negative(&self) -> u64 {
        self.confusion[0][1]
    }

    pub fn true_negative(&self) -> u64 {
        self.confusion[0][0]
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

/// Compares assignments against gold. Every assignment must have gold coverage.
pub fn evaluate_labeling(assignments: &[WeakLabelAssignment], gold: &GoldLabels) -> Result<QualityReport> {
    let intent = assignments
        .first()
        .map(|a| a.intent)
        .ok_or_else(|| Error::Input("no assignments to evaluate".into()))?;
    let mut confusion = [[0u64; 2]; 2];
    for a in assignments {
        if a.intent != intent {
            return Err(Error::Input(format!(
                "mixed intents in audit: {} and {}",
                intent, a.intent
            )));
        }
        let g = gold
            .get(&(a.message_id.clone(), a.intent))
            .ok_or_else(|| Error::Coverage {
                message_id: a.message_id.clone(),
                intent: a.intent.to_string(),
            })?;
        confusion[usize::from(a.label.is_positive())][usize::from(*g)] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    Ok(QualityReport {
        intent,
        confusion,
        accuracy: (confusion[1][1] + confusion[0][0]) as f64 / total as f64,
    })
}

/// Balanced audit sample: up to `per_class` weak positives and as many weak
/// negatives, drawn uniformly from messages with gold coverage.
pub fn audit_sample(
    assignments: &[WeakLabelAssignment],
    gold: &GoldLabels,
    per_class: usize,
    seed: u64,
) -> Vec<WeakLabelAssignment> {
    let covered = |a: &&WeakLabelAssignment| gold.contains_key(&(a.message_id.clone(), a.intent));
    let mut pos: Vec<&WeakLabelAssignment> = assignments
        .iter()
        .filter(covered)
        .filter(|a| a.label.is_positive())
        .collect();
    let mut neg: Vec<&WeakLabelAssignment> = assignments
        .iter()
        .filter(covered)
        .filter(|a| !a.label.is_positive())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let k = per_class.min(pos.len()).min(neg.len());
    pos.into_iter()
        .take(k)
        .chain(neg.into_iter().take(k))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CalendarEntry, EmailMessage};

    fn msg(id: &str, thread: &str, ts: i64, reply: Option<&str>, subject: &str) -> EmailMessage {
        EmailMessage {
            id: id.into(),
            thread_id: thread.into(),
            sender: "s@x".into(),
            recipients: vec!["r@x".into()],
            subject: subject.into(),
            body: String::new(),
            timestamp: ts,
            in_reply_to: reply.map(Into::into),
            attachments: vec![],
            follow_up_flag: false,
        }
    }

    fn att(kind: AttachmentKind) -> Attachment {
        Attachment {
            filename: "f".into(),
            kind,
        }
    }

    fn label_of(v: &[WeakLabelAssignment], id: &str) -> Polarity {
        v.iter().find(|a| a.message_id == id).unwrap().label
    }

    #[test]
    fn trivial_attachment_kinds() {
        assert!(is_trivial_attachment(&att(AttachmentKind::Signature)));
        assert!(is_trivial_attachment(&att(AttachmentKind::Image)));
        assert!(is_trivial_attachment(&att(AttachmentKind::Contact)));
        assert!(!is_trivial_attachment(&att(AttachmentKind::Document)));
        assert!(!is_trivial_attachment(&att(AttachmentKind::Other)));
    }

    #[test]
    fn subject_normalization_strips_reply_prefixes() {
        assert_eq!(normalize_subject("  RE: Fwd: re:Sync on Accounts "), "sync on accounts");
        assert_eq!(normalize_subject("FW: budget"), "budget");
        assert_eq!(normalize_subject("return of re:"), "return of re:");
    }

    #[test]
    fn request_information_reply_with_document() {
        let mut b = msg("b", "t", 1, None, "slides");
        b.body = "Please forward me the final version for the slides".into();
        let mut a = msg("a", "t", 2, Some("b"), "RE: slides");
        a.attachments.push(att(AttachmentKind::Document));
        let corpus = Corpus::new(vec![b, a], vec![], None).unwrap();
        let v = label_request_information(&corpus);
        assert_eq!(label_of(&v, "b"), Polarity::Positive);
        assert_eq!(label_of(&v, "a"), Polarity::Negative);
        assert_eq!(v[0].provenance, RULE_REPLY_WITH_ATTACHMENT);
        assert_eq!(v[1].provenance, DISCARDED);
    }

    #[test]
    fn request_information_ignores_trivial_attachments() {
        let b = msg("b", "t", 1, None, "x");
        let mut a = msg("a", "t", 2, Some("b"), "RE: x");
        a.attachments.push(att(AttachmentKind::Signature));
        a.attachments.push(att(AttachmentKind::Image));
        let corpus = Corpus::new(vec![b, a], vec![], None).unwrap();
        assert_eq!(label_of(&label_request_information(&corpus), "b"), Polarity::Negative);
    }

    #[test]
    fn lone_message_is_negative() {
        let corpus = Corpus::new(vec![msg("b", "t", 1, None, "x")], vec![], None).unwrap();
        for intent in Intent::ALL {
            assert_eq!(label_intent(&corpus, intent)[0].label, Polarity::Negative);
        }
    }

    fn entry(subject: &str) -> CalendarEntry {
        CalendarEntry {
            subject: subject.into(),
            start_time: 100,
            location: "room".into(),
            attendees: vec!["r@x".into()],
            organizer: "s@x".into(),
        }
    }

    #[test]
    fn schedule_meeting_earlier_message_takes_label() {
        let a = msg("a", "t1", 1, None, "sync on accounts");
        let b = msg("b", "t2", 5, None, "RE: sync on accounts");
        let corpus = Corpus::new(vec![a, b], vec![entry("Sync on accounts")], None).unwrap();
        let v = label_schedule_meeting(&corpus);
        assert_eq!(label_of(&v, "a"), Polarity::Positive);
        assert_eq!(label_of(&v, "b"), Polarity::Negative);
    }

    #[test]
    fn schedule_meeting_requires_temporal_order() {
        let a = msg("a", "t1", 9, None, "sync on accounts");
        let b = msg("b", "t2", 5, None, "RE: sync on accounts");
        let corpus = Corpus::new(vec![a, b], vec![entry("sync on accounts")], None).unwrap();
        assert!(label_schedule_meeting(&corpus)
            .iter()
            .all(|x| x.label == Polarity::Negative));
    }

    #[test]
    fn schedule_meeting_needs_calendar_subject() {
        let a = msg("a", "t1", 1, None, "lunch");
        let b = msg("b", "t2", 5, None, "RE: lunch");
        let corpus = Corpus::new(vec![a, b], vec![entry("sync")], None).unwrap();
        assert!(label_schedule_meeting(&corpus)
            .iter()
            .all(|x| x.label == Polarity::Negative));
    }

    #[test]
    fn promise_action_reply_to_flagged() {
        let mut b = msg("b", "t", 1, None, "present next week?");
        b.follow_up_flag = true;
        let mut a = msg("a", "t", 2, Some("b"), "RE: present next week?");
        a.body = "I can do this next week".into();
        let corpus = Corpus::new(vec![b.clone(), a], vec![], None).unwrap();
        let v = label_promise_action(&corpus);
        assert_eq!(label_of(&v, "a"), Polarity::Positive);
        assert_eq!(label_of(&v, "b"), Polarity::Negative);

        let alone = Corpus::new(vec![b], vec![], None).unwrap();
        assert_eq!(label_promise_action(&alone)[0].label, Polarity::Negative);
    }

    fn assignment(id: &str, positive: bool) -> WeakLabelAssignment {
        WeakLabelAssignment {
            message_id: id.into(),
            intent: Intent::RequestInformation,
            label: if positive {
                Polarity::Positive
            } else {
                Polarity::Negative
            },
            provenance: String::new(),
        }
    }

    #[test]
    fn audit_accuracy_from_precision_and_npv_counts() {
        // 100 weak positives (36 truly positive), 100 weak negatives (99 truly negative)
        let mut assignments = Vec::new();
        let mut gold = GoldLabels::new();
        for i in 0..100 {
            let id = format!("p{i}");
            assignments.push(assignment(&id, true));
            gold.insert((id, Intent::RequestInformation), i < 36);
        }
        for i in 0..100 {
            let id = format!("n{i}");
            assignments.push(assignment(&id, false));
            gold.insert((id, Intent::RequestInformation), i >= 99);
        }
        let r = evaluate_labeling(&assignments, &gold).unwrap();
        assert_eq!(r.confusion, [[99, 1], [64, 36]]);
        assert!((r.accuracy - 0.675).abs() < 1e-12);
    }

    #[test]
    fn perfect_labels_have_no_off_diagonal() {
        let mut gold = GoldLabels::new();
        let assignments: Vec<_> = (0..20)
            .map(|i| {
                let id = format!("m{i}");
                gold.insert((id.clone(), Intent::RequestInformation), i % 3 == 0);
                assignment(&id, i % 3 == 0)
            })
            .collect();
        let r = evaluate_labeling(&assignments, &gold).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.false_positive() + r.false_negative(), 0);
    }

    #[test]
    fn hand_tally_of_ten_cases() {
        // (weak, gold)
        let cases = [
            (true, true),
            (true, false),
            (true, true),
            (false, false),
            (false, true),
            (false, false),
            (true, false),
            (false, false),
            (true, true),
            (false, false),
        ];
        let mut gold = GoldLabels::new();
        let assignments: Vec<_> = cases
            .iter()
            .enumerate()
            .map(|(i, &(w, g))| {
                let id = format!("m{i}");
                gold.insert((id.clone(), Intent::RequestInformation), g);
                assignment(&id, w)
            })
            .collect();
        let r = evaluate_labeling(&assignments, &gold).unwrap();
        assert_eq!((r.true_positive(), r.false_positive()), (3, 2));
        assert_eq!((r.false_negative(), r.true_negative()), (1, 4));
        assert!((r.accuracy - 0.7).abs() < 1e-12);
    }

    #[test]
    fn missing_gold_is_a_coverage_error() {
        let gold = GoldLabels::new();
        let err = evaluate_labeling(&[assignment("m", true)], &gold).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }
}
