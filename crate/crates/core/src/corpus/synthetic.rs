//! Seeded synthetic mail corpora with planted interaction signals.
//!
//! Every thread has a root message (gold RI and SM labels), a reply (gold PA
//! label) and, when the schedule signal fires, a calendar entry plus a
//! separate confirmation message with a matching subject. Bodies are
//! background tokens mixed with intent phrases (marker word followed by a
//! topic word); the interaction signals are drawn from the gold label with
//! the configured false-positive and false-negative rates, so the labeling
//! functions reproduce a target precision and negative predictive value.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Attachment, AttachmentKind, CalendarEntry, Corpus, EmailMessage, GoldLabels, Intent};
use crate::error::{Error, Result};

/// Interaction-signal noise for one intent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentProfile {
    /// Gold prevalence among candidate messages.
    pub prior: f64,
    /// P(signal fires | gold negative).
    pub false_positive_rate: f64,
    /// P(signal absent | gold positive).
    pub false_negative_rate: f64,
}

impl IntentProfile {
    /// Solves for the signal rates that give weak-positive precision
    /// `precision` and weak-negative predictive value `npv` at `prior`.
    pub fn calibrated(prior: f64, precision: f64, npv: f64) -> Result<Self> {
        for (name, v) in [("prior", prior), ("precision", precision), ("npv", npv)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        // a = P(y=1, signal), b = P(y=0, signal)
        let k = (1.0 - precision) / precision;
        let a = (1.0 - prior - npv) / (k * (1.0 - npv) - npv);
        let b = a * k;
        let profile = IntentProfile {
            prior,
            false_negative_rate: 1.0 - a / prior,
            false_positive_rate: b / (1.0 - prior),
        };
        profile.validate().map_err(|_| {
            Error::Validation(format!(
                "no signal rates reach precision {precision} and npv {npv} at prior {prior}"
            ))
        })?;
        Ok(profile)
    }

    /// Expected (precision, npv) of the interaction signal.
    pub fn expected_precision_npv(&self) -> (f64, f64) {
        let a = self.prior * (1.0 - self.false_negative_rate);
        let b = (1.0 - self.prior) * self.false_positive_rate;
        let c = self.prior * self.false_negative_rate;
        let d = (1.0 - self.prior) * (1.0 - self.false_positive_rate);
        (a / (a + b), d / (c + d))
    }

    /// Expected accuracy of a balanced audit (equal weak positives and negatives).
    pub fn expected_audit_accuracy(&self) -> f64 {
        let (p, n) = self.expected_precision_npv();
        0.5 * (p + n)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("prior", self.prior),
            ("false_positive_rate", self.false_positive_rate),
            ("false_negative_rate", self.false_negative_rate),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Validation(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Audit-table targets (weak-positive precision, weak-negative predictive value).
pub fn audit_targets(intent: Intent) -> (f64, f64) {
    match intent {
        Intent::RequestInformation => (0.36, 0.99),
        Intent::ScheduleMeeting => (0.46, 0.96),
        Intent::PromiseAction => (0.31, 0.95),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_threads: usize,
    pub profiles: BTreeMap<Intent, IntentProfile>,
    /// Background vocabulary size.
    pub vocab_size: usize,
    /// Offset into the background word space; domains with different offsets
    /// share fewer background words.
    pub background_offset: usize,
    /// Background tokens per body, uniform in `[min, max]`.
    pub body_len_min: usize,
    pub body_len_max: usize,
    /// Distinct marker words per intent.
    pub markers_per_intent: usize,
    /// Distinct topic words per intent.
    pub topics_per_intent: usize,
    /// Intent phrases in a gold-positive body.
    pub phrases_per_positive: usize,
    /// Probability a gold-negative body still carries one intent phrase.
    pub phrase_leak_rate: f64,
    /// Probability a gold-negative body carries a near-miss phrase
    /// (near-miss marker plus intent topic).
    pub near_miss_rate: f64,
    /// Multiplier on the false-positive rate for near-miss negatives; the
    /// remaining negatives absorb the difference so the overall rate holds.
    pub fp_concentration: f64,
    /// Namespace for ids and addresses.
    pub domain: String,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let mut profiles = BTreeMap::new();
        for intent in Intent::ALL {
            let (p, n) = audit_targets(intent);
            profiles.insert(
                intent,
                IntentProfile::calibrated(0.25, p, n).expect("audit targets are reachable"),
            );
        }
        SyntheticSpec {
            num_threads: 1000,
            profiles,
            vocab_size: 2000,
            background_offset: 0,
            body_len_min: 12,
            body_len_max: 30,
            markers_per_intent: 12,
            topics_per_intent: 150,
            phrases_per_positive: 2,
            phrase_leak_rate: 0.1,
            near_miss_rate: 0.3,
            fp_concentration: 2.0,
            domain: "corp".to_string(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        for intent in Intent::ALL {
            let p = self
                .profiles
                .get(&intent)
                .ok_or_else(|| Error::Validation(format!("missing noise profile for {intent}")))?;
            p.validate()?;
            let (hi, lo) = self.split_fp_rate(p.false_positive_rate);
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                return Err(Error::Validation(format!(
                    "fp_concentration {} infeasible for {intent} false-positive rate {}",
                    self.fp_concentration, p.false_positive_rate
                )));
            }
        }
        for (name, v) in [
            ("phrase_leak_rate", self.phrase_leak_rate),
            ("near_miss_rate", self.near_miss_rate),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Validation(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if self.fp_concentration < 0.0 || self.fp_concentration.is_nan() {
            return Err(Error::Validation("fp_concentration must be non-negative".into()));
        }
        if self.body_len_min > self.body_len_max {
            return Err(Error::Validation("body_len_min exceeds body_len_max".into()));
        }
        if self.vocab_size == 0 || self.markers_per_intent == 0 || self.topics_per_intent == 0 {
            return Err(Error::Validation("vocabulary pools must be non-empty".into()));
        }
        Ok(())
    }

    /// (rate for near-miss negatives, rate for the rest).
    fn split_fp_rate(&self, fp: f64) -> (f64, f64) {
        let q = self.near_miss_rate;
        if q <= 0.0 {
            return (fp, fp);
        }
        let hi = (fp * self.fp_concentration).min(1.0);
        if q >= 1.0 {
            return (fp, fp);
        }
        let lo = (fp - q * hi) / (1.0 - q);
        (hi, lo)
    }

    pub fn profile(&self, intent: Intent) -> &IntentProfile {
        &self.profiles[&intent]
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Injective map from an integer to a pronounceable lowercase word.
pub fn pseudo_word(mut n: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut s = String::new();
    loop {
        let d = n % base;
        s.push(CONSONANTS[d / VOWELS.len()] as char);
        s.push(VOWELS[d % VOWELS.len()] as char);
        n /= base;
        if n == 0 {
            break;
        }
    }
    s
}

fn background_word(spec: &SyntheticSpec, i: usize) -> String {
    pseudo_word(4_900 + spec.background_offset + i)
}

fn marker_word(intent: Intent, i: usize) -> String {
    pseudo_word(2_000_000 + intent.index() * 100_000 + i)
}

fn near_marker_word(intent: Intent, i: usize) -> String {
    pseudo_word(2_050_000 + intent.index() * 100_000 + i)
}

fn topic_word(intent: Intent, i: usize) -> String {
    pseudo_word(3_000_000 + intent.index() * 100_000 + i)
}

struct BodyPlan<'a> {
    spec: &'a SyntheticSpec,
    tokens: Vec<String>,
}

impl<'a> BodyPlan<'a> {
    fn new(spec: &'a SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let len = rng.gen_range(spec.body_len_min..=spec.body_len_max);
        let tokens = (0..len)
            .map(|_| background_word(spec, rng.gen_range(0..spec.vocab_size)))
            .collect();
        BodyPlan { spec, tokens }
    }

    fn insert_phrase(&mut self, marker: String, topic: String, rng: &mut ChaCha8Rng) {
        let at = rng.gen_range(0..=self.tokens.len());
        self.tokens.insert(at, topic);
        self.tokens.insert(at, marker);
    }

    /// Adds intent content for `intent`; returns whether the body is a near-miss negative.
    fn add_intent(&mut self, intent: Intent, positive: bool, rng: &mut ChaCha8Rng) -> bool {
        let spec = self.spec;
        let phrase = |rng: &mut ChaCha8Rng| {
            (
                marker_word(intent, rng.gen_range(0..spec.markers_per_intent)),
                topic_word(intent, rng.gen_range(0..spec.topics_per_intent)),
            )
        };
        if positive {
            for _ in 0..spec.phrases_per_positive {
                let (m, t) = phrase(rng);
                self.insert_phrase(m, t, rng);
            }
            return false;
        }
        if rng.gen_bool(spec.phrase_leak_rate) {
            let (m, t) = phrase(rng);
            self.insert_phrase(m, t, rng);
        }
        if rng.gen_bool(spec.near_miss_rate) {
            let m = near_marker_word(intent, rng.gen_range(0..spec.markers_per_intent));
            let t = topic_word(intent, rng.gen_range(0..spec.topics_per_intent));
            self.insert_phrase(m, t, rng);
            return true;
        }
        false
    }

    fn text(self) -> String {
        self.tokens.join(" ")
    }
}

fn signal_fires(spec: &SyntheticSpec, intent: Intent, positive: bool, near_miss: bool, rng: &mut ChaCha8Rng) -> bool {
    let p = spec.profile(intent);
    if positive {
        rng.gen_bool(1.0 - p.false_negative_rate)
    } else {
        let (hi, lo) = spec.split_fp_rate(p.false_positive_rate);
        rng.gen_bool(if near_miss { hi } else { lo }.clamp(0.0, 1.0))
    }
}

const SUBJECT_TOPICS: &[&str] = &[
    "budget",
    "roadmap",
    "contract",
    "hiring",
    "launch",
    "quarterly numbers",
    "vendor",
    "offsite",
    "design review",
    "accounts",
    "pricing",
    "onboarding",
    "audit",
    "release",
];
const DOC_EXTENSIONS: &[&str] = &["docx", "pdf", "xlsx", "pptx"];

/// Generates a corpus with gold labels. Pure in `spec`: equal specs give equal corpora.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let people: Vec<String> = (0..40)
        .map(|i| format!("{}@{}.example", pseudo_word(100 + i), spec.domain))
        .collect();

    let mut messages = Vec::with_capacity(spec.num_threads * 3);
    let mut calendar = Vec::new();
    let mut gold = GoldLabels::new();
    let base_time: i64 = 1_000_000_000;

    for t in 0..spec.num_threads {
        let thread_id = format!("{}-t{t:06}", spec.domain);
        let start = base_time + (t as i64) * 10_000 + rng.gen_range(0..1_000);
        let sender = people.choose(&mut rng).expect("non-empty").clone();
        let mut recipient = people.choose(&mut rng).expect("non-empty").clone();
        if recipient == sender {
            recipient = people[(people.iter().position(|p| *p == sender).unwrap() + 1) % people.len()].clone();
        }
        let subject = format!(
            "{} {} #{t}",
            SUBJECT_TOPICS.choose(&mut rng).expect("non-empty"),
            pseudo_word(rng.gen_range(0..200))
        );

        let ri = rng.gen_bool(spec.profile(Intent::RequestInformation).prior);
        let sm = rng.gen_bool(spec.profile(Intent::ScheduleMeeting).prior);
        let pa = rng.gen_bool(spec.profile(Intent::PromiseAction).prior);

        let mut root_body = BodyPlan::new(spec, &mut rng);
        let ri_near = root_body.add_intent(Intent::RequestInformation, ri, &mut rng);
        let sm_near = root_body.add_intent(Intent::ScheduleMeeting, sm, &mut rng);
        let mut reply_body = BodyPlan::new(spec, &mut rng);
        let pa_near = reply_body.add_intent(Intent::PromiseAction, pa, &mut rng);

        let ri_signal = signal_fires(spec, Intent::RequestInformation, ri, ri_near, &mut rng);
        let sm_signal = signal_fires(spec, Intent::ScheduleMeeting, sm, sm_near, &mut rng);
        let pa_signal = signal_fires(spec, Intent::PromiseAction, pa, pa_near, &mut rng);

        let root_id = format!("{thread_id}-m0");
        let reply_id = format!("{thread_id}-m1");

        messages.push(EmailMessage {
            id: root_id.clone(),
            thread_id: thread_id.clone(),
            sender: sender.clone(),
            recipients: vec![recipient.clone()],
            subject: subject.clone(),
            body: root_body.text(),
            timestamp: start,
            in_reply_to: None,
            attachments: Vec::new(),
            follow_up_flag: pa_signal,
        });

        let reply_attachments = if ri_signal {
            let ext = DOC_EXTENSIONS.choose(&mut rng).expect("non-empty");
            let kind = if rng.gen_bool(0.9) {
                AttachmentKind::Document
            } else {
                AttachmentKind::Other
            };
            vec![Attachment {
                filename: format!("{}.{ext}", pseudo_word(rng.gen_range(0..500))),
                kind,
            }]
        } else if rng.gen_bool(0.3) {
            let kind = *[
                AttachmentKind::Image,
                AttachmentKind::Signature,
                AttachmentKind::Contact,
            ]
            .choose(&mut rng)
            .expect("non-empty");
            let name = match kind {
                AttachmentKind::Image => "image001.png",
                AttachmentKind::Signature => "signature.asc",
                _ => "contact.vcf",
            };
            vec![Attachment {
                filename: name.to_string(),
                kind,
            }]
        } else {
            Vec::new()
        };
        let reply_time = start + rng.gen_range(60..3_000);
        messages.push(EmailMessage {
            id: reply_id.clone(),
            thread_id: thread_id.clone(),
            sender: recipient.clone(),
            recipients: vec![sender.clone()],
            subject: format!("RE: {subject}"),
            body: reply_body.text(),
            timestamp: reply_time,
            in_reply_to: Some(root_id.clone()),
            attachments: reply_attachments,
            follow_up_flag: false,
        });

        if sm_signal {
            let meeting = start + 86_400 + rng.gen_range(0..86_400);
            calendar.push(CalendarEntry {
                subject: subject.clone(),
                start_time: meeting,
                location: format!("room {}", rng.gen_range(1..40)),
                attendees: vec![sender.clone(), recipient.clone()],
                organizer: sender.clone(),
            });
            messages.push(EmailMessage {
                id: format!("{thread_id}-c"),
                thread_id: format!("{thread_id}-c"),
                sender: recipient.clone(),
                recipients: vec![sender.clone()],
                subject: format!("RE: {subject}"),
                body: "accepted".to_string(),
                timestamp: reply_time + rng.gen_range(60..3_000),
                in_reply_to: None,
                attachments: Vec::new(),
                follow_up_flag: false,
            });
        }

        gold.insert((root_id.clone(), Intent::RequestInformation), ri);
        gold.insert((root_id, Intent::ScheduleMeeting), sm);
        gold.insert((reply_id, Intent::PromiseAction), pa);
    }

    Corpus::new(messages, calendar, Some(gold))
}
