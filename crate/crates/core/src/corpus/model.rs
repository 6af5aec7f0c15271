use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three intents mined from mailbox interactions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intent {
    /// Request information.
    #[serde(rename = "RI")]
    RequestInformation,
    /// Schedule meeting.
    #[serde(rename = "SM")]
    ScheduleMeeting,
    /// Promise action.
    #[serde(rename = "PA")]
    PromiseAction,
}

impl Intent {
    pub const ALL: [Intent; 3] = [
        Intent::RequestInformation,
        Intent::ScheduleMeeting,
        Intent::PromiseAction,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Intent::RequestInformation => "RI",
            Intent::ScheduleMeeting => "SM",
            Intent::PromiseAction => "PA",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Intent::RequestInformation => 0,
            Intent::ScheduleMeeting => 1,
            Intent::PromiseAction => 2,
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Intent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RI" => Ok(Intent::RequestInformation),
            "SM" => Ok(Intent::ScheduleMeeting),
            "PA" => Ok(Intent::PromiseAction),
            other => Err(Error::Validation(format!("unknown intent {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachmentKind {
    Document,
    Image,
    Signature,
    Contact,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub filename: String,
    pub kind: AttachmentKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailMessage {
    pub id: String,
    pub thread_id: String,
    pub sender: String,
    pub recipients: Vec<String>,
    pub subject: String,
    pub body: String,
    pub timestamp: i64,
    pub in_reply_to: Option<String>,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    #[serde(default)]
    pub follow_up_flag: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarEntry {
    pub subject: String,
    pub start_time: i64,
    pub location: String,
    pub attendees: Vec<String>,
    pub organizer: String,
}

/// One line of a gold file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub message_id: String,
    pub intent: Intent,
    pub label: u8,
}

/// Gold intent annotations keyed by (message id, intent).
pub type GoldLabels = BTreeMap<(String, Intent), bool>;

/// A reconstructed thread: message indices sorted by timestamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thread {
    pub messages: Vec<usize>,
}

/// An immutable, validated mail corpus with reconstructed threads.
#[derive(Clone, Debug)]
pub struct Corpus {
    messages: Vec<EmailMessage>,
    calendar: Vec<CalendarEntry>,
    gold: Option<GoldLabels>,
    threads: Vec<Thread>,
    by_id: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
}

impl Corpus {
    /// Validates referential integrity and reconstructs threads.
    pub fn new(messages: Vec<EmailMessage>, calendar: Vec<CalendarEntry>, gold: Option<GoldLabels>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(messages.len());
        for (i, m) in messages.iter().enumerate() {
            if by_id.insert(m.id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate message id {:?}", m.id)));
            }
        }
        let mut parent = vec![None; messages.len()];
        let mut children = vec![Vec::new(); messages.len()];
        for (i, m) in messages.iter().enumerate() {
            let Some(target) = &m.in_reply_to else {
                continue;
            };
            let &p = by_id.get(target).ok_or_else(|| {
                Error::Integrity(format!("message {:?} replies to unknown message {:?}", m.id, target))
            })?;
            let pm = &messages[p];
            if pm.timestamp >= m.timestamp {
                return Err(Error::Integrity(format!(
                    "message {:?} (t={}) replies to {:?} which is not earlier (t={})",
                    m.id, m.timestamp, pm.id, pm.timestamp
                )));
            }
            if pm.thread_id != m.thread_id {
                return Err(Error::Integrity(format!(
                    "message {:?} replies across threads ({:?} vs {:?})",
                    m.id, m.thread_id, pm.thread_id
                )));
            }
            parent[i] = Some(p);
            children[p].push(i);
        }
        for entry in &calendar {
            if entry.attendees.is_empty() {
                return Err(Error::Validation(format!(
                    "calendar entry {:?} has no attendees",
                    entry.subject
                )));
            }
        }
        if let Some(gold) = &gold {
            for (id, _) in gold.keys() {
                if !by_id.contains_key(id) {
                    return Err(Error::Integrity(format!("gold label for unknown message {id:?}")));
                }
            }
        }
        let threads = super::threads::reconstruct(&messages, &parent);
        Ok(Corpus {
            messages,
            calendar,
            gold,
            threads,
            by_id,
            children,
        })
    }

    pub fn empty() -> Self {
        Corpus::new(Vec::new(), Vec::new(), None).expect("empty corpus is valid")
    }

    pub fn messages(&self) -> &[EmailMessage] {
        &self.messages
    }

    pub fn calendar(&self) -> &[CalendarEntry] {
        &self.calendar
    }

    pub fn gold(&self) -> Option<&GoldLabels> {
        self.gold.as_ref()
    }

    pub fn threads(&self) -> &[Thread] {
        &self.threads
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn message(&self, id: &str) -> Option<&EmailMessage> {
        self.index_of(id).map(|i| &self.messages[i])
    }

    /// Indices of messages that reply directly to message `i`.
    pub fn replies_to(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn gold_label(&self, id: &str, intent: Intent) -> Option<bool> {
        self.gold
            .as_ref()
            .and_then(|g| g.get(&(id.to_string(), intent)).copied())
    }

    /// Message ids carrying a gold label for `intent`, in corpus order.
    pub fn gold_ids(&self, intent: Intent) -> Vec<&str> {
        let Some(gold) = &self.gold else {
            return Vec::new();
        };
        self.messages
            .iter()
            .filter(|m| gold.contains_key(&(m.id.clone(), intent)))
            .map(|m| m.id.as_str())
            .collect()
    }

    pub fn with_gold(self, gold: GoldLabels) -> Result<Self> {
        Corpus::new(self.messages, self.calendar, Some(gold))
    }

    pub fn into_parts(self) -> (Vec<EmailMessage>, Vec<CalendarEntry>, Option<GoldLabels>) {
        (self.messages, self.calendar, self.gold)
    }
}
