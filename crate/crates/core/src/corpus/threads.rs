//! Thread reconstruction over the reply forest.
//!
//! Every message has at most one parent, so the reply graph is a forest and
//! each connected component is identified by the root reached by walking
//! `in_reply_to` links upward.

use std::collections::HashMap;

use super::model::{EmailMessage, Thread};

pub(crate) fn reconstruct(messages: &[EmailMessage], parent: &[Option<usize>]) -> Vec<Thread> {
    let mut root_of: Vec<Option<usize>> = vec![None; messages.len()];
    let mut path = Vec::new();
    for start in 0..messages.len() {
        let mut cur = start;
        let root = loop {
            if let Some(r) = root_of[cur] {
                break r;
            }
            match parent[cur] {
                Some(p) => {
                    path.push(cur);
                    cur = p;
                }
                None => {
                    root_of[cur] = Some(cur);
                    break cur;
                }
            }
        };
        for node in path.drain(..) {
            root_of[node] = Some(root);
        }
    }

    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut threads: Vec<Thread> = Vec::new();
    for (i, r) in root_of.iter().enumerate() {
        let r = r.expect("every message resolves to a root");
        let t = *slot.entry(r).or_insert_with(|| {
            threads.push(Thread { messages: Vec::new() });
            threads.len() - 1
        });
        threads[t].messages.push(i);
    }
    for t in &mut threads {
        t.messages
            .sort_by(|&a, &b| (messages[a].timestamp, &messages[a].id).cmp(&(messages[b].timestamp, &messages[b].id)));
    }
    threads.sort_by(|a, b| {
        let (ma, mb) = (&messages[a.messages[0]], &messages[b.messages[0]]);
        (ma.timestamp, &ma.id).cmp(&(mb.timestamp, &mb.id))
    });
    threads
}
