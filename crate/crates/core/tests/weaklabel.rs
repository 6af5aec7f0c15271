mod common;

use common::oracles;

use std::collections::BTreeSet;

use mailintent::corpus::{Attachment, AttachmentKind, Corpus, EmailMessage, Intent};
use mailintent::weaklabel::{
    label_promise_action, label_request_information, label_schedule_meeting, WeakLabelAssignment, DISCARDED,
};

fn positives(v: &[WeakLabelAssignment]) -> BTreeSet<String> {
    v.iter()
        .filter(|a| a.label.is_positive())
        .map(|a| a.message_id.clone())
        .collect()
}

#[test]
fn labeling_functions_match_exhaustive_oracles() {
    for seed in 0..30 {
        let n = 20 + (seed as usize * 17) % 480;
        let c = common::random_corpus(n, 1 + n / 6, 15, seed);
        let ri = label_request_information(&c);
        let sm = label_schedule_meeting(&c);
        let pa = label_promise_action(&c);
        assert_eq!(positives(&ri), oracles::request_information(&c), "RI seed {seed}");
        assert_eq!(positives(&sm), oracles::schedule_meeting(&c), "SM seed {seed}");
        assert_eq!(positives(&pa), oracles::promise_action(&c), "PA seed {seed}");
        for labels in [&ri, &sm, &pa] {
            assert_eq!(labels.len(), c.len());
            let ids: BTreeSet<&str> = labels.iter().map(|a| a.message_id.as_str()).collect();
            assert_eq!(ids.len(), c.len());
            for a in labels.iter().filter(|a| !a.label.is_positive()) {
                assert_eq!(a.provenance, DISCARDED);
            }
        }
    }
}

#[test]
fn labeling_is_deterministic() {
    let c = common::random_corpus(300, 40, 10, 77);
    assert_eq!(label_schedule_meeting(&c), label_schedule_meeting(&c));
    assert_eq!(label_request_information(&c), label_request_information(&c));
}

#[test]
fn adding_a_qualifying_reply_keeps_existing_positives() {
    for seed in 0..20 {
        let c = common::random_corpus(120, 20, 5, seed);
        let before_ri = positives(&label_request_information(&c));
        let before_pa = positives(&label_promise_action(&c));
        let target = c.messages()[(seed as usize * 7) % c.len()].clone();
        let (mut msgs, cal, gold) = c.into_parts();
        let mut reply: EmailMessage = common::message(
            "extra-reply",
            &target.thread_id,
            target.timestamp + 1,
            Some(&target.id),
            "RE: anything",
        );
        reply.attachments.push(Attachment {
            filename: "report.pdf".into(),
            kind: AttachmentKind::Document,
        });
        msgs.push(reply);
        let after = Corpus::new(msgs, cal, gold).unwrap();
        let after_ri = positives(&label_request_information(&after));
        assert!(before_ri.is_subset(&after_ri));
        assert!(after_ri.contains(&target.id));
        assert!(before_pa.is_subset(&positives(&label_promise_action(&after))));
    }
}

#[test]
fn forward_request_with_document_reply() {
    let b = common::message("b", "t", 1, None, "Please forward me the final version for the slides");
    let mut a = common::message("a", "t", 2, Some("b"), "RE: final version");
    a.attachments.push(Attachment {
        filename: "slides.pptx".into(),
        kind: AttachmentKind::Document,
    });
    let c = Corpus::new(vec![b, a], vec![], None).unwrap();
    let ri = label_request_information(&c);
    assert!(ri
        .iter()
        .any(|x| x.message_id == "b" && x.label.is_positive() && x.intent == Intent::RequestInformation));
    assert!(ri.iter().any(|x| x.message_id == "a" && !x.label.is_positive()));
}

#[test]
fn promise_reply_to_flagged_message() {
    let mut b = common::message("b", "t", 1, None, "todo");
    b.follow_up_flag = true;
    let mut a = common::message("a", "t", 2, Some("b"), "RE: todo");
    a.body = "I can do this next week".into();
    let lonely = {
        let mut m = common::message("c", "u", 3, None, "flagged alone");
        m.follow_up_flag = true;
        m
    };
    let c = Corpus::new(vec![b, a, lonely], vec![], None).unwrap();
    assert_eq!(positives(&label_promise_action(&c)), BTreeSet::from(["a".to_string()]));
}
