#![allow(dead_code)]

pub mod grad;
pub mod oracles;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mailintent::corpus::{Attachment, AttachmentKind, CalendarEntry, Corpus, EmailMessage};

pub const SUBJECTS: &[&str] = &[
    "sync on accounts",
    "Budget review",
    "slides",
    "offsite plan",
    "quarterly numbers",
    "Launch",
];

const KINDS: [AttachmentKind; 5] = [
    AttachmentKind::Document,
    AttachmentKind::Image,
    AttachmentKind::Signature,
    AttachmentKind::Contact,
    AttachmentKind::Other,
];

pub fn message(id: &str, thread: &str, ts: i64, reply: Option<&str>, subject: &str) -> EmailMessage {
    EmailMessage {
        id: id.into(),
        thread_id: thread.into(),
        sender: "a@x".into(),
        recipients: vec!["b@x".into()],
        subject: subject.into(),
        body: String::new(),
        timestamp: ts,
        in_reply_to: reply.map(Into::into),
        attachments: Vec::new(),
        follow_up_flag: false,
    }
}

/// Random reply forest over `threads` threads with random subjects,
/// attachments, flags and calendar entries.
pub fn random_corpus(n: usize, threads: usize, calendar: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut msgs: Vec<EmailMessage> = Vec::with_capacity(n);
    for i in 0..n {
        let t = if i < threads { i } else { rng.gen_range(0..threads) };
        let thread = format!("t{t}");
        let earlier: Vec<usize> = (0..i).filter(|&j| msgs[j].thread_id == thread).collect();
        let reply = if !earlier.is_empty() && rng.gen_bool(0.8) {
            Some(msgs[*earlier.choose(&mut rng).unwrap()].id.clone())
        } else {
            None
        };
        let base = SUBJECTS.choose(&mut rng).unwrap();
        let subject = match rng.gen_range(0..5) {
            0 => format!("RE: {base}"),
            1 => format!("Re: FW: {base}"),
            2 => format!("  fwd: {}  ", base.to_uppercase()),
            _ => base.to_string(),
        };
        let attachments = (0..rng.gen_range(0..3))
            .map(|k| Attachment {
                filename: format!("f{i}_{k}"),
                kind: *KINDS.choose(&mut rng).unwrap(),
            })
            .collect();
        let mut m = message(
            &format!("m{i}"),
            &thread,
            i as i64 * 10 + rng.gen_range(0..5),
            reply.as_deref(),
            &subject,
        );
        m.attachments = attachments;
        m.follow_up_flag = rng.gen_bool(0.2);
        msgs.push(m);
    }
    msgs.shuffle(&mut rng);
    let cal = (0..calendar)
        .map(|k| CalendarEntry {
            subject: match k % 3 {
                0 => SUBJECTS.choose(&mut rng).unwrap().to_string(),
                1 => format!("Re: {}", SUBJECTS.choose(&mut rng).unwrap()),
                _ => format!("unrelated {k}"),
            },
            start_time: rng.gen_range(0..10_000),
            location: "room".into(),
            attendees: vec!["a@x".into()],
            organizer: "a@x".into(),
        })
        .collect();
    Corpus::new(msgs, cal, None).unwrap()
}

/// A small schedule-meeting dataset from the synthetic generator.
pub fn small_dataset(seed: u64) -> (mailintent::corpus::Dataset, mailintent::encoder::Vocabulary) {
    use mailintent::corpus::{build_dataset, generate_synthetic, BuildOptions, Intent, SplitSizes, SyntheticSpec};
    use mailintent::weaklabel::{as_label_map, label_intent};
    let spec = SyntheticSpec {
        num_threads: 1_500,
        seed,
        ..SyntheticSpec::default()
    };
    let corpus = generate_synthetic(&spec).unwrap();
    let weak = as_label_map(&label_intent(&corpus, Intent::ScheduleMeeting));
    let sizes = SplitSizes::from_ratio(0.2, 200, 60, 60).unwrap();
    let ds = build_dataset(
        &corpus,
        &weak,
        Intent::ScheduleMeeting,
        &sizes,
        &BuildOptions::default(),
        seed,
    )
    .unwrap();
    let vocab = mailintent::train::build_vocabulary([ds.clean(), ds.weak()]);
    ds.audit().reset();
    (ds, vocab)
}

/// A fast configuration for tests.
pub fn small_config() -> mailintent::baselines::MethodConfig {
    use mailintent::baselines::MethodConfig;
    let mut c = MethodConfig::default();
    c.encoder.embed_dim = 8;
    c.encoder.max_len = 48;
    c.train.epochs = 3;
    c.train.patience = 0;
    c.pretrain_epochs = 2;
    c.glc.train.epochs = 2;
    c.hydra.lambdas = vec![0.5, 1.0];
    c.hydra.epochs_per_stage = 1;
    c.hydra.warmup_epochs = 1;
    c.hydra.alpha_grid = vec![1.0];
    c
}
