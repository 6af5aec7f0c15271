//! Labeled examples and balanced clean/weak/dev/test splits.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicU8, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Corpus, Intent};
use crate::error::{Error, Result};

/// Where an example's label came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Clean,
    Weak,
    Corrected,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Hard(usize),
    Soft(Vec<f64>),
}

impl Label {
    /// Target distribution over `num_classes`.
    pub fn distribution(&self, num_classes: usize) -> Vec<f64> {
        match self {
            Label::Hard(c) => {
                let mut d = vec![0.0; num_classes];
                d[*c] = 1.0;
                d
            }
            Label::Soft(p) => p.clone(),
        }
    }

    /// Most likely class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        match self {
            Label::Hard(c) => *c,
            Label::Soft(p) => crate::diffkit::argmax(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub source: Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Clean = 1,
    Weak = 2,
    Dev = 4,
    Test = 8,
}

/// Records which splits were read, so tests can check that a trainer only
/// touches the data it is entitled to.
#[derive(Debug, Default)]
pub struct SplitAudit(AtomicU8);

impl SplitAudit {
    fn mark(&self, s: Split) {
        self.0.fetch_or(s as u8, Ordering::Relaxed);
    }

    pub fn touched(&self, s: Split) -> bool {
        self.0.load(Ordering::Relaxed) & (s as u8) != 0
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Train/dev/test splits for one intent. Class 1 means the intent is present.
#[derive(Debug)]
pub struct Dataset {
    clean: Vec<Example>,
    weak: Vec<Example>,
    dev: Vec<Example>,
    test: Vec<Example>,
    num_classes: usize,
    weak_gold: Vec<Option<usize>>,
    audit: SplitAudit,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Dataset {
            clean: self.clean.clone(),
            weak: self.weak.clone(),
            dev: self.dev.clone(),
            test: self.test.clone(),
            num_classes: self.num_classes,
            weak_gold: self.weak_gold.clone(),
            audit: SplitAudit::default(),
        }
    }
}

impl Dataset {
    pub fn new(
        clean: Vec<Example>,
        weak: Vec<Example>,
        dev: Vec<Example>,
        test: Vec<Example>,
        num_classes: usize,
    ) -> Result<Self> {
        let weak_gold = vec![None; weak.len()];
        Self::with_weak_gold(clean, weak, dev, test, num_classes, weak_gold)
    }

    pub fn with_weak_gold(
        clean: Vec<Example>,
        weak: Vec<Example>,
        dev: Vec<Example>,
        test: Vec<Example>,
        num_classes: usize,
        weak_gold: Vec<Option<usize>>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Validation("need at least two classes".into()));
        }
        if weak_gold.len() != weak.len() {
            return Err(Error::shape(weak.len(), weak_gold.len()));
        }
        let mut seen = HashSet::new();
        for ex in clean.iter().chain(&weak).chain(&dev).chain(&test) {
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::Integrity(format!(
                    "example {:?} appears in more than one split",
                    ex.id
                )));
            }
            match &ex.label {
                Label::Hard(c) if *c >= num_classes => return Err(Error::shape(format!("class < {num_classes}"), c)),
                Label::Soft(p) if p.len() != num_classes => return Err(Error::shape(num_classes, p.len())),
                _ => {}
            }
        }
        Ok(Dataset {
            clean,
            weak,
            dev,
            test,
            num_classes,
            weak_gold,
            audit: SplitAudit::default(),
        })
    }

    pub fn clean(&self) -> &[Example] {
        self.audit.mark(Split::Clean);
        &self.clean
    }

    pub fn weak(&self) -> &[Example] {
        self.audit.mark(Split::Weak);
        &self.weak
    }

    pub fn dev(&self) -> &[Example] {
        self.audit.mark(Split::Dev);
        &self.dev
    }

    pub fn test(&self) -> &[Example] {
        self.audit.mark(Split::Test);
        &self.test
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn audit(&self) -> &SplitAudit {
        &self.audit
    }

    /// Gold labels of the weak split where known. Evaluation only.
    pub fn weak_gold(&self) -> &[Option<usize>] {
        &self.weak_gold
    }

    pub fn clean_len(&self) -> usize {
        self.clean.len()
    }

    pub fn weak_len(&self) -> usize {
        self.weak.len()
    }

    /// n / (n + N); 1.0 when both are empty.
    pub fn clean_ratio(&self) -> f64 {
        let total = self.clean.len() + self.weak.len();
        if total == 0 {
            1.0
        } else {
            self.clean.len() as f64 / total as f64
        }
    }

    /// Replaces the weak split, keeping the hidden gold alignment.
    pub fn with_weak(&self, weak: Vec<Example>) -> Result<Dataset> {
        if weak.len() != self.weak.len() {
            return Err(Error::shape(self.weak.len(), weak.len()));
        }
        Dataset::with_weak_gold(
            self.clean.clone(),
            weak,
            self.dev.clone(),
            self.test.clone(),
            self.num_classes,
            self.weak_gold.clone(),
        )
    }

    /// Random balanced subsets of the clean and weak splits; dev and test are kept.
    pub fn subsample(&self, clean: usize, weak: usize, seed: u64) -> Result<Dataset> {
        if clean > self.clean.len() || weak > self.weak.len() {
            return Err(Error::Sizing {
                message: format!(
                    "requested {clean} clean / {weak} weak from {} / {}",
                    self.clean.len(),
                    self.weak.len()
                ),
                feasible_weak: self.weak.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = balanced_take(&self.clean, clean, |e| e.label.argmax() == 1, &mut rng);
        let all: Vec<usize> = (0..self.weak.len()).collect();
        let mut idx = balanced_take(&all, weak, |&i| self.weak[i].label.argmax() == 1, &mut rng);
        idx.sort_unstable();
        Dataset::with_weak_gold(
            c,
            idx.iter().map(|&i| self.weak[i].clone()).collect(),
            self.dev.clone(),
            self.test.clone(),
            self.num_classes,
            idx.iter().map(|&i| self.weak_gold[i]).collect(),
        )
    }
}

fn balanced_take<T: Clone>(items: &[T], n: usize, positive: impl Fn(&T) -> bool, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut pos: Vec<&T> = items.iter().filter(|t| positive(t)).collect();
    let mut neg: Vec<&T> = items.iter().filter(|t| !positive(t)).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let want_pos = n.div_ceil(2).min(pos.len());
    let want_neg = (n - want_pos).min(neg.len());
    let want_pos = (n - want_neg).min(pos.len());
    pos.into_iter()
        .take(want_pos)
        .chain(neg.into_iter().take(want_neg))
        .cloned()
        .collect()
}

/// Uniformly down-samples the majority class so both classes have equal size.
pub fn balance<T>(items: Vec<T>, positive: impl Fn(&T) -> bool, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pos, mut neg): (Vec<T>, Vec<T>) = items.into_iter().partition(|t| positive(t));
    let k = pos.len().min(neg.len());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    pos.truncate(k);
    neg.truncate(k);
    pos.extend(neg);
    pos
}

/// Requested split sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub clean: usize,
    pub weak: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    /// Derives the clean size from a clean ratio n/(n+N) and a fixed weak size N.
    pub fn from_ratio(clean_ratio: f64, weak: usize, dev: usize, test: usize) -> Result<Self> {
        if !(clean_ratio > 0.0 && clean_ratio <= 1.0) {
            return Err(Error::Validation(format!(
                "clean ratio must lie in (0,1], got {clean_ratio}"
            )));
        }
        if clean_ratio == 1.0 && weak > 0 {
            return Err(Error::Validation("clean ratio 1.0 requires an empty weak pool".into()));
        }
        let clean = if clean_ratio == 1.0 {
            0
        } else {
            (clean_ratio * weak as f64 / (1.0 - clean_ratio)).round() as usize
        };
        Ok(SplitSizes { clean, weak, dev, test })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Draw dev/test at natural prevalence instead of balancing them.
    pub natural_prevalence_eval: bool,
}

struct Candidate<'a> {
    id: &'a str,
    text: &'a str,
    gold: bool,
    weak: Option<bool>,
}

struct Plan {
    dev: Vec<usize>,
    test: Vec<usize>,
    clean: Vec<usize>,
    weak: Vec<usize>,
}

fn take_balanced(
    cands: &[Candidate<'_>],
    used: &mut [bool],
    n: usize,
    class_of: impl Fn(&Candidate<'_>) -> Option<bool>,
) -> Option<Vec<usize>> {
    let want_pos = n.div_ceil(2);
    let want_neg = n / 2;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (i, c) in cands.iter().enumerate() {
        if used[i] || (pos.len() == want_pos && neg.len() == want_neg) {
            continue;
        }
        match class_of(c) {
            Some(true) if pos.len() < want_pos => pos.push(i),
            Some(false) if neg.len() < want_neg => neg.push(i),
            _ => {}
        }
    }
    if pos.len() < want_pos || neg.len() < want_neg {
        return None;
    }
    pos.extend(neg);
    for &i in &pos {
        used[i] = true;
    }
    Some(pos)
}

fn take_natural(cands: &[Candidate<'_>], used: &mut [bool], n: usize) -> Option<Vec<usize>> {
    let out: Vec<usize> = (0..cands.len()).filter(|&i| !used[i]).take(n).collect();
    if out.len() < n {
        return None;
    }
    for &i in &out {
        used[i] = true;
    }
    Some(out)
}

fn plan(cands: &[Candidate<'_>], sizes: &SplitSizes, opts: &BuildOptions) -> Result<Plan, &'static str> {
    let mut used = vec![false; cands.len()];
    let eval = |n: usize, used: &mut [bool]| {
        if opts.natural_prevalence_eval {
            take_natural(cands, used, n)
        } else {
            take_balanced(cands, used, n, |c| Some(c.gold))
        }
    };
    let weak = take_balanced(cands, &mut used, sizes.weak, |c| c.weak)
        .ok_or("not enough weakly labeled examples for the weak split")?;
    let dev = eval(sizes.dev, &mut used).ok_or("not enough gold examples for dev")?;
    let test = eval(sizes.test, &mut used).ok_or("not enough gold examples for test")?;
    let clean = take_balanced(cands, &mut used, sizes.clean, |c| Some(c.gold))
        .ok_or("not enough gold examples for the clean split")?;
    Ok(Plan { dev, test, clean, weak })
}

/// Builds balanced, disjoint splits for `intent`.
///
/// Candidates are messages with a gold label for the intent. After a seeded
/// shuffle, the weak split is drawn first (balanced on the weak label), then
/// dev, test and the clean split (balanced on gold). Drawing the weak split
/// first keeps its label quality equal to the labeling function's. Negatives
/// are down-sampled uniformly.
pub fn build_dataset(
    corpus: &Corpus,
    weak_labels: &BTreeMap<String, bool>,
    intent: Intent,
    sizes: &SplitSizes,
    opts: &BuildOptions,
    seed: u64,
) -> Result<Dataset> {
    let gold = corpus
        .gold()
        .ok_or_else(|| Error::Input("corpus has no gold labels".into()))?;
    let mut cands: Vec<Candidate<'_>> = corpus
        .messages()
        .iter()
        .filter_map(|m| {
            gold.get(&(m.id.clone(), intent)).map(|&g| Candidate {
                id: &m.id,
                text: &m.body,
                gold: g,
                weak: weak_labels.get(&m.id).copied(),
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cands.shuffle(&mut rng);

    let plan = plan(&cands, sizes, opts).map_err(|message| {
        // Largest weak size that still fits with the clean size scaled at the same ratio.
        let ratio = if sizes.clean + sizes.weak == 0 {
            0.0
        } else {
            sizes.clean as f64 / (sizes.clean + sizes.weak) as f64
        };
        let fits = |n_weak: usize| {
            let clean = if ratio >= 1.0 {
                sizes.clean
            } else {
                (ratio * n_weak as f64 / (1.0 - ratio)).round() as usize
            };
            let s = SplitSizes {
                clean,
                weak: n_weak,
                ..sizes.clone()
            };
            plan(&cands, &s, opts).is_ok()
        };
        let (mut lo, mut hi) = (0usize, sizes.weak);
        if !fits(0) {
            return Error::Sizing {
                message: message.to_string(),
                feasible_weak: 0,
            };
        }
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Error::Sizing {
            message: message.to_string(),
            feasible_weak: lo,
        }
    })?;

    let to_example = |i: usize, label: usize, source: Source| Example {
        id: cands[i].id.to_string(),
        text: cands[i].text.to_string(),
        label: Label::Hard(label),
        source,
    };
    let gold_ex = |idx: &[usize], source: Source| -> Vec<Example> {
        idx.iter()
            .map(|&i| to_example(i, usize::from(cands[i].gold), source))
            .collect()
    };
    let weak: Vec<Example> = plan
        .weak
        .iter()
        .map(|&i| {
            to_example(
                i,
                usize::from(cands[i].weak.expect("weak split members carry a weak label")),
                Source::Weak,
            )
        })
        .collect();
    let weak_gold = plan.weak.iter().map(|&i| Some(usize::from(cands[i].gold))).collect();
    Dataset::with_weak_gold(
        gold_ex(&plan.clean, Source::Clean),
        weak,
        gold_ex(&plan.dev, Source::Eval),
        gold_ex(&plan.test, Source::Eval),
        2,
        weak_gold,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str, label: usize) -> Example {
        Example {
            id: id.into(),
            text: String::new(),
            label: Label::Hard(label),
            source: Source::Clean,
        }
    }

    #[test]
    fn balance_downsamples_majority_by_count() {
        let items: Vec<usize> = (0..260).collect();
        let out = balance(items, |&i| i < 60, 7);
        assert_eq!(out.len(), 120);
        assert_eq!(out.iter().filter(|&&i| i < 60).count(), 60);
        assert_eq!(out.iter().filter(|&&i| i >= 60).count(), 60);
    }

    #[test]
    fn ratio_sizing() {
        let s = SplitSizes::from_ratio(0.10, 16_200, 334, 336).unwrap();
        assert_eq!(s.clean, 1_800);
        assert!(SplitSizes::from_ratio(0.0, 10, 1, 1).is_err());
        assert!(SplitSizes::from_ratio(1.0, 10, 1, 1).is_err());
        assert_eq!(SplitSizes::from_ratio(1.0, 0, 1, 1).unwrap().clean, 0);
    }

    #[test]
    fn empty_weak_pool_has_ratio_one() {
        let d = Dataset::new(vec![ex("a", 0), ex("b", 1)], vec![], vec![], vec![], 2).unwrap();
        assert_eq!(d.clean_ratio(), 1.0);
    }

    #[test]
    fn overlapping_ids_rejected() {
        let err = Dataset::new(vec![ex("a", 0)], vec![ex("a", 1)], vec![], vec![], 2);
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn audit_tracks_reads() {
        let d = Dataset::new(vec![ex("a", 0)], vec![ex("b", 1)], vec![], vec![], 2).unwrap();
        assert!(!d.audit().touched(Split::Clean));
        let _ = d.weak();
        assert!(d.audit().touched(Split::Weak));
        assert!(!d.audit().touched(Split::Clean));
        d.audit().reset();
        assert!(!d.audit().touched(Split::Weak));
    }
}
