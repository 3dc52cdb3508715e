//! Per-domain hypothesis vectors and the ordered k-hypothesis list.

use std::collections::{BTreeMap, BTreeSet};

use crate::embed_pretrain::{combine_slot_embeddings, LabelEmbeddingTable, LabelKind, LABEL_DIM};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shortlister::KBestList;

/// Fixed positions of every feature block inside a hypothesis vector.
pub mod layout {
    use std::ops::Range;

    use super::LABEL_DIM;

    pub const NLU: Range<usize> = 0..4;
    pub const DOMAIN: Range<usize> = NLU.end..NLU.end + LABEL_DIM;
    pub const INTENT: Range<usize> = DOMAIN.end..DOMAIN.end + LABEL_DIM;
    pub const SLOT: Range<usize> = INTENT.end..INTENT.end + LABEL_DIM;
    pub const USER: Range<usize> = SLOT.end..SLOT.end + 4;
    pub const INDEX: Range<usize> = USER.end..USER.end + 2;
    pub const DIM: usize = INDEX.end;

    /// Index of the shortlister confidence.
    pub const SL_CONFIDENCE: usize = NLU.start;
    /// Number of manual cross-hypothesis features.
    pub const CROSS: usize = 3;
    pub const DIM_WITH_CROSS: usize = DIM + CROSS;

    /// Recency windows in days for the three "used within" flags.
    pub const RECENCY_DAYS: [u32; 3] = [7, 14, 30];
}

/// NLU interpretation of an utterance under one candidate domain.
#[derive(Clone, Debug, PartialEq)]
pub struct NluSignals {
    pub sl_confidence: f64,
    pub intent_confidence: f64,
    pub viterbi_score: f64,
    pub avg_slot_confidence: f64,
    pub intent_id: usize,
    pub slot_ids: Vec<usize>,
}

impl NluSignals {
    pub fn validate(&self) -> Result<()> {
        let scores = [self.sl_confidence, self.intent_confidence, self.viterbi_score, self.avg_slot_confidence];
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::contract(format!("NLU scores must lie in [0, 1]: {scores:?}")));
        }
        if self.slot_ids.is_empty() && self.avg_slot_confidence != 0.0 {
            return Err(Error::contract("average slot confidence must be 0 without slots"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserProfile {
    pub enabled_domains: BTreeSet<usize>,
    /// Days since the domain was last triggered; absent means never.
    pub last_use_days: BTreeMap<usize, u32>,
}

impl UserProfile {
    /// `[enabled, used ≤ 7d, used ≤ 14d, used ≤ 30d]`.
    pub fn flags(&self, domain: usize) -> [bool; 4] {
        let days = self.last_use_days.get(&domain).copied();
        let within = |w: u32| days.is_some_and(|d| d <= w);
        let [a, b, c] = layout::RECENCY_DAYS;
        [self.enabled_domains.contains(&domain), within(a), within(b), within(c)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainIndexEntry {
    pub popularity: f64,
    pub quality: f64,
}

/// The three label tables hypotheses are built from.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTables<T> {
    pub domain: LabelEmbeddingTable<T>,
    pub intent: LabelEmbeddingTable<T>,
    pub slot: LabelEmbeddingTable<T>,
}

impl<T: Scalar> LabelTables<T> {
    pub fn new(domain: LabelEmbeddingTable<T>, intent: LabelEmbeddingTable<T>, slot: LabelEmbeddingTable<T>) -> Result<Self> {
        for (t, k) in [(&domain, LabelKind::Domain), (&intent, LabelKind::Intent), (&slot, LabelKind::Slot)] {
            if t.kind != k {
                return Err(Error::contract(format!("expected a {} table, got {}", k.name(), t.kind.name())));
            }
        }
        Ok(Self { domain, intent, slot })
    }
}

/// Decoded view of a hypothesis vector, block by block.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisParts<T> {
    pub nlu: [T; 4],
    pub domain: Vec<T>,
    pub intent: Vec<T>,
    pub slot: Vec<T>,
    pub user: [T; 4],
    pub index: [T; 2],
}

impl<T: Scalar> HypothesisParts<T> {
    pub fn encode(&self) -> Result<Vec<T>> {
        if [&self.domain, &self.intent, &self.slot].iter().any(|b| b.len() != LABEL_DIM) {
            return Err(Error::shape(format!("embedding blocks must have length {LABEL_DIM}")));
        }
        let mut v = Vec::with_capacity(layout::DIM);
        v.extend_from_slice(&self.nlu);
        v.extend_from_slice(&self.domain);
        v.extend_from_slice(&self.intent);
        v.extend_from_slice(&self.slot);
        v.extend_from_slice(&self.user);
        v.extend_from_slice(&self.index);
        debug_assert_eq!(v.len(), layout::DIM);
        Ok(v)
    }

    pub fn decode(v: &[T]) -> Result<Self> {
        if v.len() != layout::DIM {
            return Err(Error::shape(format!("hypothesis vector has length {}, expected {}", v.len(), layout::DIM)));
        }
        let arr = |r: std::ops::Range<usize>| v[r].to_vec();
        Ok(Self {
            nlu: v[layout::NLU].try_into().expect("fixed width"),
            domain: arr(layout::DOMAIN),
            intent: arr(layout::INTENT),
            slot: arr(layout::SLOT),
            user: v[layout::USER].try_into().expect("fixed width"),
            index: v[layout::INDEX].try_into().expect("fixed width"),
        })
    }
}

/// One candidate domain with its feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisVector<T> {
    pub domain: usize,
    pub features: Vec<T>,
    pub slot_count: usize,
}

impl<T: Scalar> HypothesisVector<T> {
    pub fn sl_confidence(&self) -> T {
        self.features[layout::SL_CONFIDENCE]
    }
}

pub fn build_hypothesis<T: Scalar>(
    domain: usize,
    nlu: &NluSignals,
    user: &UserProfile,
    index: &DomainIndexEntry,
    tables: &LabelTables<T>,
) -> Result<HypothesisVector<T>> {
    nlu.validate()?;
    let b = |x: bool| if x { T::one() } else { T::zero() };
    let parts = HypothesisParts {
        nlu: [nlu.sl_confidence, nlu.intent_confidence, nlu.viterbi_score, nlu.avg_slot_confidence].map(T::lit),
        domain: tables.domain.row(domain)?.to_vec(),
        intent: tables.intent.row(nlu.intent_id)?.to_vec(),
        slot: combine_slot_embeddings(&nlu.slot_ids, &tables.slot)?,
        user: user.flags(domain).map(b),
        index: [T::lit(index.popularity), T::lit(index.quality)],
    };
    Ok(HypothesisVector { domain, features: parts.encode()?, slot_count: nlu.slot_ids.len() })
}

/// Candidate domains in shortlister order, `p₁ … p_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisList<T> {
    pub hypotheses: Vec<HypothesisVector<T>>,
}

impl<T: Scalar> HypothesisList<T> {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn position(&self, domain: usize) -> Option<usize> {
        self.hypotheses.iter().position(|h| h.domain == domain)
    }
}

/// Builds one hypothesis per k-best entry. `nlu` supplies the signals of each
/// candidate domain; the shortlister confidence is taken from the k-best list.
pub fn build_hypothesis_list<T: Scalar>(
    kbest: &KBestList<T>,
    nlu: &BTreeMap<usize, NluSignals>,
    user: &UserProfile,
    index: &[DomainIndexEntry],
    tables: &LabelTables<T>,
) -> Result<HypothesisList<T>> {
    if kbest.is_empty() {
        return Err(Error::contract("k-best list is empty"));
    }
    let mut seen = BTreeSet::new();
    let mut hypotheses = Vec::with_capacity(kbest.len());
    for &(domain, score) in &kbest.entries {
        if !seen.insert(domain) {
            return Err(Error::contract(format!("domain {domain} appears twice in the k-best list")));
        }
        let signals = nlu.get(&domain).ok_or_else(|| Error::parameter(format!("no NLU signals for domain {domain}")))?;
        let signals = NluSignals { sl_confidence: score.as_f64().clamp(0.0, 1.0), ..signals.clone() };
        let entry = index.get(domain).ok_or_else(|| Error::parameter(format!("domain {domain} missing from index")))?;
        hypotheses.push(build_hypothesis(domain, &signals, user, entry, tables)?);
    }
    Ok(HypothesisList { hypotheses })
}

/// Per hypothesis: `[sl / max sl, slots − mean slots, (rank − 1)/(k − 1)]`.
pub fn manual_cross_features<T: Scalar>(list: &HypothesisList<T>) -> Result<Vec<[T; layout::CROSS]>> {
    if list.is_empty() {
        return Err(Error::contract("hypothesis list is empty"));
    }
    let k = list.len();
    let max = list.hypotheses.iter().map(|h| h.sl_confidence()).fold(T::neg_infinity(), T::max);
    let mean_slots = T::lit(list.hypotheses.iter().map(|h| h.slot_count as f64).sum::<f64>() / k as f64);
    Ok(list
        .hypotheses
        .iter()
        .enumerate()
        .map(|(rank, h)| {
            let ratio = if max > T::zero() { h.sl_confidence() / max } else { T::one() };
            let rel_slots = T::lit(h.slot_count as f64) - mean_slots;
            let pos = if k == 1 { T::zero() } else { T::lit(rank as f64 / (k - 1) as f64) };
            [ratio, rel_slots, pos]
        })
        .collect())
}
