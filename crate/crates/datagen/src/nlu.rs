//! Simulated intent classifier, slot tagger and user context.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use hyprank_core::hypothesis::{DomainIndexEntry, NluSignals, UserProfile};

use crate::catalog::{BetaShape, DomainCatalog, Regime};
use crate::generate::{derive_seed, Example};

/// How a candidate domain relates to the utterance's gold domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Gold,
    /// Shares the gold domain's overlap group.
    Impostor,
    Unrelated,
}

impl Relation {
    pub fn of(catalog: &DomainCatalog, gold: usize, candidate: usize) -> Self {
        if candidate == gold {
            Relation::Gold
        } else if catalog.overlapping(gold, candidate) {
            Relation::Impostor
        } else {
            Relation::Unrelated
        }
    }

    fn shape(self, catalog: &DomainCatalog) -> BetaShape {
        let c = &catalog.config;
        match self {
            Relation::Gold => c.gold_confidence,
            Relation::Impostor => c.impostor_confidence,
            Relation::Unrelated => c.unrelated_confidence,
        }
    }
}

fn draw<R: Rng + ?Sized>(shape: BetaShape, rng: &mut R) -> f64 {
    // Shapes were validated with the catalog config.
    shape.distribution().expect("validated Beta shape").sample(rng).clamp(0.0, 1.0)
}

/// NLU output for `example` interpreted under `candidate`. Deterministic in
/// `(seed, text, gold, candidate)`.
pub fn simulate_nlu_signals(catalog: &DomainCatalog, example: &Example, candidate: usize, seed: u64) -> NluSignals {
    let cfg = &catalog.config;
    let text = example.text();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        &[b"nlu", text.as_bytes(), &example.domain.to_le_bytes(), &candidate.to_le_bytes()],
    ));
    let relation = Relation::of(catalog, example.domain, candidate);
    let dom = &catalog.domains[candidate];
    let gold_slots: Vec<usize> = example.slots.iter().map(|s| s.slot).collect();

    let (intent_id, intent_shape) = if relation == Relation::Gold {
        if rng.random_bool(cfg.intent_accuracy) {
            (example.intent, relation.shape(catalog))
        } else {
            let others: Vec<usize> = dom.intents.iter().copied().filter(|&i| i != example.intent).collect();
            let wrong = others.choose(&mut rng).copied().unwrap_or_else(|| rng.random_range(0..catalog.n_intents()));
            (wrong, cfg.impostor_confidence)
        }
    } else {
        (*dom.intents.choose(&mut rng).expect("domains have intents"), relation.shape(catalog))
    };

    let (slot_ids, slot_shape) = match relation {
        Relation::Gold => {
            let kept: Vec<usize> = gold_slots.iter().copied().filter(|_| rng.random_bool(cfg.slot_accuracy)).collect();
            let shape = if kept.len() == gold_slots.len() { cfg.gold_confidence } else { cfg.impostor_confidence };
            (kept, shape)
        }
        Relation::Impostor => {
            (gold_slots.iter().copied().filter(|s| dom.slot_types.contains(s)).collect(), relation.shape(catalog))
        }
        Relation::Unrelated => {
            let slots = if rng.random_bool(0.5) { vec![*dom.slot_types.choose(&mut rng).expect("non-empty")] } else { vec![] };
            (slots, relation.shape(catalog))
        }
    };

    // One latent draw per hypothesis; each confidence reuses it with
    // probability `signal_correlation` when its shape matches.
    let base = relation.shape(catalog);
    let shared = draw(base, &mut rng);
    let confidence = |shape: BetaShape, rng: &mut ChaCha8Rng| {
        let fresh = draw(shape, rng);
        if shape == base && rng.random_bool(cfg.signal_correlation) {
            shared
        } else {
            fresh
        }
    };
    let sl_confidence = confidence(base, &mut rng);
    let intent_confidence = confidence(intent_shape, &mut rng);
    let viterbi_score = confidence(slot_shape, &mut rng);
    let avg = confidence(slot_shape, &mut rng);
    NluSignals {
        sl_confidence,
        intent_confidence,
        viterbi_score,
        avg_slot_confidence: if slot_ids.is_empty() { 0.0 } else { avg },
        intent_id,
        slot_ids,
    }
}

/// Signals for every candidate, keyed by domain id.
pub fn simulate_candidates(catalog: &DomainCatalog, example: &Example, candidates: &[usize], seed: u64) -> BTreeMap<usize, NluSignals> {
    candidates.iter().map(|&c| (c, simulate_nlu_signals(catalog, example, c, seed))).collect()
}

/// Enabled and recently used domains of the speaker of `example`. In the
/// large-scale regime the gold domain is favoured; the traditional regime
/// draws an uninformative profile.
pub fn simulate_user_profile(catalog: &DomainCatalog, example: &Example, seed: u64) -> UserProfile {
    let cfg = &catalog.config;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"user", example.text().as_bytes(), &example.domain.to_le_bytes()]));
    let n = catalog.n_domains();
    let mut enabled = BTreeSet::new();
    let mut last_use = BTreeMap::new();
    for _ in 0..cfg.user_background_domains {
        enabled.insert(rng.random_range(0..n));
        last_use.insert(rng.random_range(0..n), rng.random_range(0..=60));
    }
    if cfg.regime == Regime::LargeScale {
        if rng.random_bool(cfg.user_gold_enabled) {
            enabled.insert(example.domain);
        }
        if rng.random_bool(cfg.user_gold_recent) {
            last_use.insert(example.domain, rng.random_range(0..=30));
        }
    }
    UserProfile { enabled_domains: enabled, last_use_days: last_use }
}

/// Popularity and quality of every domain, indexed by id.
pub fn domain_index(catalog: &DomainCatalog) -> Vec<DomainIndexEntry> {
    catalog.domains.iter().map(|d| DomainIndexEntry { popularity: d.popularity, quality: d.quality }).collect()
}
