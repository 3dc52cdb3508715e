//! Template sampling and the five dataset splits.

use std::collections::HashSet;
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyprank_core::{Error, Result};

use crate::catalog::{DomainCatalog, Piece, SplitSizes};

/// Consecutive rejected draws tolerated before hr_train generation gives up.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotSpan {
    pub slot: usize,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

/// One labelled utterance.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Example {
    pub tokens: Vec<String>,
    pub domain: usize,
    pub intent: usize,
    pub slots: Vec<SlotSpan>,
}

impl Example {
    /// Utterance identity: the space-joined token sequence.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::contract("utterance has no tokens"));
        }
        let mut prev_end = 0;
        for s in &self.slots {
            if s.start >= s.end || s.end > self.tokens.len() || s.start < prev_end {
                return Err(Error::contract(format!("slot spans must be ordered, non-empty and disjoint: {:?}", self.slots)));
            }
            prev_end = s.end;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitKind {
    SlTrain,
    SlDev,
    HrTrain,
    HrDev,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 5] = [SplitKind::SlTrain, SplitKind::SlDev, SplitKind::HrTrain, SplitKind::HrDev, SplitKind::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitKind::SlTrain => "sl_train",
            SplitKind::SlDev => "sl_dev",
            SplitKind::HrTrain => "hr_train",
            SplitKind::HrDev => "hr_dev",
            SplitKind::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.tsv", self.name())
    }

    pub fn is_training(self) -> bool {
        matches!(self, SplitKind::SlTrain | SplitKind::HrTrain)
    }

    fn size(self, sizes: &SplitSizes) -> usize {
        sizes.as_array()[self as usize]
    }
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::parameter(format!("unknown split {s:?}")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub sl_train: Vec<Example>,
    pub sl_dev: Vec<Example>,
    pub hr_train: Vec<Example>,
    pub hr_dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl Splits {
    pub fn get(&self, kind: SplitKind) -> &Vec<Example> {
        match kind {
            SplitKind::SlTrain => &self.sl_train,
            SplitKind::SlDev => &self.sl_dev,
            SplitKind::HrTrain => &self.hr_train,
            SplitKind::HrDev => &self.hr_dev,
            SplitKind::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, kind: SplitKind) -> &mut Vec<Example> {
        match kind {
            SplitKind::SlTrain => &mut self.sl_train,
            SplitKind::SlDev => &mut self.sl_dev,
            SplitKind::HrTrain => &mut self.hr_train,
            SplitKind::HrDev => &mut self.hr_dev,
            SplitKind::Test => &mut self.test,
        }
    }
}

/// Derives a stable sub-seed from a seed and a list of labels.
pub fn derive_seed(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    for p in parts {
        h.write_usize(p.len());
        h.write(p);
    }
    h.finish()
}

/// Draws one utterance of `domain` from its template pool.
pub fn sample_utterance<R: Rng + ?Sized>(catalog: &DomainCatalog, domain: usize, rng: &mut R) -> Example {
    let cfg = &catalog.config;
    let d = &catalog.domains[domain];
    let template = d.templates.choose(rng).expect("domains have templates");
    let mut tokens = Vec::new();
    let mut slots = Vec::new();
    if rng.random_bool(cfg.filler_rate) {
        tokens.push(catalog.filler_words.choose(rng).expect("non-empty").clone());
    }
    for piece in &template.pieces {
        match piece {
            Piece::Word(w) => tokens.push(w.clone()),
            Piece::Keyword => {
                let pool = if rng.random_bool(cfg.generic_rate) { &catalog.category_words[d.category as usize] } else { &d.keywords };
                tokens.push(pool.choose(rng).expect("non-empty").clone());
            }
            Piece::Slot(s) => {
                let value = catalog.slot_types[*s].values.choose(rng).expect("non-empty");
                slots.push(SlotSpan { slot: *s, start: tokens.len(), end: tokens.len() + value.len() });
                tokens.extend(value.iter().cloned());
            }
        }
    }
    if !d.private_words.is_empty() && rng.random_bool(cfg.private_word_rate) {
        tokens.push(d.private_words.choose(rng).expect("non-empty").clone());
    }
    Example { tokens, domain, intent: d.intents[template.intent_slot], slots }
}

fn domain_weights(catalog: &DomainCatalog) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(catalog.domains.iter().map(|d| 0.5 + d.popularity))
        .map_err(|e| Error::Generation(format!("bad domain weights: {e}")))
}

/// Domain sequence of one split: every domain once (when the split is large
/// enough), the rest drawn by popularity, in shuffled order.
fn stratified_domains(catalog: &DomainCatalog, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let weights = domain_weights(catalog)?;
    let mut order: Vec<usize> = (0..catalog.n_domains()).collect();
    order.shuffle(rng);
    order.truncate(n);
    while order.len() < n {
        order.push(weights.sample(rng));
    }
    order.shuffle(rng);
    Ok(order)
}

fn apply_label_noise(catalog: &DomainCatalog, ex: &mut Example, rng: &mut ChaCha8Rng) {
    if catalog.config.label_noise > 0.0 && rng.random_bool(catalog.config.label_noise) {
        let d = rng.random_range(0..catalog.n_domains());
        ex.domain = d;
        ex.intent = catalog.domains[d].intents[0];
    }
}

fn generate_split(catalog: &DomainCatalog, kind: SplitKind, n: usize, seed: u64, exclude: Option<&HashSet<String>>) -> Result<Vec<Example>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"split", kind.name().as_bytes()]));
    let domains = stratified_domains(catalog, n, &mut rng)?;
    let mut out = Vec::with_capacity(n);
    for d in domains {
        let mut ex = sample_utterance(catalog, d, &mut rng);
        if let Some(taken) = exclude {
            let mut rejected = 0;
            while taken.contains(&ex.text()) {
                rejected += 1;
                if rejected >= MAX_REJECTIONS {
                    return Err(Error::Generation(format!(
                        "{}: domain {} ({}) produced {MAX_REJECTIONS} consecutive utterances already in sl_train; \
                         its template pool has too few distinct texts for disjoint splits \
                         (raise templates_per_domain or slot_values, or shrink sl_train)",
                        kind.name(),
                        d,
                        catalog.domains[d].name
                    )));
                }
                ex = sample_utterance(catalog, d, &mut rng);
            }
        }
        if kind.is_training() {
            apply_label_noise(catalog, &mut ex, &mut rng);
        }
        out.push(ex);
    }
    Ok(out)
}

/// Generates all five splits. Each split has its own derived RNG; hr_train
/// rejects any utterance whose text occurs in sl_train.
pub fn generate_utterances(catalog: &DomainCatalog, sizes: &SplitSizes, seed: u64) -> Result<Splits> {
    if sizes.as_array().contains(&0) {
        return Err(Error::parameter("every split size must be positive"));
    }
    let mut splits = Splits::default();
    splits.sl_train = generate_split(catalog, SplitKind::SlTrain, sizes.sl_train, seed, None)?;
    let taken: HashSet<String> = splits.sl_train.iter().map(Example::text).collect();
    for kind in [SplitKind::SlDev, SplitKind::HrTrain, SplitKind::HrDev, SplitKind::Test] {
        let exclude = (kind == SplitKind::HrTrain).then_some(&taken);
        *splits.get_mut(kind) = generate_split(catalog, kind, kind.size(sizes), seed, exclude)?;
    }
    Ok(splits)
}

/// Texts present in both example sets.
pub fn shared_texts(a: &[Example], b: &[Example]) -> Vec<String> {
    let left: HashSet<String> = a.iter().map(Example::text).collect();
    let mut shared: Vec<String> = b.iter().map(Example::text).filter(|t| left.contains(t)).collect();
    shared.sort();
    shared.dedup();
    shared
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::catalog::{generate_catalog, GeneratorConfig};

    fn small_sizes() -> SplitSizes {
        SplitSizes { sl_train: 600, sl_dev: 60, hr_train: 120, hr_dev: 40, test: 60 }
    }

    #[test]
    fn sizes_coverage_and_disjointness() {
        let cat = generate_catalog(&GeneratorConfig::large_scale(30), 1).unwrap();
        let splits = generate_utterances(&cat, &small_sizes(), 2).unwrap();
        for kind in SplitKind::ALL {
            let s = splits.get(kind);
            assert_eq!(s.len(), kind.size(&small_sizes()), "{}", kind.name());
            let covered: HashSet<usize> = s.iter().map(|e| e.domain).collect();
            assert_eq!(covered.len(), 30, "{}", kind.name());
        }
        assert!(shared_texts(&splits.sl_train, &splits.hr_train).is_empty());
    }

    #[test]
    fn examples_are_generatively_consistent() {
        let cat = generate_catalog(&GeneratorConfig::large_scale(40), 7).unwrap();
        let splits = generate_utterances(&cat, &small_sizes(), 7).unwrap();
        for kind in SplitKind::ALL {
            for ex in splits.get(kind) {
                ex.validate().unwrap();
                let spans: Vec<_> = ex.slots.iter().map(|s| (s.slot, s.start, s.end)).collect();
                assert!(cat.can_generate(ex.domain, &ex.tokens, &spans), "{:?}", ex);
                assert!(cat.domains[ex.domain].intents.contains(&ex.intent));
            }
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let cat = generate_catalog(&GeneratorConfig::traditional(), 4).unwrap();
        let a = generate_utterances(&cat, &small_sizes(), 11).unwrap();
        assert_eq!(a, generate_utterances(&cat, &small_sizes(), 11).unwrap());
        assert_ne!(a, generate_utterances(&cat, &small_sizes(), 12).unwrap());
    }

    #[test]
    fn exhausted_templates_raise_a_generation_error() {
        let cfg = GeneratorConfig {
            templates_per_domain: 1,
            keywords_per_domain: 1,
            slot_values: 1,
            filler_rate: 0.0,
            generic_rate: 0.0,
            private_word_rate: 0.0,
            ..GeneratorConfig::traditional()
        };
        let cat = generate_catalog(&cfg, 0).unwrap();
        let err = generate_utterances(&cat, &small_sizes(), 0).unwrap_err();
        assert!(matches!(err, Error::Generation(ref m) if m.contains("hr_train")), "{err}");
    }

    #[test]
    fn zero_size_is_rejected() {
        let cat = generate_catalog(&GeneratorConfig::traditional(), 0).unwrap();
        let sizes = SplitSizes { test: 0, ..small_sizes() };
        assert!(matches!(generate_utterances(&cat, &sizes, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn label_noise_touches_training_splits_only() {
        let cfg = GeneratorConfig { label_noise: 1.0, ..GeneratorConfig::traditional() };
        let cat = generate_catalog(&cfg, 3).unwrap();
        let splits = generate_utterances(&cat, &small_sizes(), 3).unwrap();
        let consistent = |ex: &Example| {
            let spans: Vec<_> = ex.slots.iter().map(|s| (s.slot, s.start, s.end)).collect();
            cat.can_generate(ex.domain, &ex.tokens, &spans)
        };
        assert!(splits.test.iter().all(consistent));
        assert!(splits.sl_train.iter().filter(|e| !consistent(e)).count() > 400);
    }

    #[test]
    fn split_names_round_trip() {
        for k in SplitKind::ALL {
            assert_eq!(k.name().parse::<SplitKind>().unwrap(), k);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sampled_spans_are_well_formed(seed in 0u64..1000, domain in 0usize..20) {
            let cat = generate_catalog(&GeneratorConfig::traditional(), 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ex = sample_utterance(&cat, domain, &mut rng);
            prop_assert!(ex.validate().is_ok());
            for s in &ex.slots {
                let value = &ex.tokens[s.start..s.end];
                prop_assert!(cat.slot_types[s.slot].values.iter().any(|v| v[..] == *value));
            }
        }
    }
}
