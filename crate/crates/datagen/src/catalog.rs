//! Domain catalogs: categories, templates, vocabularies and overlap groups.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use hyprank_core::{Error, Result};

use crate::words::WordPool;

/// Domain categories and their sizes in the 1,500-domain reference catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Device,
    Food,
    Entertainment,
    Information,
    News,
    Shopping,
    Utility,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Device,
        Category::Food,
        Category::Entertainment,
        Category::Information,
        Category::News,
        Category::Shopping,
        Category::Utility,
    ];

    /// Reference domain counts (total 1,500).
    pub const REFERENCE_COUNTS: [u64; 7] = [177, 99, 465, 399, 159, 39, 162];

    pub fn short_name(self) -> &'static str {
        match self {
            Category::Device => "dev",
            Category::Food => "food",
            Category::Entertainment => "ent",
            Category::Information => "info",
            Category::News => "news",
            Category::Shopping => "shop",
            Category::Utility => "util",
        }
    }
}

/// Splits `n` domains across the categories in proportion to the reference
/// counts (largest remainder; ties go to the earlier category).
pub fn apportion(n: usize) -> Result<[usize; 7]> {
    if n < Category::ALL.len() {
        return Err(Error::parameter(format!("need at least {} domains, got {n}", Category::ALL.len())));
    }
    let total: u64 = Category::REFERENCE_COUNTS.iter().sum();
    let n64 = n as u64;
    let mut counts = [0usize; 7];
    let mut remainders = [(0u64, 0usize); 7];
    for (i, &c) in Category::REFERENCE_COUNTS.iter().enumerate() {
        counts[i] = (n64 * c / total) as usize;
        remainders[i] = (n64 * c % total, i);
    }
    let left = n - counts.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in &remainders[..left] {
        counts[i] += 1;
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// A few tens of hand-designed, non-overlapping domains.
    Traditional,
    /// Many domains, a share of them grouped into overlapping clusters.
    LargeScale,
}

/// Number of utterances in each split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub sl_train: usize,
    pub sl_dev: usize,
    pub hr_train: usize,
    pub hr_dev: usize,
    pub test: usize,
}

impl SplitSizes {
    /// Reference split proportions scaled to a 50k shortlister training set.
    pub const DEFAULT: Self = Self { sl_train: 50_000, sl_dev: 5_300, hr_train: 8_300, hr_dev: 200, test: 5_300 };

    /// Same proportions as [`Self::DEFAULT`] scaled by `factor`, never below
    /// `floor` per split.
    pub fn scaled(factor: f64, floor: usize) -> Self {
        let s = |v: usize| ((v as f64 * factor).round() as usize).max(floor);
        let d = Self::DEFAULT;
        Self { sl_train: s(d.sl_train), sl_dev: s(d.sl_dev), hr_train: s(d.hr_train), hr_dev: s(d.hr_dev), test: s(d.test) }
    }

    pub fn as_array(&self) -> [usize; 5] {
        [self.sl_train, self.sl_dev, self.hr_train, self.hr_dev, self.test]
    }
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Shape parameters of a Beta distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn distribution(&self) -> Result<Beta<f64>> {
        Beta::new(self.alpha, self.beta).map_err(|e| Error::parameter(format!("bad Beta({}, {}): {e}", self.alpha, self.beta)))
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Every knob of the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub regime: Regime,
    pub n_domains: usize,
    /// Share of domains placed in overlap groups (large-scale regime only).
    pub overlap_fraction: f64,
    pub max_group_size: usize,
    pub templates_per_domain: usize,
    pub keywords_per_domain: usize,
    pub carrier_words_per_domain: usize,
    pub category_words: usize,
    pub filler_words: usize,
    pub private_words_per_domain: usize,
    /// Probability that an overlap-group utterance carries one of its
    /// domain's private words.
    pub private_word_rate: f64,
    /// Probability that a domain keyword is replaced by a generic category word.
    pub generic_rate: f64,
    /// Probability of a leading filler word.
    pub filler_rate: f64,
    pub slot_values: usize,
    /// Probability that a training label is replaced by a random domain.
    pub label_noise: f64,
    pub intent_accuracy: f64,
    pub slot_accuracy: f64,
    pub gold_confidence: BetaShape,
    pub impostor_confidence: BetaShape,
    pub unrelated_confidence: BetaShape,
    /// Probability that each NLU confidence of one hypothesis reuses a shared
    /// draw instead of an independent one. Marginals are unchanged.
    pub signal_correlation: f64,
    /// Chance that the gold domain is enabled / recently used by the user
    /// (large-scale regime; the traditional regime ignores the gold domain).
    pub user_gold_enabled: f64,
    pub user_gold_recent: f64,
    /// Background enabled and recently used domains per user.
    pub user_background_domains: usize,
    pub sizes: SplitSizes,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::large_scale(150)
    }
}

impl GeneratorConfig {
    pub fn traditional() -> Self {
        Self { regime: Regime::Traditional, n_domains: 20, overlap_fraction: 0.0, ..Self::large_scale(20) }
    }

    pub fn large_scale(n_domains: usize) -> Self {
        Self {
            regime: Regime::LargeScale,
            n_domains,
            overlap_fraction: 0.4,
            max_group_size: 4,
            templates_per_domain: 6,
            keywords_per_domain: 3,
            carrier_words_per_domain: 3,
            category_words: 20,
            filler_words: 12,
            private_words_per_domain: 2,
            private_word_rate: 0.15,
            generic_rate: 0.03,
            filler_rate: 0.3,
            slot_values: 15,
            label_noise: 0.0,
            intent_accuracy: 0.98,
            slot_accuracy: 0.96,
            gold_confidence: BetaShape::new(8.0, 2.0),
            impostor_confidence: BetaShape::new(4.0, 4.0),
            unrelated_confidence: BetaShape::new(2.0, 8.0),
            signal_correlation: 0.9,
            user_gold_enabled: 0.4,
            user_gold_recent: 0.3,
            user_background_domains: 8,
            sizes: SplitSizes::DEFAULT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::parameter(format!("{name} = {v} is not a probability")))
            }
        };
        prob("overlap_fraction", self.overlap_fraction)?;
        prob("private_word_rate", self.private_word_rate)?;
        prob("generic_rate", self.generic_rate)?;
        prob("filler_rate", self.filler_rate)?;
        prob("label_noise", self.label_noise)?;
        prob("signal_correlation", self.signal_correlation)?;
        prob("user_gold_enabled", self.user_gold_enabled)?;
        prob("user_gold_recent", self.user_gold_recent)?;
        for (name, v) in [("intent_accuracy", self.intent_accuracy), ("slot_accuracy", self.slot_accuracy)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::parameter(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        for b in [self.gold_confidence, self.impostor_confidence, self.unrelated_confidence] {
            b.distribution()?;
        }
        if self.sizes.as_array().contains(&0) {
            return Err(Error::parameter("every split size must be positive"));
        }
        if self.templates_per_domain == 0 || self.keywords_per_domain == 0 || self.slot_values == 0 {
            return Err(Error::parameter("templates, keywords and slot values must be positive"));
        }
        if self.category_words == 0 || self.filler_words == 0 || self.carrier_words_per_domain == 0 {
            return Err(Error::parameter("word pools must be non-empty"));
        }
        if self.regime == Regime::LargeScale && self.overlap_fraction > 0.0 && self.max_group_size < 2 {
            return Err(Error::parameter("overlap groups need max_group_size >= 2"));
        }
        apportion(self.n_domains).map(|_| ())
    }
}

/// One element of a template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Piece {
    Word(String),
    /// One of the domain's keywords (or, rarely, a generic category word).
    Keyword,
    /// A value of the given slot type.
    Slot(usize),
}

impl Piece {
    pub fn to_token(&self) -> String {
        match self {
            Piece::Word(w) => w.clone(),
            Piece::Keyword => "{kw}".into(),
            Piece::Slot(s) => format!("{{slot:{s}}}"),
        }
    }

    pub fn from_token(t: &str) -> Result<Self> {
        if t == "{kw}" {
            return Ok(Piece::Keyword);
        }
        if let Some(id) = t.strip_prefix("{slot:").and_then(|r| r.strip_suffix('}')) {
            return id.parse().map(Piece::Slot).map_err(|_| Error::format(format!("bad slot piece {t:?}")));
        }
        if t.is_empty() || t.contains(['{', '}', ' ']) {
            return Err(Error::format(format!("bad template word {t:?}")));
        }
        Ok(Piece::Word(t.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub pieces: Vec<Piece>,
    /// Index into the owning domain's intent list.
    pub intent_slot: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub id: usize,
    pub name: String,
    pub category: Category,
    pub group: Option<usize>,
    pub keywords: Vec<String>,
    pub private_words: Vec<String>,
    pub templates: Vec<Template>,
    /// Global intent ids owned by this domain.
    pub intents: Vec<usize>,
    pub slot_types: Vec<usize>,
    /// Min-max normalized to [0, 1] over the catalog.
    pub popularity: f64,
    pub quality: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotType {
    pub name: String,
    /// Each value is one or two tokens.
    pub values: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intent {
    pub name: String,
    pub domain: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainCatalog {
    pub config: GeneratorConfig,
    pub seed: u64,
    pub domains: Vec<Domain>,
    pub overlap_groups: Vec<Vec<usize>>,
    pub intents: Vec<Intent>,
    pub slot_types: Vec<SlotType>,
    /// Generic words per category, indexed like [`Category::ALL`].
    pub category_words: Vec<Vec<String>>,
    pub filler_words: Vec<String>,
}

/// Lexical material shared by all members of a group (or owned by a lone domain).
struct Blueprint {
    keywords: Vec<String>,
    templates: Vec<Template>,
    slot_types: Vec<usize>,
    n_intents: usize,
}

fn min_max(values: &mut [f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in values.iter_mut() {
        *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
    }
}

/// Group sizes in `2..=max` covering exactly `members` domains (one fewer
/// when `max` is 2 and `members` is odd).
fn group_sizes<R: Rng + ?Sized>(rng: &mut R, members: usize, max: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = if max == 2 { members & !1 } else { members };
    while left > 0 {
        // A remainder below four cannot be split into groups of two or more.
        if left <= max && (left < 4 || rng.random_bool(0.3)) {
            sizes.push(left);
            break;
        }
        let s = rng.random_range(2..=max.min(left - 2));
        sizes.push(s);
        left -= s;
    }
    sizes
}

pub fn generate_catalog(config: &GeneratorConfig, seed: u64) -> Result<DomainCatalog> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = WordPool::new();
    let counts = apportion(config.n_domains)?;

    let filler_words = pool.fresh_n(&mut rng, config.filler_words);
    let category_words: Vec<Vec<String>> = Category::ALL.iter().map(|_| pool.fresh_n(&mut rng, config.category_words)).collect();
    let n_slot_types = (config.n_domains / 2).max(6);
    let slot_types: Vec<SlotType> = (0..n_slot_types)
        .map(|_| {
            let name = pool.fresh(&mut rng);
            let values = (0..config.slot_values)
                .map(|_| {
                    let len = if rng.random_bool(0.3) { 2 } else { 1 };
                    pool.fresh_n(&mut rng, len)
                })
                .collect();
            SlotType { name, values }
        })
        .collect();

    // Assign categories, then carve overlap groups out of each category.
    let mut categories = Vec::with_capacity(config.n_domains);
    for (c, &n) in Category::ALL.iter().zip(&counts) {
        categories.extend(std::iter::repeat_n(*c, n));
    }
    let overlapping = match config.regime {
        Regime::Traditional => 0,
        Regime::LargeScale => (config.overlap_fraction * config.n_domains as f64).round() as usize,
    };
    // Members per category in proportion to category size; leftovers spill into larger categories.
    let mut members = vec![0usize; 7];
    if overlapping > 0 {
        let mut want = overlapping;
        let mut order: Vec<usize> = (0..7).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        for &c in &order {
            let share = ((overlapping as f64) * counts[c] as f64 / config.n_domains as f64).round() as usize;
            let m = share.min(counts[c]).min(want);
            members[c] = if m == 1 { 0 } else { m };
            want -= members[c];
        }
        for &c in &order {
            let room = counts[c] - members[c];
            let extra = room.min(want);
            if members[c] + extra >= 2 {
                members[c] += extra;
                want -= extra;
            }
        }
    }

    let mut domain_group = vec![None; config.n_domains];
    let mut overlap_groups = Vec::new();
    let mut start = 0;
    for (c, &n) in counts.iter().enumerate() {
        let mut next = start;
        for size in group_sizes(&mut rng, members[c], config.max_group_size) {
            let g = overlap_groups.len();
            overlap_groups.push((next..next + size).collect::<Vec<_>>());
            for d in next..next + size {
                domain_group[d] = Some(g);
            }
            next += size;
        }
        start += n;
    }

    let blueprint = |rng: &mut ChaCha8Rng, pool: &mut WordPool, category: Category| {
        let keywords = pool.fresh_n(rng, config.keywords_per_domain);
        let carriers = pool.fresh_n(rng, config.carrier_words_per_domain);
        let cat_words = &category_words[category as usize];
        let n_slots = rng.random_range(1..=3).min(slot_types.len());
        let slots: Vec<usize> = rand::seq::index::sample(rng, slot_types.len(), n_slots).into_vec();
        let n_intents = rng.random_range(2..=3);
        let templates = (0..config.templates_per_domain)
            .map(|t| {
                let mut pieces = vec![Piece::Keyword];
                for _ in 0..rng.random_range(1..=3) {
                    let w = if rng.random_bool(0.5) { carriers.choose(rng) } else { cat_words.choose(rng) };
                    pieces.push(Piece::Word(w.expect("non-empty").clone()));
                }
                // Every other template carries a slot so hr_train always has fresh texts to draw.
                let lo = usize::from(t % 2 == 0);
                for _ in 0..rng.random_range(lo..=2) {
                    pieces.push(Piece::Slot(*slots.choose(rng).expect("non-empty")));
                }
                pieces.shuffle(rng);
                Template { pieces, intent_slot: t % n_intents }
            })
            .collect();
        Blueprint { keywords, templates, slot_types: slots, n_intents }
    };

    let mut group_blueprints: Vec<Option<Blueprint>> = overlap_groups.iter().map(|_| None).collect();
    let pop_dist = BetaShape::new(2.0, 5.0).distribution()?;
    let qual_dist = BetaShape::new(5.0, 2.0).distribution()?;
    let mut domains = Vec::with_capacity(config.n_domains);
    let mut intents = Vec::new();
    for (id, &category) in categories.iter().enumerate() {
        let group = domain_group[id];
        let own;
        let bp = match group {
            Some(g) => {
                if group_blueprints[g].is_none() {
                    group_blueprints[g] = Some(blueprint(&mut rng, &mut pool, category));
                }
                group_blueprints[g].as_ref().expect("just set")
            }
            None => {
                own = blueprint(&mut rng, &mut pool, category);
                &own
            }
        };
        let name = format!("{}_{}", category.short_name(), pool.fresh(&mut rng));
        let private_words = if group.is_some() { pool.fresh_n(&mut rng, config.private_words_per_domain) } else { Vec::new() };
        let intent_ids: Vec<usize> = (0..bp.n_intents)
            .map(|_| {
                intents.push(Intent { name: format!("{name}.{}", pool.fresh(&mut rng)), domain: id });
                intents.len() - 1
            })
            .collect();
        domains.push(Domain {
            id,
            name,
            category,
            group,
            keywords: bp.keywords.clone(),
            private_words,
            templates: bp.templates.clone(),
            intents: intent_ids,
            slot_types: bp.slot_types.clone(),
            popularity: pop_dist.sample(&mut rng),
            quality: qual_dist.sample(&mut rng),
        });
    }
    let mut pops: Vec<f64> = domains.iter().map(|d| d.popularity).collect();
    let mut quals: Vec<f64> = domains.iter().map(|d| d.quality).collect();
    min_max(&mut pops);
    min_max(&mut quals);
    for (d, (p, q)) in domains.iter_mut().zip(pops.into_iter().zip(quals)) {
        d.popularity = p;
        d.quality = q;
    }
    Ok(DomainCatalog { config: config.clone(), seed, domains, overlap_groups, intents, slot_types, category_words, filler_words })
}

impl DomainCatalog {
    pub fn n_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn n_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn n_slot_types(&self) -> usize {
        self.slot_types.len()
    }

    pub fn slot_id(&self, name: &str) -> Option<usize> {
        self.slot_types.iter().position(|s| s.name == name)
    }

    /// True when the two domains are distinct members of one overlap group.
    pub fn overlapping(&self, a: usize, b: usize) -> bool {
        a != b && self.domains[a].group.is_some() && self.domains[a].group == self.domains[b].group
    }

    pub fn category_counts(&self) -> [usize; 7] {
        let mut c = [0; 7];
        for d in &self.domains {
            c[d.category as usize] += 1;
        }
        c
    }

    /// Whether `domain`'s templates can produce `tokens` with the slot spans
    /// `slots` (`(slot type, start, end)`, end exclusive).
    pub fn can_generate(&self, domain: usize, tokens: &[String], slots: &[(usize, usize, usize)]) -> bool {
        let d = &self.domains[domain];
        let generic = &self.category_words[d.category as usize];
        let starts: &[usize] = if tokens.first().is_some_and(|t| self.filler_words.contains(t)) { &[0, 1] } else { &[0] };
        let ends: &[usize] =
            if tokens.last().is_some_and(|t| d.private_words.contains(t)) { &[tokens.len(), tokens.len() - 1] } else { &[tokens.len()] };
        starts.iter().any(|&s| {
            ends.iter().any(|&e| {
                s <= e
                    && d.templates.iter().any(|t| {
                        let mut spans = Vec::new();
                        self.match_pieces(&t.pieces, &tokens[s..e], s, d, generic, &mut spans) && spans == slots
                    })
            })
        })
    }

    fn match_pieces(
        &self,
        pieces: &[Piece],
        tokens: &[String],
        offset: usize,
        d: &Domain,
        generic: &[String],
        spans: &mut Vec<(usize, usize, usize)>,
    ) -> bool {
        let Some((first, rest)) = pieces.split_first() else { return tokens.is_empty() };
        match first {
            Piece::Word(w) => {
                tokens.first() == Some(w) && self.match_pieces(rest, &tokens[1..], offset + 1, d, generic, spans)
            }
            Piece::Keyword => {
                tokens.first().is_some_and(|t| d.keywords.contains(t) || generic.contains(t))
                    && self.match_pieces(rest, &tokens[1..], offset + 1, d, generic, spans)
            }
            Piece::Slot(s) => self.slot_types[*s].values.iter().any(|v| {
                if tokens.len() < v.len() || tokens[..v.len()] != v[..] {
                    return false;
                }
                spans.push((*s, offset, offset + v.len()));
                if self.match_pieces(rest, &tokens[v.len()..], offset + v.len(), d, generic, spans) {
                    return true;
                }
                spans.pop();
                false
            }),
        }
    }
}
