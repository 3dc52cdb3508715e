//! Training stages: shortlister, label-embedding pre-training, hypothesis
//! list construction and reranker training.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hyprank_core::embed_pretrain::{pretrain_label_embeddings, LabelEmbeddingTable, LabelKind, LabelledUtterance, PretrainConfig};
use hyprank_core::encoder::{CharVocab, Utterance, WordVocab};
use hyprank_core::hypothesis::{build_hypothesis_list, HypothesisList, LabelTables};
use hyprank_core::hyprank::{feature_rows, HypRankConfig, Reranker, RerankerKind};
use hyprank_core::nn::Dropout;
use hyprank_core::shortlister::{k_best, KBestList, Shortlister};
use hyprank_core::train::{EarlyStopping, Trainer};
use hyprank_core::{Error, ParamSet, Result, Tensor};
use hyprank_datagen::generate::{derive_seed, shared_texts};
use hyprank_datagen::io::{read_text, write_text, Dataset};
use hyprank_datagen::nlu::{domain_index, simulate_candidates, simulate_user_profile};
use hyprank_datagen::{DomainCatalog, Example, Splits};

use crate::checkpoint::Checkpoint;
use crate::config::{adam, HypRankSettings, PretrainSettings, ShortlisterSettings};
use crate::par::par_map;

pub const SHORTLISTER_FILE: &str = "shortlister.ckpt";
pub const LABELS_FILE: &str = "labels.ckpt";
pub const CHAR_VOCAB_FILE: &str = "vocab.chars";
pub const WORD_VOCAB_FILE: &str = "vocab.words";

pub fn reranker_file(kind: RerankerKind) -> String {
    format!("hyprank_{}.ckpt", kind.name())
}

/// One training epoch as reported in learning curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Dev accuracy in percent.
    pub dev_accuracy: f64,
}

fn dropout(rate: f64, seed: u64) -> Option<Dropout> {
    (rate > 0.0).then_some(Dropout { rate, seed })
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

pub fn build_vocabs(train: &[Example]) -> (CharVocab, WordVocab) {
    let words = WordVocab::build(train.iter().flat_map(|e| e.tokens.iter().cloned()));
    let chars = CharVocab::build(train.iter().flat_map(|e| e.tokens.iter().flat_map(|t| t.chars())));
    (chars, words)
}

/// Trained shortlister with the vocabularies it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortlisterModel {
    pub params: ParamSet,
    pub model: Shortlister,
    pub chars: CharVocab,
    pub words: WordVocab,
}

impl ShortlisterModel {
    pub fn utterance(&self, tokens: &[String]) -> Result<Utterance> {
        Utterance::from_tokens(tokens, &self.chars, &self.words)
    }

    pub fn scores(&self, tokens: &[String]) -> Result<Vec<f64>> {
        self.model.score(&self.params, &self.utterance(tokens)?)
    }

    pub fn k_best(&self, tokens: &[String], k: usize) -> Result<KBestList<f64>> {
        k_best(&self.scores(tokens)?, k)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(CHAR_VOCAB_FILE), &self.chars.to_lines())?;
        write_text(&dir.join(WORD_VOCAB_FILE), &self.words.to_lines())?;
        Checkpoint::new(self.params.clone())
            .with_meta("model", "shortlister")
            .with_meta("variant", self.model.variant.name())
            .with_meta("n_domains", self.model.n_domains)
            .save(&dir.join(SHORTLISTER_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let ckpt = Checkpoint::load(&dir.join(SHORTLISTER_FILE))?;
        if ckpt.meta("model")? != "shortlister" {
            return Err(Error::format("checkpoint does not hold a shortlister"));
        }
        let chars = CharVocab::from_lines(&read_text(&dir.join(CHAR_VOCAB_FILE))?)?;
        let words = WordVocab::from_lines(&read_text(&dir.join(WORD_VOCAB_FILE))?)?;
        let model = Shortlister::bind(&ckpt.params)?;
        if model.encoder.n_chars(&ckpt.params) != chars.len() || model.encoder.n_words(&ckpt.params) != words.len() {
            return Err(Error::format("vocabulary files do not match the shortlister embeddings"));
        }
        Ok(Self { params: ckpt.params, model, chars, words })
    }
}

/// Percentage of `examples` whose gold domain is the shortlister's 1-best.
pub fn shortlister_accuracy(sl: &ShortlisterModel, examples: &[Example]) -> Result<f64> {
    let hits = par_map(examples, |ex| Ok(sl.k_best(&ex.tokens, 1)?.entries[0].0 == ex.domain))?;
    Ok(percent(hits.iter().filter(|&&h| h).count(), examples.len()))
}

/// Trains a shortlister on sl_train with early stopping on sl_dev 1-best
/// accuracy; returns the best-on-dev weights and the learning curve.
pub fn train_shortlister(
    settings: &ShortlisterSettings,
    data: &Dataset,
    seed: u64,
) -> Result<(ShortlisterModel, Vec<EpochRecord>)> {
    let train = &data.splits.sl_train;
    let dev = &data.splits.sl_dev;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::parameter("sl_train and sl_dev must be non-empty"));
    }
    let (chars, words) = build_vocabs(train);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"shortlister"]));
    let mut params = ParamSet::new();
    let model = Shortlister::new(
        &mut params,
        settings.variant()?,
        settings.encoder(),
        chars.len(),
        words.len(),
        data.catalog.n_domains(),
        &mut rng,
    )?;
    let mut current = ShortlisterModel { params, model, chars, words };
    let items = train
        .iter()
        .map(|ex| Ok((current.utterance(&ex.tokens)?, ex.domain)))
        .collect::<Result<Vec<_>>>()?;
    let mut trainer = Trainer::new(&current.params, adam(settings.lr), settings.batch_size, rng.random())?;
    let mut stopping = EarlyStopping::new(settings.patience);
    let mut best = current.params.clone();
    let mut curve = Vec::new();
    for epoch in 0..settings.epochs {
        let model = current.model.clone();
        let loss = trainer.epoch(&mut current.params, &items, |tape, (utt, gold), s| {
            model.loss(tape, utt, *gold, dropout(settings.dropout, s)).map(Some)
        })?;
        let dev_accuracy = shortlister_accuracy(&current, dev)?;
        log::info!("shortlister epoch {epoch}: loss {loss:.4}, dev 1-best {dev_accuracy:.2}%");
        curve.push(EpochRecord { epoch, train_loss: loss, dev_accuracy });
        if stopping.observe(epoch, dev_accuracy) {
            best = current.params.clone();
        }
        if stopping.should_stop() {
            log::info!("shortlister: early stop after epoch {epoch}");
            break;
        }
    }
    current.params = best;
    Ok((current, curve))
}

/// Domain, intent and slot embedding tables pre-trained on the leading
/// `max_examples` sl_train utterances.
pub fn pretrain_tables(
    settings: &PretrainSettings,
    catalog: &DomainCatalog,
    train: &[Example],
    words: &WordVocab,
    seed: u64,
) -> Result<LabelTables<f64>> {
    let subset = &train[..train.len().min(settings.max_examples)];
    if subset.is_empty() {
        return Err(Error::parameter("no utterances available for label pre-training"));
    }
    let config = PretrainConfig {
        epochs: settings.epochs,
        batch_size: settings.batch_size,
        dropout: settings.dropout,
        adam: adam(settings.lr),
        ..PretrainConfig::default()
    };
    let table = |kind: LabelKind, n_labels: usize, labels: &dyn Fn(&Example) -> Vec<usize>| {
        let corpus: Vec<LabelledUtterance> = subset
            .iter()
            .map(|ex| LabelledUtterance { words: ex.tokens.iter().map(|t| words.id(t.as_str())).collect(), labels: labels(ex) })
            .collect();
        let seed = derive_seed(seed, &[b"pretrain", kind.name().as_bytes()]);
        pretrain_label_embeddings::<f64>(&corpus, kind, words.len(), n_labels, &config, seed).map(|p| p.table)
    };
    let domain = table(LabelKind::Domain, catalog.n_domains(), &|ex| vec![ex.domain])?;
    let intent = table(LabelKind::Intent, catalog.n_intents(), &|ex| vec![ex.intent])?;
    let slot = table(LabelKind::Slot, catalog.n_slot_types(), &|ex| {
        let mut s: Vec<usize> = ex.slots.iter().map(|s| s.slot).collect();
        s.sort_unstable();
        s.dedup();
        s
    })?;
    LabelTables::new(domain, intent, slot)
}

const LABEL_NAMES: [(LabelKind, &str); 3] =
    [(LabelKind::Domain, "label.domain"), (LabelKind::Intent, "label.intent"), (LabelKind::Slot, "label.slot")];

pub fn save_tables(path: &Path, tables: &LabelTables<f64>) -> Result<()> {
    let mut params = ParamSet::new();
    for (t, (_, name)) in [&tables.domain, &tables.intent, &tables.slot].into_iter().zip(LABEL_NAMES) {
        params.insert(name, t.table.clone());
    }
    Checkpoint::new(params).with_meta("model", "label_tables").save(path)
}

pub fn load_tables(path: &Path) -> Result<LabelTables<f64>> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.meta("model")? != "label_tables" {
        return Err(Error::format("checkpoint does not hold label tables"));
    }
    let get = |(kind, name): (LabelKind, &str)| -> Result<LabelEmbeddingTable<f64>> {
        let id = ckpt.params.id_of(name).ok_or_else(|| Error::format(format!("missing {name}")))?;
        LabelEmbeddingTable::new(kind, ckpt.params.get(id).clone())
    };
    LabelTables::new(get(LABEL_NAMES[0])?, get(LABEL_NAMES[1])?, get(LABEL_NAMES[2])?)
}

/// A hypothesis list with the gold position, if the gold domain survived
/// shortlisting.
#[derive(Clone, Debug, PartialEq)]
pub struct ListExample {
    pub list: HypothesisList<f64>,
    pub gold: Option<usize>,
}

/// Builds the k-hypothesis list of every example with the frozen
/// shortlister. NLU signals and user profiles are simulated with the
/// catalog seed, so they are a fixed property of the corpus.
pub fn build_lists(
    sl: &ShortlisterModel,
    catalog: &DomainCatalog,
    tables: &LabelTables<f64>,
    examples: &[Example],
    k: usize,
) -> Result<Vec<ListExample>> {
    let index = domain_index(catalog);
    par_map(examples, |ex| {
        let kbest = sl.k_best(&ex.tokens, k)?;
        let candidates: Vec<usize> = kbest.domains().collect();
        let nlu = simulate_candidates(catalog, ex, &candidates, catalog.seed);
        let user = simulate_user_profile(catalog, ex, catalog.seed);
        let list = build_hypothesis_list(&kbest, &nlu, &user, &index, tables)?;
        Ok(ListExample { gold: list.position(ex.domain), list })
    })
}

/// Fails with a contract violation when any sl_train utterance reappears in
/// hr_train.
pub fn check_disjoint(splits: &Splits) -> Result<()> {
    let shared = shared_texts(&splits.sl_train, &splits.hr_train);
    if let Some(first) = shared.first() {
        return Err(Error::contract(format!(
            "{} hr_train utterance(s) also occur in sl_train, e.g. {first:?}",
            shared.len()
        )));
    }
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::parameter(format!(
            "k = {k}: with a single hypothesis every reranker must pick index 0, so there is nothing to train"
        )));
    }
    Ok(())
}

/// Trained reranker and the list length it expects.
#[derive(Clone, Debug, PartialEq)]
pub struct RerankerModel {
    pub kind: RerankerKind,
    pub k: usize,
    pub params: ParamSet,
    pub model: Reranker,
}

impl RerankerModel {
    pub fn predict(&self, list: &HypothesisList<f64>) -> Result<usize> {
        Ok(self.model.predict_list(&self.params, list)?.index)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.params.clone())
            .with_meta("model", "reranker")
            .with_meta("kind", self.kind.name())
            .with_meta("k", self.k)
            .with_meta("input_dim", self.model.input_dim)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.checkpoint().save(&dir.join(reranker_file(self.kind)))
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.meta("model")? != "reranker" {
            return Err(Error::format("checkpoint does not hold a reranker"));
        }
        let kind: RerankerKind = ckpt.meta("kind")?.parse().map_err(|_| Error::format("bad reranker kind"))?;
        let model = Reranker::bind(&ckpt.params, kind)?;
        Ok(Self { kind, k: ckpt.meta_parse("k")?, params: ckpt.params, model })
    }

    pub fn load(dir: &Path, kind: RerankerKind) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(&dir.join(reranker_file(kind)))?)
    }
}

/// Percentage of lists where `model` picks the gold hypothesis; lists
/// without the gold domain count as misses.
pub fn reranker_accuracy(model: &RerankerModel, lists: &[ListExample]) -> Result<f64> {
    let hits = par_map(lists, |l| Ok(l.gold.is_some() && l.gold == Some(model.predict(&l.list)?)))?;
    Ok(percent(hits.iter().filter(|&&h| h).count(), lists.len()))
}

/// Trains one reranker on precomputed lists, early-stopping on dev accuracy.
pub fn train_reranker(
    settings: &HypRankSettings,
    kind: RerankerKind,
    train: &[ListExample],
    dev: &[ListExample],
    seed: u64,
) -> Result<(RerankerModel, Vec<EpochRecord>)> {
    check_k(settings.k)?;
    if let Some(bad) = train.iter().chain(dev).find(|l| l.list.len() != settings.k) {
        return Err(Error::parameter(format!("list of length {} does not match k = {}", bad.list.len(), settings.k)));
    }
    let items = train
        .iter()
        .filter_map(|l| l.gold.map(|g| feature_rows(kind, &l.list).map(|rows| (rows, g))))
        .collect::<Result<Vec<_>>>()?;
    let Some(width) = items.first().map(|(rows, _)| rows[0].len()) else {
        return Err(Error::contract("no hr_train list contains its gold domain"));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"hyprank", kind.name().as_bytes()]));
    let mut params = ParamSet::new();
    let config = HypRankConfig { hidden: settings.hidden, ff_hidden: settings.ff_hidden };
    let model = Reranker::with_input_dim(&mut params, kind, width, config, &mut rng)?;
    let mut current = RerankerModel { kind, k: settings.k, params, model };
    let mut trainer = Trainer::new(&current.params, adam(settings.lr), settings.batch_size, rng.random())?;
    let mut stopping = EarlyStopping::new(settings.patience);
    let mut best = current.params.clone();
    let mut curve = Vec::new();
    for epoch in 0..settings.epochs {
        let model = current.model.clone();
        let loss = trainer.epoch(&mut current.params, &items, |tape, (rows, gold), s| {
            model.loss(tape, rows, *gold, dropout(settings.dropout, s)).map(Some)
        })?;
        let dev_accuracy = reranker_accuracy(&current, dev)?;
        log::info!("{kind} epoch {epoch}: loss {loss:.4}, dev {dev_accuracy:.2}%");
        curve.push(EpochRecord { epoch, train_loss: loss, dev_accuracy });
        if stopping.observe(epoch, dev_accuracy) {
            best = current.params.clone();
        }
        if stopping.should_stop() {
            break;
        }
    }
    current.params = best;
    Ok((current, curve))
}

/// Hypothesis lists of hr_train and hr_dev.
pub struct HypRankData {
    pub train: Vec<ListExample>,
    pub dev: Vec<ListExample>,
}

/// Checks split hygiene and k, then builds the hr_train / hr_dev lists.
pub fn prepare_hyprank_data(
    settings: &HypRankSettings,
    sl: &ShortlisterModel,
    data: &Dataset,
    tables: &LabelTables<f64>,
) -> Result<HypRankData> {
    check_disjoint(&data.splits)?;
    check_k(settings.k)?;
    Ok(HypRankData {
        train: build_lists(sl, &data.catalog, tables, &data.splits.hr_train, settings.k)?,
        dev: build_lists(sl, &data.catalog, tables, &data.splits.hr_dev, settings.k)?,
    })
}

/// Trains every configured reranker kind.
pub fn train_hyprank(
    settings: &HypRankSettings,
    sl: &ShortlisterModel,
    data: &Dataset,
    tables: &LabelTables<f64>,
    seed: u64,
) -> Result<BTreeMap<RerankerKind, (RerankerModel, Vec<EpochRecord>)>> {
    let lists = prepare_hyprank_data(settings, sl, data, tables)?;
    let mut out = BTreeMap::new();
    for kind in settings.kinds()? {
        out.insert(kind, train_reranker(settings, kind, &lists.train, &lists.dev, seed)?);
    }
    Ok(out)
}

/// Writes a learning curve as JSON lines.
pub fn save_curve(path: &Path, curve: &[EpochRecord]) -> Result<()> {
    let mut text = String::new();
    for r in curve {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::format(e.to_string()))?);
        text.push('\n');
    }
    write_text(path, &text)
}

/// Replaces feature `index` of every hypothesis with a gold indicator.
pub fn plant_gold_indicator(lists: &mut [ListExample], index: usize) -> Result<()> {
    for l in lists {
        for (i, h) in l.list.hypotheses.iter_mut().enumerate() {
            let slot = h.features.get_mut(index).ok_or_else(|| Error::parameter(format!("feature {index} out of range")))?;
            *slot = if l.gold == Some(i) { 1.0 } else { 0.0 };
        }
    }
    Ok(())
}

/// Zero tensor of the given shape, as an embedding-table placeholder.
pub fn zero_table(kind: LabelKind, rows: usize) -> Result<LabelEmbeddingTable<f64>> {
    LabelEmbeddingTable::new(kind, Tensor::zeros(&[rows, hyprank_core::embed_pretrain::LABEL_DIM]))
}

#[cfg(test)]
mod tests {
    use hyprank_datagen::{generate_catalog, generate_utterances, GeneratorConfig, SplitSizes};

    use super::*;

    fn tiny_data(n_domains: usize, sizes: SplitSizes, seed: u64) -> Dataset {
        let cfg = GeneratorConfig { n_domains, filler_rate: 0.0, generic_rate: 0.0, ..GeneratorConfig::large_scale(n_domains) };
        let catalog = generate_catalog(&GeneratorConfig { overlap_fraction: 0.0, ..cfg }, seed).unwrap();
        let splits = generate_utterances(&catalog, &sizes, seed).unwrap();
        Dataset { catalog, splits }
    }

    fn tiny_settings() -> ShortlisterSettings {
        ShortlisterSettings { char_dim: 4, char_hidden: 4, word_dim: 8, word_hidden: 8, epochs: 0, ..Default::default() }
    }

    fn zero_tables(cat: &DomainCatalog) -> LabelTables<f64> {
        LabelTables::new(
            zero_table(LabelKind::Domain, cat.n_domains()).unwrap(),
            zero_table(LabelKind::Intent, cat.n_intents()).unwrap(),
            zero_table(LabelKind::Slot, cat.n_slot_types()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_returns_the_initialization() {
        let data = tiny_data(8, SplitSizes { sl_train: 40, sl_dev: 10, hr_train: 10, hr_dev: 10, test: 10 }, 1);
        let (a, curve) = train_shortlister(&tiny_settings(), &data, 3).unwrap();
        assert!(curve.is_empty());
        let (chars, words) = build_vocabs(&data.splits.sl_train);
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(3, &[b"shortlister"]));
        Shortlister::new(&mut params, tiny_settings().variant().unwrap(), tiny_settings().encoder(), chars.len(), words.len(), 8, &mut rng)
            .unwrap();
        assert!(a.params.bitwise_eq(&params));
    }

    #[test]
    fn shortlister_save_load_replays_scores() {
        let data = tiny_data(8, SplitSizes { sl_train: 40, sl_dev: 10, hr_train: 10, hr_dev: 10, test: 10 }, 2);
        let (sl, _) = train_shortlister(&ShortlisterSettings { epochs: 1, ..tiny_settings() }, &data, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        sl.save(dir.path()).unwrap();
        let back = ShortlisterModel::load(dir.path()).unwrap();
        assert!(back.params.bitwise_eq(&sl.params));
        let ex = &data.splits.test[0];
        let (a, b) = (sl.scores(&ex.tokens).unwrap(), back.scores(&ex.tokens).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn overlapping_splits_are_rejected() {
        let mut data = tiny_data(8, SplitSizes { sl_train: 40, sl_dev: 10, hr_train: 10, hr_dev: 10, test: 10 }, 5);
        data.splits.hr_train.push(data.splits.sl_train[3].clone());
        let err = check_disjoint(&data.splits).unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "{err}");
        let (sl, _) = train_shortlister(&tiny_settings(), &data, 1).unwrap();
        let tables = zero_tables(&data.catalog);
        let settings = HypRankSettings { models: vec!["LR".into()], ..Default::default() };
        assert!(matches!(train_hyprank(&settings, &sl, &data, &tables, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn k_of_one_is_refused() {
        let data = tiny_data(8, SplitSizes { sl_train: 40, sl_dev: 10, hr_train: 10, hr_dev: 10, test: 10 }, 6);
        let (sl, _) = train_shortlister(&tiny_settings(), &data, 1).unwrap();
        let tables = zero_tables(&data.catalog);
        let settings = HypRankSettings { k: 1, models: vec!["LSTM_C".into()], ..Default::default() };
        let err = train_hyprank(&settings, &sl, &data, &tables, 0).unwrap_err();
        assert!(matches!(err, Error::Parameter(ref m) if m.contains("k = 1")), "{err}");
        // Every model trivially picks the only hypothesis.
        let lists = build_lists(&sl, &data.catalog, &tables, &data.splits.test, 1).unwrap();
        let mut params = ParamSet::new();
        let model = Reranker::new(&mut params, RerankerKind::LstmC, HypRankConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let m = RerankerModel { kind: RerankerKind::LstmC, k: 1, params, model };
        assert!(lists.iter().all(|l| m.predict(&l.list).unwrap() == 0));
    }

    #[test]
    fn reranker_training_is_deterministic_and_round_trips() {
        let data = tiny_data(10, SplitSizes { sl_train: 80, sl_dev: 20, hr_train: 40, hr_dev: 20, test: 20 }, 7);
        let (sl, _) = train_shortlister(&ShortlisterSettings { epochs: 1, ..tiny_settings() }, &data, 2).unwrap();
        let tables = zero_tables(&data.catalog);
        let settings = HypRankSettings { models: vec!["LSTM_C".into(), "N_PA".into()], hidden: 4, ff_hidden: 4, epochs: 2, ..Default::default() };
        let a = train_hyprank(&settings, &sl, &data, &tables, 9).unwrap();
        let b = train_hyprank(&settings, &sl, &data, &tables, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (kind, (m, curve)) in &a {
            assert!(m.params.bitwise_eq(&b[kind].0.params));
            assert_eq!(curve.len(), 2);
            m.save(dir.path()).unwrap();
            let back = RerankerModel::load(dir.path(), *kind).unwrap();
            assert!(back.params.bitwise_eq(&m.params));
            assert_eq!((back.kind, back.k, &back.model), (m.kind, m.k, &m.model));
        }
    }

    #[test]
    fn tables_round_trip() {
        let data = tiny_data(8, SplitSizes { sl_train: 40, sl_dev: 10, hr_train: 10, hr_dev: 10, test: 10 }, 8);
        let (_, words) = build_vocabs(&data.splits.sl_train);
        let settings = PretrainSettings { epochs: 1, max_examples: 20, ..Default::default() };
        let tables = pretrain_tables(&settings, &data.catalog, &data.splits.sl_train, &words, 3).unwrap();
        assert_eq!(tables.domain.n_labels(), 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LABELS_FILE);
        save_tables(&path, &tables).unwrap();
        let back = load_tables(&path).unwrap();
        for (a, b) in [(&back.domain, &tables.domain), (&back.intent, &tables.intent), (&back.slot, &tables.slot)] {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.table.shape(), b.table.shape());
            assert!(a.table.data().iter().zip(b.table.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
