//! Pre-trained domain, intent and slot label embeddings.
//!
//! A small word-level BiLSTM classifier (two 25-dim directions) is trained to
//! predict a label from the utterance; the rows of its `n_labels × 50` output
//! projection become the label embeddings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamConfig, ParamId, ParamSet, Tape, Tensor, Var};
use crate::encoder::{dropout_mask, embedding_table};
use crate::error::{Error, Result};
use crate::nn::{BiLstm, Dropout, Linear};
use crate::scalar::Scalar;
use crate::shortlister::LOG_EPS;
use crate::train::Trainer;

/// Width of every label embedding.
pub const LABEL_DIM: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelKind {
    Domain,
    Intent,
    Slot,
}

impl LabelKind {
    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Domain => "domain",
            LabelKind::Intent => "intent",
            LabelKind::Slot => "slot",
        }
    }

    /// Slots are multi-label and use one-vs-rest targets.
    pub fn is_multi_label(self) -> bool {
        self == LabelKind::Slot
    }
}

impl std::str::FromStr for LabelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "domain" => Ok(LabelKind::Domain),
            "intent" => Ok(LabelKind::Intent),
            "slot" => Ok(LabelKind::Slot),
            _ => Err(Error::parameter(format!("unknown label kind {s:?}"))),
        }
    }
}

/// `n_labels × 50` embedding rows for one label space.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelEmbeddingTable<T> {
    pub kind: LabelKind,
    pub table: Tensor<T>,
}

impl<T: Scalar> LabelEmbeddingTable<T> {
    pub fn new(kind: LabelKind, table: Tensor<T>) -> Result<Self> {
        if table.shape().len() != 2 || table.cols() != LABEL_DIM {
            return Err(Error::shape(format!("label table must be n × {LABEL_DIM}, got {:?}", table.shape())));
        }
        if !table.all_finite() {
            return Err(Error::Numeric(format!("{} table has non-finite entries", kind.name())));
        }
        Ok(Self { kind, table })
    }

    pub fn n_labels(&self) -> usize {
        self.table.rows()
    }

    pub fn row(&self, id: usize) -> Result<&[T]> {
        if id >= self.n_labels() {
            return Err(Error::parameter(format!("{} id {id} outside 0..{}", self.kind.name(), self.n_labels())));
        }
        Ok(self.table.row(id))
    }
}

/// Sum of the rows of `slots`; zero for an empty list.
pub fn combine_slot_embeddings<T: Scalar>(slots: &[usize], table: &LabelEmbeddingTable<T>) -> Result<Vec<T>> {
    if table.kind != LabelKind::Slot {
        return Err(Error::contract(format!("expected a slot table, got {}", table.kind.name())));
    }
    let mut out = vec![T::zero(); LABEL_DIM];
    for &s in slots {
        for (o, &v) in out.iter_mut().zip(table.row(s)?) {
            *o = *o + v;
        }
    }
    Ok(out)
}

/// One training utterance: word ids and its label ids (exactly one for
/// domains/intents, any number for slots).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelledUtterance {
    pub words: Vec<usize>,
    pub labels: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainConfig {
    pub word_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { word_dim: 100, hidden: LABEL_DIM / 2, epochs: 3, batch_size: 32, dropout: 0.2, adam: AdamConfig::default() }
    }
}

/// The label classifier used for pre-training.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelClassifier {
    pub kind: LabelKind,
    pub word_emb: ParamId,
    pub bilstm: BiLstm,
    pub proj: Linear,
}

impl LabelClassifier {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        kind: LabelKind,
        config: &PretrainConfig,
        n_words: usize,
        n_labels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if 2 * config.hidden != LABEL_DIM {
            return Err(Error::parameter(format!("pre-trainer states must concatenate to {LABEL_DIM}")));
        }
        if n_labels == 0 || n_words == 0 {
            return Err(Error::parameter("empty label or word vocabulary"));
        }
        let word_emb = params.insert("pre.word_emb", embedding_table(rng, n_words, config.word_dim));
        let bilstm = BiLstm::new(params, "pre.lstm", config.word_dim, config.hidden, rng);
        let proj = Linear::new(params, "pre.proj", LABEL_DIM, n_labels, rng);
        Ok(Self { kind, word_emb, bilstm, proj })
    }

    pub fn logits<T: Scalar>(&self, tape: &mut Tape<'_, T>, words: &[usize], dropout: Option<Dropout>) -> Result<Var> {
        if words.is_empty() {
            return Err(Error::contract("cannot encode an empty utterance"));
        }
        let table = tape.param(self.word_emb);
        let width = tape.shape(table)[1];
        let mask = dropout_mask(tape, dropout, width)?;
        let mut inputs = Vec::with_capacity(words.len());
        for &w in words {
            let e = tape.gather_row(table, w)?;
            inputs.push(match mask {
                Some(m) => tape.mul(e, m)?,
                None => e,
            });
        }
        let h = self.bilstm.encode_final(tape, &inputs)?;
        self.proj.forward(tape, h)
    }

    pub fn loss<T: Scalar>(&self, tape: &mut Tape<'_, T>, ex: &LabelledUtterance, dropout: Option<Dropout>) -> Result<Var> {
        let n = self.proj.output;
        if let Some(&bad) = ex.labels.iter().find(|&&l| l >= n) {
            return Err(Error::parameter(format!("{} id {bad} outside 0..{n}", self.kind.name())));
        }
        let logits = self.logits(tape, &ex.words, dropout)?;
        if self.kind.is_multi_label() {
            // −Σ [y log σ(z) + (1 − y) log σ(−z)]
            let pos = tape.log_sigmoid(logits);
            let flipped = tape.scale(logits, -T::one());
            let neg = tape.log_sigmoid(flipped);
            let mut wp = vec![T::zero(); n];
            for &l in &ex.labels {
                wp[l] = -T::one();
            }
            let wn = wp.iter().map(|&w| -T::one() - w).collect();
            let a = tape.weighted_sum(pos, wp)?;
            let b = tape.weighted_sum(neg, wn)?;
            tape.add(a, b)
        } else {
            let [gold] = ex.labels[..] else {
                return Err(Error::contract(format!("{} examples need exactly one label", self.kind.name())));
            };
            let lp = tape.log_softmax(logits)?;
            let lp = tape.clamp_min(lp, T::lit(LOG_EPS.ln()));
            let mut w = vec![T::zero(); n];
            w[gold] = -T::one();
            tape.weighted_sum(lp, w)
        }
    }

    /// Projection rows, with labels that never occur in `seen` zeroed.
    pub fn extract<T: Scalar>(&self, params: &ParamSet<T>, seen: &[bool]) -> Result<LabelEmbeddingTable<T>> {
        let mut table = params.get(self.proj.w).clone().with_grad(false);
        let cols = table.cols();
        for (id, _) in seen.iter().enumerate().filter(|(_, s)| !**s) {
            log::warn!("{} label {id} absent from the pre-training corpus; using a zero embedding", self.kind.name());
            table.data_mut()[id * cols..(id + 1) * cols].fill(T::zero());
        }
        LabelEmbeddingTable::new(self.kind, table)
    }
}

/// Result of [`pretrain_label_embeddings`].
pub struct Pretrained<T> {
    pub table: LabelEmbeddingTable<T>,
    pub epoch_losses: Vec<f64>,
}

/// Trains a label classifier on `corpus` and extracts its projection rows.
pub fn pretrain_label_embeddings<T: Scalar>(
    corpus: &[LabelledUtterance],
    kind: LabelKind,
    n_words: usize,
    n_labels: usize,
    config: &PretrainConfig,
    seed: u64,
) -> Result<Pretrained<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let model = LabelClassifier::new(&mut params, kind, config, n_words, n_labels, &mut rng)?;
    let mut seen = vec![false; n_labels];
    for ex in corpus {
        for &l in &ex.labels {
            *seen.get_mut(l).ok_or_else(|| Error::parameter(format!("{} id {l} outside 0..{n_labels}", kind.name())))? =
                true;
        }
    }
    let mut trainer = Trainer::new(&params, config.adam, config.batch_size, rng.random())?;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let loss = trainer.epoch(&mut params, corpus, |tape, ex, s| {
            let dropout = Some(Dropout { rate: config.dropout, seed: s });
            model.loss(tape, ex, dropout).map(Some)
        })?;
        log::info!("pretrain {} epoch {epoch}: loss {loss:.4}", kind.name());
        epoch_losses.push(loss);
    }
    Ok(Pretrained { table: model.extract(&params, &seen)?, epoch_losses })
}
