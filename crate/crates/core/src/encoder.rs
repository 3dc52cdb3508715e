//! Orthography-sensitive word representations and the utterance BiLSTM.
//!
//! Each word is represented by the final states of a character BiLSTM joined
//! with its word embedding (`25 + 25 + 100 = 150` with the default sizes). A
//! word-level BiLSTM then reads those vectors and the utterance encoding is
//! the last forward state joined with the first backward state (`200`).

use std::collections::{BTreeSet, HashMap};
use std::fmt::Display;
use std::hash::Hash;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{sample_mask, ParamId, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{BiLstm, BiStates, Dropout};
use crate::scalar::Scalar;

/// Line used for the unknown token in serialized vocabularies.
pub const UNK_LINE: &str = "<unk>";

/// Dense token → id map. Id 0 is reserved for unknown tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab<K: Hash + Eq> {
    tokens: Vec<K>,
    id_of: HashMap<K, usize>,
}

pub type CharVocab = Vocab<char>;
pub type WordVocab = Vocab<String>;

impl<K: Ord + Hash + Clone + Display + FromStr> Vocab<K> {
    pub const UNK_ID: usize = 0;

    /// Builds a vocabulary from every token in `tokens`, ordered so the
    /// result does not depend on iteration order.
    pub fn build(tokens: impl IntoIterator<Item = K>) -> Self {
        let sorted: BTreeSet<K> = tokens.into_iter().collect();
        Self::from_tokens(sorted.into_iter().collect())
    }

    fn from_tokens(tokens: Vec<K>) -> Self {
        let id_of = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i + 1)).collect();
        Self { tokens, id_of }
    }

    /// Number of ids, including the unknown id.
    pub fn len(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unk_id(&self) -> usize {
        Self::UNK_ID
    }

    /// Id of `token`, or the unknown id.
    pub fn id<Q>(&self, token: &Q) -> usize
    where
        K: std::borrow::Borrow<Q>,
        Q: Hash + Eq + ?Sized,
    {
        self.id_of.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&K> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// One token per line, the unknown marker first.
    pub fn to_lines(&self) -> String {
        let mut out = String::from(UNK_LINE);
        out.push('\n');
        for t in &self.tokens {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(UNK_LINE) {
            return Err(Error::format(format!("vocabulary must start with {UNK_LINE}")));
        }
        let tokens = lines
            .map(|l| l.parse::<K>().map_err(|_| Error::format(format!("bad vocabulary entry {l:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let vocab = Self::from_tokens(tokens);
        if vocab.id_of.len() != vocab.tokens.len() {
            return Err(Error::format("duplicate vocabulary entry"));
        }
        Ok(vocab)
    }
}

/// A tokenized utterance as word ids plus per-word character ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
}

impl Utterance {
    pub fn new(words: Vec<usize>, chars: Vec<Vec<usize>>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::contract("utterance has no words"));
        }
        if words.len() != chars.len() || chars.iter().any(Vec::is_empty) {
            return Err(Error::contract("every word needs at least one character"));
        }
        Ok(Self { words, chars })
    }

    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], chars: &CharVocab, words: &WordVocab) -> Result<Self> {
        Self::new(
            tokens.iter().map(|t| words.id(t.as_ref())).collect(),
            tokens.iter().map(|t| t.as_ref().chars().map(|c| chars.id(&c)).collect()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Layer sizes of the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub char_dim: usize,
    pub char_hidden: usize,
    pub word_dim: usize,
    pub word_hidden: usize,
}

impl EncoderConfig {
    /// 25-dim characters, 25-dim char states, 100-dim words, 100-dim word states.
    pub const STANDARD: Self = Self { char_dim: 25, char_hidden: 25, word_dim: 100, word_hidden: 100 };

    /// Length of one word representation `v_i`.
    pub fn word_repr_dim(&self) -> usize {
        2 * self.char_hidden + self.word_dim
    }

    /// Length of the utterance encoding `h`.
    pub fn output_dim(&self) -> usize {
        2 * self.word_hidden
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::STANDARD
    }
}

const EMBED_INIT: f64 = 0.1;

pub(crate) fn embedding_table<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, dim: usize) -> Tensor<T> {
    let data = (0..rows * dim).map(|_| T::lit(rng.random_range(-EMBED_INIT..=EMBED_INIT))).collect();
    Tensor::matrix(rows, dim, data).expect("non-empty").with_grad(true)
}

/// Builds a per-sequence dropout mask node, or `None` when dropout is off.
pub(crate) fn dropout_mask<T: Scalar>(tape: &mut Tape<'_, T>, dropout: Option<Dropout>, width: usize) -> Result<Option<Var>> {
    match dropout {
        Some(d) if d.rate > 0.0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
            let mask = sample_mask::<T, _>(&[width], d.rate, &mut rng)?;
            Ok(Some(tape.input(mask)))
        }
        Some(d) if d.rate < 0.0 => Err(Error::parameter(format!("dropout rate {}", d.rate))),
        _ => Ok(None),
    }
}

/// Parameter handles of the character/word encoder inside a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub char_emb: ParamId,
    pub word_emb: ParamId,
    pub char_lstm: BiLstm,
    pub word_lstm: BiLstm,
}

impl EncoderParams {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        config: EncoderConfig,
        n_chars: usize,
        n_words: usize,
        rng: &mut R,
    ) -> Self {
        let char_emb = params.insert(format!("{name}.char_emb"), embedding_table(rng, n_chars, config.char_dim));
        let word_emb = params.insert(format!("{name}.word_emb"), embedding_table(rng, n_words, config.word_dim));
        let char_lstm = BiLstm::new(params, &format!("{name}.char_lstm"), config.char_dim, config.char_hidden, rng);
        let word_lstm =
            BiLstm::new(params, &format!("{name}.word_lstm"), config.word_repr_dim(), config.word_hidden, rng);
        Self { config, char_emb, word_emb, char_lstm, word_lstm }
    }

    pub fn bind<T: Scalar>(params: &ParamSet<T>, name: &str) -> Option<Self> {
        let char_emb = params.id_of(&format!("{name}.char_emb"))?;
        let word_emb = params.id_of(&format!("{name}.word_emb"))?;
        let char_lstm = BiLstm::bind(params, &format!("{name}.char_lstm"))?;
        let word_lstm = BiLstm::bind(params, &format!("{name}.word_lstm"))?;
        let config = EncoderConfig {
            char_dim: params.get(char_emb).cols(),
            char_hidden: char_lstm.hidden(),
            word_dim: params.get(word_emb).cols(),
            word_hidden: word_lstm.hidden(),
        };
        Some(Self { config, char_emb, word_emb, char_lstm, word_lstm })
    }

    pub fn n_chars<T: Scalar>(&self, params: &ParamSet<T>) -> usize {
        params.get(self.char_emb).rows()
    }

    pub fn n_words<T: Scalar>(&self, params: &ParamSet<T>) -> usize {
        params.get(self.word_emb).rows()
    }

    /// `v = f^C_{|w|} ⊕ b^C_1 ⊕ e_w`.
    pub fn embed_word<T: Scalar>(&self, tape: &mut Tape<'_, T>, chars: &[usize], word: usize) -> Result<Var> {
        if chars.is_empty() {
            return Err(Error::contract("word has no characters"));
        }
        let table = tape.param(self.char_emb);
        let char_vecs = chars.iter().map(|&c| tape.gather_row(table, c)).collect::<Result<Vec<_>>>()?;
        let char_state = self.char_lstm.encode_final(tape, &char_vecs)?;
        let words = tape.param(self.word_emb);
        let e_w = tape.gather_row(words, word)?;
        Ok(tape.concat(&[char_state, e_w]))
    }

    /// Word-level BiLSTM states for every position. Dropout, when given,
    /// draws one mask and applies it to every word input.
    pub fn word_states<T: Scalar>(&self, tape: &mut Tape<'_, T>, utt: &Utterance, dropout: Option<Dropout>) -> Result<BiStates> {
        if utt.is_empty() {
            return Err(Error::contract("cannot encode an empty utterance"));
        }
        let mask = dropout_mask(tape, dropout, self.config.word_repr_dim())?;
        let mut inputs = Vec::with_capacity(utt.len());
        for (chars, &word) in utt.chars.iter().zip(&utt.words) {
            let v = self.embed_word(tape, chars, word)?;
            inputs.push(match mask {
                Some(m) => tape.mul(v, m)?,
                None => v,
            });
        }
        self.word_lstm.run(tape, &inputs)
    }

    /// `h = f^W_m ⊕ b^W_1`.
    pub fn encode_utterance<T: Scalar>(&self, tape: &mut Tape<'_, T>, utt: &Utterance, dropout: Option<Dropout>) -> Result<Var> {
        let states = self.word_states(tape, utt, dropout)?;
        let f = self.word_lstm.fwd.hidden_of(tape, *states.fwd.last().expect("non-empty"))?;
        let b = self.word_lstm.bwd.hidden_of(tape, states.bwd[0])?;
        Ok(tape.concat(&[f, b]))
    }
}
