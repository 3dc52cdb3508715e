//! Domain scoring over the utterance encoding, its two training losses, and
//! k-best extraction.

use num_traits::Num;
use rand::Rng;

use crate::autodiff::{ParamSet, Tape, Var};
use crate::encoder::{EncoderConfig, EncoderParams, Utterance};
use crate::error::{Error, Result};
use crate::nn::{Dropout, Linear};
use crate::scalar::Scalar;

/// Probabilities below this are clamped before taking logs.
pub const LOG_EPS: f64 = 1e-12;

/// Output layer flavour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SoftmaxVariant {
    /// One softmax over all `n` domains.
    A,
    /// An independent in/out two-way softmax per domain.
    B,
}

impl SoftmaxVariant {
    pub fn name(self) -> &'static str {
        match self {
            SoftmaxVariant::A => "a",
            SoftmaxVariant::B => "b",
        }
    }
}

impl std::str::FromStr for SoftmaxVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "softmax_a" => Ok(SoftmaxVariant::A),
            "b" | "softmax_b" => Ok(SoftmaxVariant::B),
            _ => Err(Error::parameter(format!("unknown softmax variant {s:?}"))),
        }
    }
}

/// Encoder plus output projection. For variant B the projection holds all
/// per-domain `2 × d` blocks stacked into one `2n × d` matrix; rows `2i` and
/// `2i + 1` are the in-domain and out-of-domain rows of domain `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shortlister {
    pub encoder: EncoderParams,
    pub variant: SoftmaxVariant,
    pub proj: Linear,
    pub n_domains: usize,
}

const ENCODER: &str = "sl.enc";
const PROJ_A: &str = "sl.proj_a";
const PROJ_B: &str = "sl.proj_b";

impl Shortlister {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        variant: SoftmaxVariant,
        config: EncoderConfig,
        n_chars: usize,
        n_words: usize,
        n_domains: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_domains < 2 {
            return Err(Error::parameter(format!("need at least 2 domains, got {n_domains}")));
        }
        let encoder = EncoderParams::new(params, ENCODER, config, n_chars, n_words, rng);
        let proj = match variant {
            SoftmaxVariant::A => Linear::new(params, PROJ_A, config.output_dim(), n_domains, rng),
            SoftmaxVariant::B => Linear::new(params, PROJ_B, config.output_dim(), 2 * n_domains, rng),
        };
        Ok(Self { encoder, variant, proj, n_domains })
    }

    /// Recovers the model layout from a loaded parameter set.
    pub fn bind<T: Scalar>(params: &ParamSet<T>) -> Result<Self> {
        let encoder = EncoderParams::bind(params, ENCODER).ok_or_else(|| Error::format("missing shortlister encoder"))?;
        let (variant, proj) = if let Some(p) = Linear::bind(params, PROJ_A) {
            (SoftmaxVariant::A, p)
        } else if let Some(p) = Linear::bind(params, PROJ_B) {
            (SoftmaxVariant::B, p)
        } else {
            return Err(Error::format("missing shortlister projection"));
        };
        let n_domains = match variant {
            SoftmaxVariant::A => proj.output,
            SoftmaxVariant::B => proj.output / 2,
        };
        Ok(Self { encoder, variant, proj, n_domains })
    }

    /// Raw logits: `n` for variant A, `2n` interleaved pairs for variant B.
    pub fn logits<T: Scalar>(&self, tape: &mut Tape<'_, T>, utt: &Utterance, dropout: Option<Dropout>) -> Result<Var> {
        let h = self.encoder.encode_utterance(tape, utt, dropout)?;
        self.proj.forward(tape, h)
    }

    /// Per-domain confidence: the softmax distribution for variant A, the
    /// in-domain probability of each pair for variant B.
    pub fn score_from_logits<T: Scalar>(&self, tape: &mut Tape<'_, T>, logits: Var) -> Result<Vec<T>> {
        match self.variant {
            SoftmaxVariant::A => {
                let o = tape.softmax(logits)?;
                Ok(tape.value(o).to_vec())
            }
            SoftmaxVariant::B => {
                let o = tape.softmax_rows(logits, 2)?;
                Ok(tape.value(o).iter().step_by(2).copied().collect())
            }
        }
    }

    pub fn score<T: Scalar>(&self, params: &ParamSet<T>, utt: &Utterance) -> Result<Vec<T>> {
        let mut tape = Tape::new(params);
        let logits = self.logits(&mut tape, utt, None)?;
        self.score_from_logits(&mut tape, logits)
    }

    /// Training loss for one utterance with gold domain `gold`.
    pub fn loss<T: Scalar>(&self, tape: &mut Tape<'_, T>, utt: &Utterance, gold: usize, dropout: Option<Dropout>) -> Result<Var> {
        if gold >= self.n_domains {
            return Err(Error::contract(format!("gold domain {gold} outside 0..{}", self.n_domains)));
        }
        let logits = self.logits(tape, utt, dropout)?;
        let floor = T::lit(LOG_EPS.ln());
        match self.variant {
            SoftmaxVariant::A => {
                let lp = tape.log_softmax(logits)?;
                let lp = tape.clamp_min(lp, floor);
                let mut w = vec![T::zero(); self.n_domains];
                w[gold] = -T::one();
                tape.weighted_sum(lp, w)
            }
            SoftmaxVariant::B => {
                let lp = tape.log_softmax_rows(logits, 2)?;
                let lp = tape.clamp_min(lp, floor);
                let (pos, neg) = loss_b_weights::<T>(self.n_domains, gold)?;
                let w = pos.into_iter().zip(neg).flat_map(|(p, n)| [-p, -n]).collect();
                tape.weighted_sum(lp, w)
            }
        }
    }
}

fn check_one_hot<T: Scalar>(l: &[T], n: usize) -> Result<usize> {
    if l.len() != n {
        return Err(Error::contract(format!("label length {} for {n} classes", l.len())));
    }
    let mut hot = None;
    for (i, &v) in l.iter().enumerate() {
        if v == T::one() && hot.is_none() {
            hot = Some(i);
        } else if v != T::zero() {
            return Err(Error::contract("label is not one-hot"));
        }
    }
    hot.ok_or_else(|| Error::contract("label is not one-hot"))
}

fn clamped_ln<T: Scalar>(p: T) -> T {
    p.max(T::lit(LOG_EPS)).ln()
}

/// `−Σ lᵢ log oᵢ` over a probability vector.
pub fn loss_a<T: Scalar>(o: &[T], l: &[T]) -> Result<T> {
    let gold = check_one_hot(l, o.len())?;
    Ok(-clamped_ln(o[gold]))
}

/// Coefficients of `log o₁ⁱ` and `log o₂ⁱ`: `lᵢ` and `(1 − lᵢ)/(n − 1)`.
/// Generic over any numeric field so the weights can be checked exactly.
pub fn loss_b_weights<R: Num + Clone>(n: usize, gold: usize) -> Result<(Vec<R>, Vec<R>)> {
    if n < 2 {
        return Err(Error::parameter(format!("two-way loss needs n >= 2, got {n}")));
    }
    if gold >= n {
        return Err(Error::contract(format!("gold index {gold} outside 0..{n}")));
    }
    let n_minus_1 = (1..n).fold(R::zero(), |acc, _| acc + R::one());
    let neg = R::one() / n_minus_1;
    let pos = (0..n).map(|i| if i == gold { R::one() } else { R::zero() }).collect();
    let negs = (0..n).map(|i| if i == gold { R::zero() } else { neg.clone() }).collect();
    Ok((pos, negs))
}

/// `−Σᵢ { lᵢ log o₁ⁱ + ((1 − lᵢ)/(n − 1)) log o₂ⁱ }`.
pub fn loss_b<T: Scalar>(pairs: &[(T, T)], l: &[T]) -> Result<T> {
    let gold = check_one_hot(l, pairs.len())?;
    let (pos, neg) = loss_b_weights::<T>(pairs.len(), gold)?;
    Ok(-pairs
        .iter()
        .zip(pos.iter().zip(&neg))
        .map(|(&(o1, o2), (&p, &q))| p * clamped_ln(o1) + q * clamped_ln(o2))
        .sum::<T>())
}

/// Top-k domains with their confidences.
#[derive(Clone, Debug, PartialEq)]
pub struct KBestList<T> {
    pub entries: Vec<(usize, T)>,
}

impl<T: Copy> KBestList<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domains(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn position(&self, domain: usize) -> Option<usize> {
        self.domains().position(|d| d == domain)
    }

    pub fn contains(&self, domain: usize) -> bool {
        self.position(domain).is_some()
    }
}

/// Highest `k` scores, ties resolved toward the lower domain id.
pub fn k_best<T: Scalar>(scores: &[T], k: usize) -> Result<KBestList<T>> {
    if k == 0 || k > scores.len() {
        return Err(Error::parameter(format!("k = {k} outside 1..={}", scores.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("score {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite").then(a.cmp(&b)));
    Ok(KBestList { entries: order[..k].iter().map(|&i| (i, scores[i])).collect() })
}
