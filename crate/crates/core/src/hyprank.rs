//! Hypothesis rerankers: the list-wise BiLSTM model in four input variants
//! and the point-wise, pair-wise and logistic baselines.

use rand::Rng;

use crate::autodiff::{ParamSet, Tape, Var};
use crate::encoder::dropout_mask;
use crate::error::{Error, Result};
use crate::hypothesis::{layout, manual_cross_features, HypothesisList};
use crate::nn::{BiLstm, Dropout, Linear};
use crate::scalar::Scalar;
use crate::shortlister::{loss_a, LOG_EPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RerankerKind {
    /// Logistic regression on each hypothesis vector.
    Lr,
    /// Point-wise feed-forward scorer.
    NPo,
    /// Pair-wise feed-forward comparator run as a tournament.
    NPa,
    /// Point-wise scorer with manual cross-hypothesis features.
    NCh,
    /// BiLSTM states only.
    LstmO,
    /// Hypothesis vector plus projected BiLSTM states.
    LstmS,
    /// Hypothesis vector concatenated with BiLSTM states.
    LstmC,
    /// As `LstmC` with manual cross-hypothesis features.
    LstmCh,
}

impl RerankerKind {
    pub const ALL: [RerankerKind; 8] = [
        RerankerKind::Lr,
        RerankerKind::NPo,
        RerankerKind::NPa,
        RerankerKind::NCh,
        RerankerKind::LstmO,
        RerankerKind::LstmS,
        RerankerKind::LstmC,
        RerankerKind::LstmCh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RerankerKind::Lr => "LR",
            RerankerKind::NPo => "N_PO",
            RerankerKind::NPa => "N_PA",
            RerankerKind::NCh => "N_CH",
            RerankerKind::LstmO => "LSTM_O",
            RerankerKind::LstmS => "LSTM_S",
            RerankerKind::LstmC => "LSTM_C",
            RerankerKind::LstmCh => "LSTM_CH",
        }
    }

    pub fn is_listwise(self) -> bool {
        matches!(self, RerankerKind::LstmO | RerankerKind::LstmS | RerankerKind::LstmC | RerankerKind::LstmCh)
    }

    pub fn uses_cross_features(self) -> bool {
        matches!(self, RerankerKind::NCh | RerankerKind::LstmCh)
    }

    /// Width of the per-hypothesis input row.
    pub fn input_dim(self) -> usize {
        if self.uses_cross_features() {
            layout::DIM_WITH_CROSS
        } else {
            layout::DIM
        }
    }
}

impl std::fmt::Display for RerankerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RerankerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::parameter(format!("unknown reranker {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HypRankConfig {
    /// Per-direction BiLSTM state size.
    pub hidden: usize,
    /// Feed-forward hidden size.
    pub ff_hidden: usize,
}

impl Default for HypRankConfig {
    fn default() -> Self {
        Self { hidden: 64, ff_hidden: 64 }
    }
}

/// Input rows for `kind`: the hypothesis vectors, extended with the manual
/// cross-hypothesis features when the kind uses them.
pub fn feature_rows<T: Scalar>(kind: RerankerKind, list: &HypothesisList<T>) -> Result<Vec<Vec<T>>> {
    if list.is_empty() {
        return Err(Error::contract("hypothesis list is empty"));
    }
    let mut rows: Vec<Vec<T>> = list.hypotheses.iter().map(|h| h.features.clone()).collect();
    if kind.uses_cross_features() {
        for (row, extra) in rows.iter_mut().zip(manual_cross_features(list)?) {
            row.extend_from_slice(&extra);
        }
    }
    Ok(rows)
}

/// Result of scoring one hypothesis list.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub index: usize,
    /// Per-hypothesis scores: the list softmax for list-wise models, the
    /// sigmoid output for point-wise ones; empty for the tournament.
    pub scores: Vec<T>,
    pub comparisons: usize,
}

/// Position of the largest value, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Sequential tournament: the champion starts as hypothesis 0 and each later
/// hypothesis challenges it once. `challenger_wins(champion, challenger)`
/// decides each match. Returns the winner and the number of comparisons.
pub fn tournament<F>(k: usize, mut challenger_wins: F) -> Result<(usize, usize)>
where
    F: FnMut(usize, usize) -> Result<bool>,
{
    if k == 0 {
        return Err(Error::contract("cannot run a tournament over zero hypotheses"));
    }
    let mut champion = 0;
    let mut comparisons = 0;
    for challenger in 1..k {
        comparisons += 1;
        if challenger_wins(champion, challenger)? {
            champion = challenger;
        }
    }
    Ok((champion, comparisons))
}

/// Cross-entropy of the list softmax against the gold position.
pub fn loss_r<T: Scalar>(o: &[T], l: &[T]) -> Result<T> {
    loss_a(o, l)
}

/// Any reranker. Parts not used by `kind` are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reranker {
    pub kind: RerankerKind,
    pub input_dim: usize,
    pub bilstm: Option<BiLstm>,
    pub proj_s: Option<Linear>,
    pub hidden: Option<Linear>,
    pub out: Linear,
}

const PREFIX: &str = "hr";

impl Reranker {
    /// Builds a reranker with the standard input width for `kind`.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        kind: RerankerKind,
        config: HypRankConfig,
        rng: &mut R,
    ) -> Result<Self> {
        Self::with_input_dim(params, kind, kind.input_dim(), config, rng)
    }

    /// Builds a reranker over rows of width `input_dim`.
    pub fn with_input_dim<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        kind: RerankerKind,
        input_dim: usize,
        config: HypRankConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || config.hidden == 0 || config.ff_hidden == 0 {
            return Err(Error::parameter(format!("invalid reranker sizes {config:?}, input {input_dim}")));
        }
        let name = |part: &str| format!("{PREFIX}.{part}");
        let f = config.ff_hidden;
        let mut bilstm = None;
        let mut proj_s = None;
        let (hidden, out) = match kind {
            RerankerKind::Lr => (None, Linear::new(params, &name("out"), input_dim, 1, rng)),
            RerankerKind::NPo | RerankerKind::NCh => (
                Some(Linear::new(params, &name("hidden"), input_dim, f, rng)),
                Linear::new(params, &name("out"), f, 1, rng),
            ),
            RerankerKind::NPa => (
                Some(Linear::new(params, &name("hidden"), 2 * input_dim, f, rng)),
                Linear::new(params, &name("out"), f, 2, rng),
            ),
            RerankerKind::LstmO | RerankerKind::LstmS | RerankerKind::LstmC | RerankerKind::LstmCh => {
                let h2 = 2 * config.hidden;
                bilstm = Some(BiLstm::new(params, &name("lstm"), input_dim, config.hidden, rng));
                let g = match kind {
                    RerankerKind::LstmO => h2,
                    RerankerKind::LstmS => {
                        proj_s = Some(Linear::new(params, &name("proj_s"), h2, input_dim, rng));
                        input_dim
                    }
                    _ => input_dim + h2,
                };
                (Some(Linear::new(params, &name("hidden"), g, f, rng)), Linear::new(params, &name("out"), f, 1, rng))
            }
        };
        Ok(Self { kind, input_dim, bilstm, proj_s, hidden, out })
    }

    /// Recovers a reranker of `kind` from a loaded parameter set.
    pub fn bind<T: Scalar>(params: &ParamSet<T>, kind: RerankerKind) -> Result<Self> {
        let name = |part: &str| format!("{PREFIX}.{part}");
        let missing = || Error::format(format!("parameters do not describe a {kind} reranker"));
        let out = Linear::bind(params, &name("out")).ok_or_else(missing)?;
        let hidden = Linear::bind(params, &name("hidden"));
        let bilstm = BiLstm::bind(params, &name("lstm"));
        let proj_s = Linear::bind(params, &name("proj_s"));
        let input_dim = match (kind, &bilstm, &hidden) {
            (RerankerKind::Lr, _, _) => out.input,
            (RerankerKind::NPa, _, Some(h)) => h.input / 2,
            (k, Some(l), _) if k.is_listwise() => l.fwd.input,
            (_, _, Some(h)) => h.input,
            _ => return Err(missing()),
        };
        let m = Self { kind, input_dim, bilstm, proj_s, hidden, out };
        let consistent = match kind {
            RerankerKind::Lr => m.hidden.is_none() && m.bilstm.is_none(),
            RerankerKind::NPo | RerankerKind::NCh | RerankerKind::NPa => m.hidden.is_some() && m.bilstm.is_none(),
            RerankerKind::LstmS => m.bilstm.is_some() && m.proj_s.is_some(),
            _ => m.bilstm.is_some() && m.proj_s.is_none(),
        };
        if !consistent {
            return Err(missing());
        }
        Ok(m)
    }

    fn check_rows<T: Scalar>(&self, rows: &[Vec<T>]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::contract("hypothesis list is empty"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != self.input_dim) {
            return Err(Error::shape(format!("{} expects rows of width {}, got {}", self.kind, self.input_dim, r.len())));
        }
        Ok(())
    }

    /// `W₂ · SeLU(W₁ x + b₁) + b₂`, or the plain affine map for LR.
    fn feed_forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        match &self.hidden {
            Some(h) => {
                let z = h.forward(tape, x)?;
                let a = tape.selu(z)?;
                self.out.forward(tape, a)
            }
            None => self.out.forward(tape, x),
        }
    }

    fn input_vars<T: Scalar>(&self, tape: &mut Tape<'_, T>, rows: &[Vec<T>], dropout: Option<Dropout>) -> Result<Vec<Var>> {
        let mask = dropout_mask(tape, dropout, self.input_dim)?;
        rows.iter()
            .map(|r| {
                let x = tape.input_vec(r.clone());
                match mask {
                    Some(m) => tape.mul(x, m),
                    None => Ok(x),
                }
            })
            .collect()
    }

    /// One unnormalized score per hypothesis (list-wise and point-wise kinds).
    pub fn logits<T: Scalar>(&self, tape: &mut Tape<'_, T>, rows: &[Vec<T>], dropout: Option<Dropout>) -> Result<Var> {
        self.check_rows(rows)?;
        let xs = self.input_vars(tape, rows, dropout)?;
        let mut scores = Vec::with_capacity(xs.len());
        if let Some(bilstm) = &self.bilstm {
            let hs = bilstm.encode_each(tape, &xs)?;
            for (&p, &h) in xs.iter().zip(&hs) {
                let g = match self.kind {
                    RerankerKind::LstmO => h,
                    RerankerKind::LstmS => {
                        let proj = self.proj_s.as_ref().expect("bound with projection");
                        let ph = proj.forward(tape, h)?;
                        tape.add(p, ph)?
                    }
                    _ => tape.concat(&[p, h]),
                };
                scores.push(self.feed_forward(tape, g)?);
            }
        } else if self.kind == RerankerKind::NPa {
            return Err(Error::contract("the pair-wise reranker has no per-hypothesis score"));
        } else {
            for &x in &xs {
                scores.push(self.feed_forward(tape, x)?);
            }
        }
        Ok(tape.concat(&scores))
    }

    /// Probability that `challenger` beats `champion`.
    fn challenger_prob<T: Scalar>(&self, tape: &mut Tape<'_, T>, champion: Var, challenger: Var) -> Result<Var> {
        let pair = tape.concat(&[champion, challenger]);
        let z = self.feed_forward(tape, pair)?;
        let o = tape.softmax(z)?;
        tape.slice(o, 1, 1)
    }

    /// Scores `rows` and picks a hypothesis.
    pub fn predict<T: Scalar>(&self, params: &ParamSet<T>, rows: &[Vec<T>]) -> Result<Prediction<T>> {
        self.check_rows(rows)?;
        let mut tape = Tape::new(params);
        if self.kind == RerankerKind::NPa {
            let xs = self.input_vars(&mut tape, rows, None)?;
            let half = T::lit(0.5);
            let (index, comparisons) = tournament(rows.len(), |champ, chall| {
                let p = self.challenger_prob(&mut tape, xs[champ], xs[chall])?;
                Ok(tape.scalar(p) > half)
            })?;
            return Ok(Prediction { index, scores: Vec::new(), comparisons });
        }
        let z = self.logits(&mut tape, rows, None)?;
        let o = if self.kind.is_listwise() { tape.softmax(z)? } else { tape.sigmoid(z) };
        let scores = tape.value(o).to_vec();
        Ok(Prediction { index: argmax(&scores), scores, comparisons: 0 })
    }

    pub fn predict_list<T: Scalar>(&self, params: &ParamSet<T>, list: &HypothesisList<T>) -> Result<Prediction<T>> {
        self.predict(params, &feature_rows(self.kind, list)?)
    }

    /// Training loss with the gold hypothesis at position `gold`.
    ///
    /// List-wise: cross-entropy of the list softmax. Point-wise: summed binary
    /// cross-entropy with target 1 for the gold hypothesis only. Pair-wise:
    /// two-way cross-entropy on every ordered pair that involves the gold one.
    pub fn loss<T: Scalar>(&self, tape: &mut Tape<'_, T>, rows: &[Vec<T>], gold: usize, dropout: Option<Dropout>) -> Result<Var> {
        self.check_rows(rows)?;
        let k = rows.len();
        if gold >= k {
            return Err(Error::contract(format!("gold position {gold} outside a list of {k}")));
        }
        let floor = T::lit(LOG_EPS.ln());
        if self.kind == RerankerKind::NPa {
            let xs = self.input_vars(tape, rows, dropout)?;
            let mut terms = Vec::with_capacity(2 * (k - 1));
            for other in (0..k).filter(|&i| i != gold) {
                for (champ, chall, challenger_is_gold) in [(gold, other, false), (other, gold, true)] {
                    let pair = tape.concat(&[xs[champ], xs[chall]]);
                    let z = self.feed_forward(tape, pair)?;
                    let lp = tape.log_softmax(z)?;
                    let lp = tape.clamp_min(lp, floor);
                    let w = if challenger_is_gold { vec![T::zero(), -T::one()] } else { vec![-T::one(), T::zero()] };
                    terms.push(tape.weighted_sum(lp, w)?);
                }
            }
            if terms.is_empty() {
                return Err(Error::contract("pair-wise training needs at least two hypotheses"));
            }
            let all = tape.concat(&terms);
            return Ok(tape.sum(all));
        }
        let z = self.logits(tape, rows, dropout)?;
        if self.kind.is_listwise() {
            let lp = tape.log_softmax(z)?;
            let lp = tape.clamp_min(lp, floor);
            let mut w = vec![T::zero(); k];
            w[gold] = -T::one();
            tape.weighted_sum(lp, w)
        } else {
            let pos = tape.log_sigmoid(z);
            let neg_z = tape.scale(z, -T::one());
            let neg = tape.log_sigmoid(neg_z);
            let wp: Vec<T> = (0..k).map(|i| if i == gold { -T::one() } else { T::zero() }).collect();
            let wn = wp.iter().map(|&w| -T::one() - w).collect();
            let a = tape.weighted_sum(pos, wp)?;
            let b = tape.weighted_sum(neg, wn)?;
            tape.add(a, b)
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::check_gradients;
    use crate::hypothesis::HypothesisVector;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_rows(k: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut r = rng(seed);
        (0..k).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
    }

    fn small(kind: RerankerKind, dim: usize, seed: u64) -> (ParamSet<f64>, Reranker) {
        let mut ps = ParamSet::new();
        let m = Reranker::with_input_dim(&mut ps, kind, dim, HypRankConfig { hidden: 3, ff_hidden: 4 }, &mut rng(seed)).unwrap();
        (ps, m)
    }

    #[test]
    fn names_round_trip() {
        for k in RerankerKind::ALL {
            assert_eq!(k.name().parse::<RerankerKind>().unwrap(), k);
        }
        assert_eq!("lstm-c".parse::<RerankerKind>().unwrap(), RerankerKind::LstmC);
        assert!("upper".parse::<RerankerKind>().is_err());
    }

    #[test]
    fn standard_shapes_and_binding() {
        for kind in RerankerKind::ALL {
            let mut ps = ParamSet::<f64>::new();
            let m = Reranker::new(&mut ps, kind, HypRankConfig::default(), &mut rng(1)).unwrap();
            assert_eq!(Reranker::bind(&ps, kind).unwrap(), m, "{kind}");
            let expected_in = if kind.uses_cross_features() { 163 } else { 160 };
            assert_eq!(m.input_dim, expected_in);
            if let Some(l) = &m.bilstm {
                assert_eq!(ps.get(l.fwd.w).shape(), &[256, expected_in + 64]);
                let g = match kind {
                    RerankerKind::LstmO => 128,
                    RerankerKind::LstmS => 160,
                    _ => expected_in + 128,
                };
                assert_eq!(ps.get(m.hidden.as_ref().unwrap().w).shape(), &[64, g]);
            }
        }
        let mut ps = ParamSet::<f64>::new();
        Reranker::new(&mut ps, RerankerKind::LstmC, HypRankConfig::default(), &mut rng(1)).unwrap();
        assert!(Reranker::bind(&ps, RerankerKind::LstmS).is_err());
    }

    #[test]
    fn singleton_list() {
        for kind in RerankerKind::ALL {
            let (ps, m) = small(kind, 5, 2);
            let p = m.predict(&ps, &random_rows(1, 5, 3)).unwrap();
            assert_eq!(p.index, 0);
            if kind.is_listwise() {
                assert_eq!(p.scores, vec![1.0]);
            }
            if kind == RerankerKind::NPa {
                assert_eq!(p.comparisons, 0);
            }
        }
        let (ps, m) = small(RerankerKind::LstmC, 5, 2);
        assert!(matches!(m.predict(&ps, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn loss_r_oracles() {
        assert_eq!(loss_r(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(loss_r(&[0.2; 5], &[0.0, 0.0, 1.0, 0.0, 0.0]).unwrap(), 5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(loss_r(&[0.5, 0.3, 0.2], &[0.0, 0.0, 1.0]).unwrap(), -(0.2f64.ln()), epsilon = 1e-12);
        assert!(matches!(loss_r(&[0.5, 0.5], &[1.0, 1.0]), Err(Error::Contract(_))));
    }

    fn scalar_cell(x: f64, h: f64, c: f64, w: &[f64], b: &[f64]) -> (f64, f64) {
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let z = |g: usize| w[2 * g] * x + w[2 * g + 1] * h + b[g];
        let c2 = sig(z(1)) * c + sig(z(0)) * z(2).tanh();
        (sig(z(3)) * c2.tanh(), c2)
    }

    #[test]
    fn toy_listwise_matches_scalar_pipeline() {
        let mut ps = ParamSet::new();
        let cfg = HypRankConfig { hidden: 1, ff_hidden: 1 };
        let m = Reranker::with_input_dim(&mut ps, RerankerKind::LstmC, 1, cfg, &mut rng(0)).unwrap();
        let l = m.bilstm.clone().unwrap();
        let set = |ps: &mut ParamSet<f64>, id, v: &[f64]| ps.get_mut(id).data_mut().copy_from_slice(v);
        let (wf, bf, inf) = ([0.4, -0.2, 0.9, 0.3, -0.5, 0.6, 0.2, 0.8], [0.1, 0.5, -0.1, 0.0], [0.05, -0.02]);
        let (wb, bb, inb) = ([-0.3, 0.7, 0.2, -0.4, 0.6, 0.1, -0.8, 0.3], [0.0, 0.2, 0.3, -0.1], [-0.04, 0.03]);
        set(&mut ps, l.fwd.w, &wf);
        set(&mut ps, l.fwd.b, &bf);
        set(&mut ps, l.fwd.init, &inf);
        set(&mut ps, l.bwd.w, &wb);
        set(&mut ps, l.bwd.b, &bb);
        set(&mut ps, l.bwd.init, &inb);
        let hid = m.hidden.clone().unwrap();
        set(&mut ps, hid.w, &[0.7, -1.2, 0.9]);
        set(&mut ps, hid.b, &[-0.1]);
        set(&mut ps, m.out.w, &[1.5]);
        set(&mut ps, m.out.b, &[0.2]);

        let xs = [0.8, -0.6];
        let (f1, c1) = scalar_cell(xs[0], inf[0], inf[1], &wf, &bf);
        let (f2, _) = scalar_cell(xs[1], f1, c1, &wf, &bf);
        let (b2, d2) = scalar_cell(xs[1], inb[0], inb[1], &wb, &bb);
        let (b1, _) = scalar_cell(xs[0], b2, d2, &wb, &bb);
        let selu = |z: f64| {
            let (l, a) = (crate::autodiff::SELU_LAMBDA, crate::autodiff::SELU_ALPHA);
            if z > 0.0 { l * z } else { l * a * (z.exp() - 1.0) }
        };
        let score = |x: f64, f: f64, b: f64| 1.5 * selu(0.7 * x - 1.2 * f + 0.9 * b - 0.1) + 0.2;
        let (s1, s2) = (score(xs[0], f1, b1), score(xs[1], f2, b2));
        let e = (s1.exp(), s2.exp());
        let expected = [e.0 / (e.0 + e.1), e.1 / (e.0 + e.1)];

        let p = m.predict(&ps, &[vec![xs[0]], vec![xs[1]]]).unwrap();
        assert_abs_diff_eq!(p.scores[0], expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(p.scores[1], expected[1], epsilon = 1e-12);
        assert_eq!(p.index, if expected[1] > expected[0] { 1 } else { 0 });
    }

    #[test]
    fn zero_weight_lr_ties_to_first() {
        let (mut ps, m) = small(RerankerKind::Lr, 4, 1);
        ps.get_mut(m.out.w).data_mut().fill(0.0);
        let p = m.predict(&ps, &random_rows(3, 4, 9)).unwrap();
        assert_eq!(p.scores, vec![0.5; 3]);
        assert_eq!(p.index, 0);
    }

    #[test]
    fn lr_matches_dot_product_oracle() {
        let (mut ps, m) = small(RerankerKind::Lr, 3, 1);
        ps.get_mut(m.out.w).data_mut().copy_from_slice(&[1.0, -2.0, 0.5]);
        ps.get_mut(m.out.b).data_mut().copy_from_slice(&[0.1]);
        let rows = vec![vec![0.2, 0.4, 1.0], vec![0.9, 0.1, -0.2]];
        let z: Vec<f64> = rows.iter().map(|r| r[0] - 2.0 * r[1] + 0.5 * r[2] + 0.1).collect();
        let p = m.predict(&ps, &rows).unwrap();
        assert_eq!(p.index, if z[1] > z[0] { 1 } else { 0 });
        assert_abs_diff_eq!(p.scores[0], 1.0 / (1.0 + (-z[0]).exp()), epsilon = 1e-12);
    }

    #[test]
    fn n_ch_hand_weights_and_identical_rows() {
        let (mut ps, m) = small(RerankerKind::NCh, 2, 1);
        let h = m.hidden.clone().unwrap();
        ps.get_mut(h.w).data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        ps.get_mut(h.b).data_mut().fill(0.0);
        ps.get_mut(m.out.w).data_mut().copy_from_slice(&[1.0, 1.0, 0.0, 0.0]);
        ps.get_mut(m.out.b).data_mut().fill(0.0);
        // score = selu(x0) + selu(x1): larger for the second row
        let p = m.predict(&ps, &[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert_eq!(p.index, 1);
        let same = m.predict(&ps, &[vec![0.3, 0.4], vec![0.3, 0.4]]).unwrap();
        assert_eq!(same.scores[0], same.scores[1]);
        assert_eq!(same.index, 0);
    }

    #[test]
    fn tournament_counts_and_winners() {
        for k in 1..=8 {
            let (w, c) = tournament(k, |_, _| Ok(false)).unwrap();
            assert_eq!((w, c), (0, k - 1));
        }
        // fixed comparator table over 3 hypotheses: 1 beats 0, 2 loses to 1
        let beats = |a: usize, b: usize| matches!((a, b), (0, 1) | (0, 2));
        let (w, c) = tournament(3, |champ, chall| Ok(beats(champ, chall))).unwrap();
        // exhaustive: match 1 (0 vs 1) → 1; match 2 (1 vs 2) → 1 stays
        assert_eq!((w, c), (1, 2));
        assert!(tournament(0, |_, _| Ok(true)).is_err());
    }

    #[test]
    fn pairwise_model_counts_comparisons() {
        let (ps, m) = small(RerankerKind::NPa, 4, 5);
        for k in 1..=8 {
            assert_eq!(m.predict(&ps, &random_rows(k, 4, k as u64)).unwrap().comparisons, k - 1);
        }
    }

    fn permute(rows: &[Vec<f64>], order: &[usize]) -> Vec<Vec<f64>> {
        order.iter().map(|&i| rows[i].clone()).collect()
    }

    #[test]
    fn pointwise_is_order_independent_listwise_is_not() {
        let rows = random_rows(4, 5, 17);
        let order = [2, 0, 3, 1];
        for kind in [RerankerKind::Lr, RerankerKind::NPo, RerankerKind::NCh] {
            let (ps, m) = small(kind, 5, 4);
            let a = m.predict(&ps, &rows).unwrap();
            let b = m.predict(&ps, &permute(&rows, &order)).unwrap();
            assert_eq!(order[b.index], a.index, "{kind}");
        }
        let (ps, m) = small(RerankerKind::LstmC, 5, 4);
        let a = m.predict(&ps, &rows).unwrap();
        let b = m.predict(&ps, &permute(&rows, &order)).unwrap();
        let unpermuted: Vec<f64> = (0..4).map(|i| b.scores[order.iter().position(|&o| o == i).unwrap()]).collect();
        assert!(a.scores.iter().zip(&unpermuted).any(|(x, y)| (x - y).abs() > 1e-9));
    }

    #[test]
    fn feature_permutation_with_weight_permutation_keeps_scores() {
        let dim = 6;
        let (ps, m) = small(RerankerKind::LstmC, dim, 8);
        let perm = [3, 0, 5, 1, 4, 2];
        let rows = random_rows(3, dim, 2);
        let permuted_rows: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let mut ps2 = ps.clone();
        let l = m.bilstm.clone().unwrap();
        // input columns of both LSTMs and the p-part columns of the hidden layer
        for (id, width) in [(l.fwd.w, dim + 3), (l.bwd.w, dim + 3), (m.hidden.clone().unwrap().w, dim + 6)] {
            let src = ps.get(id).data().to_vec();
            let dst = ps2.get_mut(id).data_mut();
            for row in 0..src.len() / width {
                for (new_col, &old_col) in perm.iter().enumerate() {
                    dst[row * width + new_col] = src[row * width + old_col];
                }
            }
        }
        let a = m.predict(&ps, &rows).unwrap();
        let b = m.predict(&ps2, &permuted_rows).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn every_kind_passes_gradient_check() {
        for kind in RerankerKind::ALL {
            let (mut ps, m) = small(kind, 4, 6);
            let rows = random_rows(3, 4, 7);
            let r = check_gradients(&mut ps, |t| m.loss(t, &rows, 1, None), 1e-5, 10, 1).unwrap();
            assert!(r.max_rel_error < 1e-4, "{kind} {r:?}");
        }
    }

    #[test]
    fn cross_rows_append_three_features() {
        let list = HypothesisList {
            hypotheses: (0..2)
                .map(|d| HypothesisVector { domain: d, features: vec![0.5; layout::DIM], slot_count: d })
                .collect(),
        };
        assert_eq!(feature_rows(RerankerKind::LstmC, &list).unwrap()[0].len(), 160);
        let rows = feature_rows(RerankerKind::LstmCh, &list).unwrap();
        assert_eq!(rows[1].len(), 163);
        assert_eq!(&rows[1][160..], &[1.0, 0.5, 1.0]);
    }

    proptest! {
        #[test]
        fn listwise_output_is_a_distribution(k in 1usize..7, seed in 0u64..100) {
            for kind in [RerankerKind::LstmO, RerankerKind::LstmS, RerankerKind::LstmC, RerankerKind::LstmCh] {
                let (ps, m) = small(kind, 4, seed);
                let p = m.predict(&ps, &random_rows(k, 4, seed + 1)).unwrap();
                prop_assert_eq!(p.scores.len(), k);
                prop_assert!(p.scores.iter().all(|&s| s >= 0.0));
                prop_assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
