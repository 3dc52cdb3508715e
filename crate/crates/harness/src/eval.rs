//! k-best recall and final-accuracy evaluation.

use serde::{Deserialize, Serialize};

use hyprank_core::hypothesis::LabelTables;
use hyprank_core::hyprank::RerankerKind;
use hyprank_core::{Error, Result};
use hyprank_datagen::{DomainCatalog, Example};

use crate::par::par_map;
use crate::pipeline::{build_lists, ListExample, RerankerModel, ShortlisterModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KAccuracy {
    pub k: usize,
    pub correct: usize,
    /// Percent of utterances with the gold domain in the k-best list.
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelAccuracy {
    pub model: String,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// List length the rerankers were evaluated on.
    pub k: usize,
    pub kbest: Vec<KAccuracy>,
    /// Shortlister 1-best without reranking.
    pub sl: ModelAccuracy,
    pub rerankers: Vec<ModelAccuracy>,
    /// Gold-in-k-best rate: the ceiling of every reranker.
    pub upper: ModelAccuracy,
}

impl EvalReport {
    /// SL, the rerankers in canonical order, then UPPER.
    pub fn rows(&self) -> Vec<&ModelAccuracy> {
        std::iter::once(&self.sl).chain(&self.rerankers).chain(std::iter::once(&self.upper)).collect()
    }

    pub fn model(&self, name: &str) -> Option<&ModelAccuracy> {
        self.rows().into_iter().find(|m| m.model == name)
    }
}

fn percent(correct: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * correct as f64 / n as f64
    }
}

fn accuracy(model: &str, correct: usize, n: usize) -> ModelAccuracy {
    ModelAccuracy { model: model.to_string(), correct, accuracy: percent(correct, n) }
}

/// k-best accuracy from the gold domain's rank in each full ranking
/// (`None` when the gold domain was never ranked).
pub fn kbest_accuracy_from_ranks(ranks: &[Option<usize>], k: usize) -> KAccuracy {
    let correct = ranks.iter().filter(|r| r.is_some_and(|r| r < k)).count();
    KAccuracy { k, correct, accuracy: percent(correct, ranks.len()) }
}

/// Percentage of `examples` whose gold domain is in the shortlister's
/// k-best list, for every k in `ks`.
pub fn eval_kbest_accuracy(sl: &ShortlisterModel, examples: &[Example], ks: &[usize]) -> Result<Vec<KAccuracy>> {
    let n = sl.model.n_domains;
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::parameter(format!("k = {bad} outside 1..={n}")));
    }
    let deepest = ks.iter().copied().max().unwrap_or(1);
    let ranks = par_map(examples, |ex| Ok(sl.k_best(&ex.tokens, deepest)?.position(ex.domain)))?;
    Ok(ks.iter().map(|&k| kbest_accuracy_from_ranks(&ranks, k)).collect())
}

/// Scores prebuilt lists. `kbest` is reported alongside for reference.
pub fn report_from_lists(lists: &[ListExample], k: usize, kbest: Vec<KAccuracy>, rerankers: &[RerankerModel]) -> Result<EvalReport> {
    let mut sorted: Vec<&RerankerModel> = rerankers.iter().collect();
    sorted.sort_by_key(|m| RerankerKind::ALL.iter().position(|&k| k == m.kind));
    for m in &sorted {
        if m.k != k {
            return Err(Error::parameter(format!("{} was trained with k = {} but evaluation uses k = {k}", m.kind, m.k)));
        }
    }
    if let Some(bad) = lists.iter().find(|l| l.list.len() != k) {
        return Err(Error::parameter(format!("list of length {} does not match k = {k}", bad.list.len())));
    }
    let n = lists.len();
    let sl = lists.iter().filter(|l| l.gold == Some(0)).count();
    let upper = lists.iter().filter(|l| l.gold.is_some()).count();
    let mut rows = Vec::with_capacity(sorted.len());
    for m in sorted {
        let hits = par_map(lists, |l| Ok(l.gold.is_some() && l.gold == Some(m.predict(&l.list)?)))?;
        rows.push(accuracy(m.kind.name(), hits.iter().filter(|&&h| h).count(), n));
    }
    Ok(EvalReport { n, k, kbest, sl: accuracy("SL", sl, n), rerankers: rows, upper: accuracy("UPPER", upper, n) })
}

/// Final accuracy of the shortlister alone, every reranker over its k-best
/// lists, and UPPER. Utterances whose gold domain misses the k-best list
/// count as wrong for every reranker.
pub fn eval_final_accuracy(
    sl: &ShortlisterModel,
    rerankers: &[RerankerModel],
    catalog: &DomainCatalog,
    tables: &LabelTables<f64>,
    examples: &[Example],
    k: usize,
    ks: &[usize],
) -> Result<EvalReport> {
    if let Some(m) = rerankers.iter().find(|m| m.k != k) {
        return Err(Error::parameter(format!("{} was trained with k = {} but evaluation uses k = {k}", m.kind, m.k)));
    }
    let lists = build_lists(sl, catalog, tables, examples, k)?;
    let kbest = eval_kbest_accuracy(sl, examples, ks)?;
    report_from_lists(&lists, k, kbest, rerankers)
}
