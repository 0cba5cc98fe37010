use std::collections::BTreeMap;
use std::rc::Rc;

use rand::Rng;

use super::{ConditionalModel, ProbCache};
use crate::corpus::{CLS, MASK, PAD};
use crate::error::{Error, Result};
use crate::rng::categorical;

/// Alternating Gibbs samples for one ordered position pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GibbsChain {
    pub i: usize,
    pub j: usize,
    pub samples: Vec<(usize, usize)>,
    /// The sentence with both `i` and `j` masked.
    pub context: Vec<usize>,
}

fn check_pair(ids: &[usize], i: usize, j: usize) -> Result<()> {
    let len = ids.len();
    for p in [i, j] {
        if p >= len {
            return Err(Error::OutOfRange { pos: p, len });
        }
    }
    if i == j {
        return Err(Error::Config(format!("positions must differ, got ({i}, {j})")));
    }
    Ok(())
}

/// Conditional with the structural symbols removed and renormalized, so that
/// samples and scores only ever range over real tokens (and `[UNK]`).
fn token_conditional<M: ConditionalModel + ?Sized>(
    model: &M,
    cache: &mut ProbCache,
    ids: &[usize],
    pos: usize,
) -> Result<Rc<[f64]>> {
    let p = cache.get(model, ids, pos)?;
    let removed: f64 = [PAD, CLS, MASK].iter().filter_map(|&s| p.get(s)).sum();
    if removed == 0.0 {
        return Ok(p);
    }
    let z = 1.0 - removed;
    if !(z > 0.0) {
        return Err(Error::NonFinite(format!(
            "model puts no mass on real tokens at position {pos}"
        )));
    }
    let mut q = p.to_vec();
    for s in [PAD, CLS, MASK] {
        if s < q.len() {
            q[s] = 0.0;
        }
    }
    q.iter_mut().for_each(|x| *x /= z);
    Ok(q.into())
}

fn substituted(base: &[usize], pos: usize, v: usize) -> Vec<usize> {
    let mut ids = base.to_vec();
    ids[pos] = v;
    ids
}

/// Runs `burn_in + steps` alternating updates from `X_{\{i,j\}}` and keeps
/// the last `steps` pairs.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_chain<M: ConditionalModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    cache: &mut ProbCache,
    ids: &[usize],
    i: usize,
    j: usize,
    steps: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<GibbsChain> {
    check_pair(ids, i, j)?;
    if steps == 0 {
        return Err(Error::Config("gibbs chain needs at least one step".into()));
    }
    let mut x = ids.to_vec();
    x[i] = MASK;
    x[j] = MASK;
    let context = x.clone();
    let mut samples = Vec::with_capacity(steps);
    for t in 0..burn_in + steps {
        x[i] = MASK;
        let a = categorical(rng, &token_conditional(model, cache, &x, i)?);
        x[i] = a;
        x[j] = MASK;
        let b = categorical(rng, &token_conditional(model, cache, &x, j)?);
        x[j] = b;
        if t >= burn_in {
            samples.push((a, b));
        }
    }
    Ok(GibbsChain {
        i,
        j,
        samples,
        context,
    })
}

/// Plug-in conditional MI from an existing chain. The inner average over
/// `x_j` uses the chain's own `x_j` samples as the marginal.
pub fn cond_mi_from_chain<M: ConditionalModel + ?Sized>(
    model: &M,
    cache: &mut ProbCache,
    chain: &GibbsChain,
) -> Result<f64> {
    let t = chain.samples.len();
    if t == 0 {
        return Err(Error::Config("empty gibbs chain".into()));
    }
    let mut b_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut ab_counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(a, b) in &chain.samples {
        *b_counts.entry(b).or_insert(0) += 1;
        *ab_counts.entry((a, b)).or_insert(0) += 1;
    }
    let mut cond: BTreeMap<usize, Rc<[f64]>> = BTreeMap::new();
    for &b in b_counts.keys() {
        let x = substituted(&chain.context, chain.j, b);
        cond.insert(b, token_conditional(model, cache, &x, chain.i)?);
    }
    let tf = t as f64;
    let mut mixture: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (&(a, b), &n) in &ab_counts {
        let m = *mixture.entry(a).or_insert_with(|| {
            b_counts
                .iter()
                .map(|(bb, &nb)| nb as f64 / tf * cond[bb][a])
                .sum()
        });
        total += n as f64 * (cond[&b][a].ln() - m.ln());
    }
    Ok(total / tf)
}

/// Gibbs-sampled conditional MI `I(x_i; x_j | X_{\{i,j\}})`.
#[allow(clippy::too_many_arguments)]
pub fn cond_mi<M: ConditionalModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    cache: &mut ProbCache,
    ids: &[usize],
    i: usize,
    j: usize,
    steps: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<f64> {
    let chain = gibbs_chain(model, cache, ids, i, j, steps, burn_in, rng)?;
    cond_mi_from_chain(model, cache, &chain)
}

/// `log p(x_i | X_{\i}) − log p(x_i | X_{\{i,j\}})` at the observed tokens.
pub fn cond_pmi<M: ConditionalModel + ?Sized>(
    model: &M,
    cache: &mut ProbCache,
    ids: &[usize],
    i: usize,
    j: usize,
) -> Result<f64> {
    check_pair(ids, i, j)?;
    let xi = ids[i];
    let mut x = ids.to_vec();
    x[i] = MASK;
    let with_j = token_conditional(model, cache, &x, i)?[xi];
    x[j] = MASK;
    let without_j = token_conditional(model, cache, &x, i)?[xi];
    Ok(with_j.ln() - without_j.ln())
}
