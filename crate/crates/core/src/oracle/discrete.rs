use rand::Rng;
use rand_distr::Gamma;

use super::PropReport;
use crate::dependence::TableModel;
use crate::error::{Error, Result};
use crate::rng::seeded;

pub const MAX_LATENT: usize = 4;
pub const MAX_LEN: usize = 4;
pub const MAX_TYPES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteSpec {
    pub n_latent: usize,
    pub len: usize,
    pub n_types: usize,
    /// Dirichlet concentration of the joint table; small values give peaked,
    /// strongly dependent tables.
    pub alpha: f64,
}

impl Default for DiscreteSpec {
    fn default() -> Self {
        Self {
            n_latent: 3,
            len: 3,
            n_types: 3,
            alpha: 0.5,
        }
    }
}

/// Full joint `p(z, x_1..x_L)`. Index `z · V^L + x`, with `x` read as a base-V
/// number whose most significant digit is position 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLatentModel {
    pub n_latent: usize,
    pub len: usize,
    pub n_types: usize,
    pub probs: Vec<f64>,
}

impl DiscreteLatentModel {
    pub fn new(n_latent: usize, len: usize, n_types: usize, probs: Vec<f64>) -> Result<Self> {
        if n_latent == 0 || n_latent > MAX_LATENT || !(2..=MAX_LEN).contains(&len) || n_types == 0 || n_types > MAX_TYPES {
            return Err(Error::Config(format!(
                "table sizes |Z|={n_latent}, L={len}, |V|={n_types} outside the caps"
            )));
        }
        let cells = n_latent * n_types.pow(len as u32);
        if probs.len() != cells {
            return Err(Error::Dimension(format!("{} cells, expected {cells}", probs.len())));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::NonFinite("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Unnormalized(total));
        }
        Ok(Self {
            n_latent,
            len,
            n_types,
            probs,
        })
    }

    fn x_cells(&self) -> usize {
        self.n_types.pow(self.len as u32)
    }

    /// Values of all variables in cell `idx`: `[z, x_0, .., x_{L-1}]`.
    fn values(&self, idx: usize) -> Vec<usize> {
        let xc = self.x_cells();
        let mut out = vec![idx / xc; self.len + 1];
        let mut x = idx % xc;
        for p in (0..self.len).rev() {
            out[p + 1] = x % self.n_types;
            x /= self.n_types;
        }
        out
    }

    fn size(&self, var: usize) -> usize {
        if var == 0 {
            self.n_latent
        } else {
            self.n_types
        }
    }

    /// Entropy (nats) of the marginal over `vars` (0 = Z, p+1 = x_p).
    fn entropy(&self, vars: &[usize]) -> f64 {
        let dims: usize = vars.iter().map(|&v| self.size(v)).product();
        let mut marg = vec![0.0; dims];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let vals = self.values(idx);
            let key = vars.iter().fold(0, |acc, &v| acc * self.size(v) + vals[v]);
            marg[key] += p;
        }
        -marg.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    fn cond_mi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let cat = |xs: &[&[usize]]| -> Vec<usize> {
            let mut v: Vec<usize> = xs.concat();
            v.sort_unstable();
            v
        };
        self.entropy(&cat(&[a, c])) + self.entropy(&cat(&[b, c]))
            - self.entropy(&cat(&[a, b, c]))
            - self.entropy(c)
    }

    /// `p(x)` with the latent summed out, as token ids `4..4+V`.
    pub fn marginal_x(&self) -> Result<TableModel> {
        let xc = self.x_cells();
        let mut px = vec![0.0; xc];
        for (idx, &p) in self.probs.iter().enumerate() {
            px[idx % xc] += p;
        }
        let total: f64 = px.iter().sum();
        TableModel::new(self.len, self.n_types, px.into_iter().map(|p| p / total).collect())
    }
}

/// Random joint table with Dirichlet(`alpha`) cell masses.
pub fn discrete_gen(spec: &DiscreteSpec, seed: u64) -> Result<DiscreteLatentModel> {
    if !(spec.alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {}", spec.alpha)));
    }
    if spec.len > MAX_LEN || spec.n_types > MAX_TYPES || spec.n_latent > MAX_LATENT {
        return Err(Error::Config("table sizes outside the caps".into()));
    }
    let cells = spec.n_latent * spec.n_types.pow(spec.len as u32);
    let gamma = Gamma::new(spec.alpha, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = seeded(seed);
    let raw: Vec<f64> = (0..cells).map(|_| rng.sample(gamma)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|g| g / total).collect();
    // renormalize once more so the sum is 1 to the last bit or two
    let again: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= again);
    DiscreteLatentModel::new(spec.n_latent, spec.len, spec.n_types, probs)
}

/// Exact information quantities for the pair `(i, j)`, conditioning on the
/// remaining positions `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteExact {
    /// `I(x_i; x_j | C)`
    pub cmi: f64,
    /// `I(x_i; x_j | Z, C)`
    pub cmi_given_z: f64,
    /// `H(Z | C)`
    pub h_z: f64,
    /// `I(x_i; Z | C)`
    pub mi_iz: f64,
    /// `I(x_i; Z | x_j, C)`
    pub mi_iz_given_j: f64,
}

pub fn discrete_exact(model: &DiscreteLatentModel, i: usize, j: usize) -> Result<DiscreteExact> {
    for p in [i, j] {
        if p >= model.len {
            return Err(Error::OutOfRange { pos: p, len: model.len });
        }
    }
    if i == j {
        return Err(Error::Config("positions must differ".into()));
    }
    let (xi, xj) = (i + 1, j + 1);
    let ctx: Vec<usize> = (1..=model.len).filter(|&v| v != xi && v != xj).collect();
    let mut ctx_z = ctx.clone();
    ctx_z.insert(0, 0);
    let mut ctx_j = ctx.clone();
    ctx_j.push(xj);
    ctx_j.sort_unstable();
    let h_ctx = model.entropy(&ctx);
    Ok(DiscreteExact {
        cmi: model.cond_mi(&[xi], &[xj], &ctx),
        cmi_given_z: model.cond_mi(&[xi], &[xj], &ctx_z),
        h_z: model.entropy(&ctx_z) - h_ctx,
        mi_iz: model.cond_mi(&[xi], &[0], &ctx),
        mi_iz_given_j: model.cond_mi(&[xi], &[0], &ctx_j),
    })
}

/// `I(x_i; x_j | C) − I(x_i; x_j | Z, C) ≤ 2 H(Z | C)`.
pub fn prop3_check(model: &DiscreteLatentModel, i: usize, j: usize) -> Result<PropReport> {
    let e = discrete_exact(model, i, j)?;
    Ok(PropReport::new(
        e.cmi - e.cmi_given_z,
        2.0 * e.h_z,
        format!("i={i} j={j} I={:.6} I|Z={:.6}", e.cmi, e.cmi_given_z),
    ))
}

/// `(1 − α) p + α r`, where `r` is uniform when `seed` is `None` and a random
/// Dirichlet(1) table otherwise.
pub fn perturb(p: &TableModel, alpha: f64, seed: Option<u64>) -> Result<TableModel> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("mixing weight {alpha} outside [0, 1]")));
    }
    let n = p.probs().len();
    let r: Vec<f64> = match seed {
        None => vec![1.0 / n as f64; n],
        Some(s) => {
            let mut rng = seeded(s);
            let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / z).collect()
        }
    };
    let mixed: Vec<f64> = p.probs().iter().zip(&r).map(|(a, b)| (1.0 - alpha) * a + alpha * b).collect();
    let z: f64 = mixed.iter().sum();
    TableModel::new(p.len(), p.n_types(), mixed.into_iter().map(|x| x / z).collect())
}

/// Exact check of `|Î_q − I_p| ≤ E_{x_j} KL(p(x_i | C, x_j) ‖ q(x_i | C, x_j))`,
/// all expectations under `p`, averaged over contexts `C`. The inequality
/// also has to hold inside every context.
pub fn prop4_check(p: &TableModel, q: &TableModel, i: usize, j: usize) -> Result<PropReport> {
    let (len, k) = (p.len(), p.n_types());
    if q.len() != len || q.n_types() != k {
        return Err(Error::Dimension("p and q live on different supports".into()));
    }
    for pos in [i, j] {
        if pos >= len {
            return Err(Error::OutOfRange { pos, len });
        }
    }
    if i == j {
        return Err(Error::Config("positions must differ".into()));
    }
    let others: Vec<usize> = (0..len).filter(|&x| x != i && x != j).collect();
    let n_ctx = k.pow(others.len() as u32);
    let cell = |a: usize, b: usize, c: usize| -> usize {
        let mut digits = vec![0; len];
        digits[i] = a;
        digits[j] = b;
        let mut c = c;
        for &o in others.iter().rev() {
            digits[o] = c % k;
            c /= k;
        }
        digits.iter().fold(0, |acc, &d| acc * k + d)
    };
    let (mut gap, mut kl_total) = (0.0, 0.0);
    let mut worst_ctx = f64::INFINITY;
    for c in 0..n_ctx {
        let pj: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| p.probs()[cell(a, b, c)]).collect()).collect();
        let qj: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| q.probs()[cell(a, b, c)]).collect()).collect();
        let pc: f64 = pj.iter().flatten().sum();
        if pc == 0.0 {
            continue;
        }
        let pb: Vec<f64> = (0..k).map(|b| (0..k).map(|a| pj[a][b]).sum::<f64>() / pc).collect();
        let pa: Vec<f64> = (0..k).map(|a| pj[a].iter().sum::<f64>() / pc).collect();
        let qb: Vec<f64> = (0..k).map(|b| (0..k).map(|a| qj[a][b]).sum()).collect();
        // q(a | b, c), undefined where q puts no mass on (b, c)
        let qcond = |a: usize, b: usize| if qb[b] > 0.0 { qj[a][b] / qb[b] } else { 0.0 };
        let mut i_p = 0.0;
        let mut i_q = 0.0;
        let mut kl = 0.0;
        for a in 0..k {
            let mix: f64 = (0..k).map(|b| pb[b] * qcond(a, b)).sum();
            for b in 0..k {
                let pab = pj[a][b] / pc;
                if pab == 0.0 {
                    continue;
                }
                let p_a_given_b = pab / pb[b];
                let qab = qcond(a, b);
                if qab == 0.0 {
                    return Ok(PropReport {
                        lhs: f64::INFINITY,
                        rhs: f64::INFINITY,
                        slack: f64::INFINITY,
                        holds: true,
                        detail: "q has a zero where p is positive: infinite KL".into(),
                    });
                }
                i_p += pab * (p_a_given_b / pa[a]).ln();
                i_q += pab * (qab.ln() - mix.ln());
                kl += pab * (p_a_given_b / qab).ln();
            }
        }
        worst_ctx = worst_ctx.min(kl - (i_q - i_p).abs());
        gap += pc * (i_q - i_p);
        kl_total += pc * kl;
    }
    let mut r = PropReport::new(gap.abs(), kl_total, format!("min per-context slack {worst_ctx:e}"));
    if worst_ctx < -super::SLACK_TOL {
        r.holds = false;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product_model(pz: &[f64], px: &[f64], len: usize) -> DiscreteLatentModel {
        let v = px.len();
        let xc = v.pow(len as u32);
        let mut probs = Vec::new();
        for &z in pz {
            for idx in 0..xc {
                let mut x = idx;
                let mut p = z;
                for _ in 0..len {
                    p *= px[x % v];
                    x /= v;
                }
                probs.push(p);
            }
        }
        DiscreteLatentModel::new(pz.len(), len, v, probs).unwrap()
    }

    #[test]
    fn independent_latent_changes_nothing() {
        // z independent of x, x itself from a random table
        let base = discrete_gen(&DiscreteSpec { n_latent: 1, ..Default::default() }, 3).unwrap();
        let pz = [0.2, 0.5, 0.3];
        let probs: Vec<f64> = pz.iter().flat_map(|z| base.probs.iter().map(move |p| z * p)).collect();
        let m = DiscreteLatentModel::new(3, 3, 3, probs).unwrap();
        let e = discrete_exact(&m, 0, 2).unwrap();
        assert!((e.cmi - e.cmi_given_z).abs() < 1e-12);
        let hz = -pz.iter().map(|p| p * p.ln()).sum::<f64>();
        assert!((e.h_z - hz).abs() < 1e-12);
        let r = prop3_check(&m, 0, 2).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.holds);
    }

    #[test]
    fn deterministic_latent_has_zero_entropy() {
        // z = x_2, which is the only context position for the pair (0, 1)
        let base = discrete_gen(&DiscreteSpec { n_latent: 1, ..Default::default() }, 4).unwrap();
        let mut probs = vec![0.0; 3 * 27];
        for idx in 0..27 {
            probs[(idx % 3) * 27 + idx] = base.probs[idx];
        }
        let m = DiscreteLatentModel::new(3, 3, 3, probs).unwrap();
        let e = discrete_exact(&m, 0, 1).unwrap();
        assert!(e.h_z.abs() < 1e-12);
        let r = prop3_check(&m, 0, 1).unwrap();
        assert!(r.rhs.abs() < 1e-12);
        assert!(r.lhs <= 1e-12);
    }

    #[test]
    fn perfectly_correlated_pair_has_ln2() {
        // L = 2 binary positions copying a fair bit; no context
        let probs = vec![0.5, 0.0, 0.0, 0.5];
        let m = DiscreteLatentModel::new(1, 2, 2, probs).unwrap();
        let e = discrete_exact(&m, 0, 1).unwrap();
        assert!((e.cmi - 2f64.ln()).abs() < 1e-12);
        // same with an irrelevant third position
        let m3 = product_model(&[1.0], &[0.5, 0.5], 3);
        assert!(discrete_exact(&m3, 0, 1).unwrap().cmi.abs() < 1e-12);
    }

    #[test]
    fn chain_rule_holds_exactly() {
        for seed in 0..200 {
            let m = discrete_gen(&DiscreteSpec::default(), seed).unwrap();
            let e = discrete_exact(&m, 0, 2).unwrap();
            let rhs = e.cmi - e.mi_iz + e.mi_iz_given_j;
            assert!((e.cmi_given_z - rhs).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn unnormalized_tables_are_rejected() {
        assert!(matches!(
            DiscreteLatentModel::new(1, 2, 2, vec![0.5, 0.5, 0.5, 0.5]),
            Err(Error::Unnormalized(_))
        ));
        assert!(DiscreteLatentModel::new(5, 2, 2, vec![0.05; 20]).is_err());
    }

    #[test]
    fn prop3_holds_on_random_tables() {
        for seed in 0..300 {
            let spec = DiscreteSpec {
                n_latent: 2 + seed as usize % 3,
                len: 3 + seed as usize % 2,
                n_types: 2 + seed as usize % 2,
                alpha: 0.3,
            };
            let m = discrete_gen(&spec, seed).unwrap();
            assert!(prop3_check(&m, 0, 1).unwrap().holds, "{m:?}");
        }
    }

    #[test]
    fn prop4_identical_tables() {
        let p = discrete_gen(&DiscreteSpec::default(), 1).unwrap().marginal_x().unwrap();
        let r = prop4_check(&p, &p, 0, 2).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-12 && r.holds);
    }

    #[test]
    fn prop4_holds_on_random_pairs() {
        for seed in 0..300 {
            let p = discrete_gen(&DiscreteSpec::default(), seed).unwrap().marginal_x().unwrap();
            let q = perturb(&p, 0.5, Some(seed + 10_000)).unwrap();
            let r = prop4_check(&p, &q, 1, 2).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn prop4_vanishes_as_q_approaches_p() {
        let p = discrete_gen(&DiscreteSpec::default(), 6).unwrap().marginal_x().unwrap();
        let reports: Vec<PropReport> = [0.3, 0.1, 0.03]
            .iter()
            .map(|&a| prop4_check(&p, &perturb(&p, a, None).unwrap(), 0, 1).unwrap())
            .collect();
        for w in reports.windows(2) {
            assert!(w[1].lhs < w[0].lhs && w[1].rhs < w[0].rhs);
        }
        assert!(reports.iter().all(|r| r.holds));
    }

    #[test]
    fn prop4_zero_in_q_is_infinite() {
        let p = TableModel::new(2, 2, vec![0.25; 4]).unwrap();
        let q = TableModel::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let r = prop4_check(&p, &q, 0, 1).unwrap();
        assert!(r.rhs.is_infinite() && r.holds);
    }
}
