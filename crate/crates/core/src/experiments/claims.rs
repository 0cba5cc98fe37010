//! The qualitative claims each experiment is expected to reproduce. The CLI
//! exit code and the acceptance suite are both derived from these.

use serde::Serialize;

use super::config::Experiment;
use super::runs::RelationsOutput;
use super::table::{spearman, ResultTable};
use crate::parsing::log_odds_test;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Claim {
    fn new(name: &str, holds: bool, detail: String) -> Self {
        Claim {
            name: name.into(),
            holds,
            detail,
        }
    }
}

fn mean(t: &ResultTable, condition: &str, metric: &str) -> f64 {
    t.mean(condition, metric).unwrap_or(f64::NAN)
}

/// Orderings for the case study: Specific-100 above NoPretrain and
/// Specific-0, and accuracy rank-correlated with p.
pub fn case_study_claims(t: &ResultTable) -> Vec<Claim> {
    let m = |c: &str| mean(t, c, "dev_accuracy");
    let (s100, s0, none) = (m("Specific-100"), m("Specific-0"), m("NoPretrain"));
    let (ps, accs): (Vec<f64>, Vec<f64>) = t
        .conditions()
        .iter()
        .filter_map(|c| c.strip_prefix("Specific-").and_then(|p| p.parse::<f64>().ok()).map(|p| (p, m(c))))
        .unzip();
    let rho = spearman(&ps, &accs).unwrap_or(f64::NAN);
    vec![
        Claim::new(
            "Specific-100 > NoPretrain",
            s100 > none,
            format!("{s100:.4} vs {none:.4}"),
        ),
        Claim::new("Specific-100 > Specific-0", s100 > s0, format!("{s100:.4} vs {s0:.4}")),
        Claim::new(
            "spearman(p, accuracy) >= 0.7",
            rho >= 0.7,
            format!("rho = {rho:.4} over {} p values", ps.len()),
        ),
    ]
}

pub fn mask_compare_claims(t: &ResultTable) -> Vec<Claim> {
    let m = |c: &str| mean(t, c, "test_accuracy");
    let (cloze, uniform, vanilla, nocloze) = (m("Cloze"), m("Uniform"), m("Vanilla"), m("NoCloze"));
    vec![
        Claim::new("Cloze >= Uniform", cloze >= uniform, format!("{cloze:.4} vs {uniform:.4}")),
        Claim::new(
            "Uniform > Vanilla",
            uniform > vanilla,
            format!("{uniform:.4} vs {vanilla:.4}"),
        ),
        Claim::new(
            "Uniform closer to NoCloze than to Cloze",
            (uniform - nocloze).abs() < (uniform - cloze).abs(),
            format!(
                "|U-NC| = {:.4}, |U-C| = {:.4}",
                (uniform - nocloze).abs(),
                (uniform - cloze).abs()
            ),
        ),
    ]
}

pub fn parse_eval_claims(t: &ResultTable) -> Vec<Claim> {
    let m = |c: &str| mean(t, c, "uuas");
    let (cmi, cpmi, pmi, random) = (m("CondMI"), m("CondPMI"), m("PMI"), m("Random"));
    let ratio = t
        .values("MLM", "loss_over_ln_vocab")
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    vec![
        Claim::new(
            "MLM held-out loss < 0.6 ln|V| (every seed)",
            ratio < 0.6,
            format!("worst loss / ln|V| = {ratio:.4}"),
        ),
        Claim::new(
            "CondMI >= PMI + 10",
            cmi >= pmi + 0.10,
            format!("{:.2} vs {:.2}", 100.0 * cmi, 100.0 * pmi),
        ),
        Claim::new(
            "CondMI >= Random + 20",
            cmi >= random + 0.20,
            format!("{:.2} vs {:.2}", 100.0 * cmi, 100.0 * random),
        ),
        Claim::new(
            "CondMI >= CondPMI",
            cmi >= cpmi,
            format!("{:.2} vs {:.2}", 100.0 * cmi, 100.0 * cpmi),
        ),
    ]
}

/// Re-derives every significance flag from the report's own counts.
pub fn relations_claims(r: &RelationsOutput) -> Vec<Claim> {
    let bad: Vec<&str> = r
        .report
        .rows
        .iter()
        .filter(|row| {
            let (lo, sig) = log_odds_test(
                row.method_hits,
                row.gold_count - row.method_hits,
                row.chain_hits,
                row.gold_count - row.chain_hits,
            );
            sig != row.significant || (lo - row.log_odds).abs() > 1e-12
        })
        .map(|row| row.relation.as_str())
        .collect();
    vec![Claim::new(
        "significance flags match counts",
        bad.is_empty(),
        format!("{} relations, mismatches {bad:?}", r.report.rows.len()),
    )]
}

pub fn verify_props_claims(t: &ResultTable) -> Vec<Claim> {
    t.conditions()
        .into_iter()
        .map(|c| {
            let holds = t.values(c, "holds");
            let failed = holds.iter().filter(|&&h| h != 1.0).count();
            Claim::new(
                &format!("{c} holds on every trial"),
                failed == 0 && !holds.is_empty(),
                format!("{failed} of {} trials violated", holds.len()),
            )
        })
        .collect()
}

pub fn claims(experiment: Experiment, table: &ResultTable, relations: Option<&RelationsOutput>) -> Vec<Claim> {
    match experiment {
        Experiment::CaseStudy => case_study_claims(table),
        Experiment::MaskCompare => mask_compare_claims(table),
        Experiment::ParseEval => parse_eval_claims(table),
        Experiment::Relations => relations.map(relations_claims).unwrap_or_default(),
        Experiment::VerifyProps => verify_props_claims(table),
    }
}
