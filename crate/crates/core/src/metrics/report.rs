//! Full evaluation of one attack against one record set.

use serde::{Deserialize, Serialize};

use super::{auprc, auroc, confusion, emd_1d, fpr_at_tpr, mmps, roc_curve, ConfusionCounts};
use crate::attacks::{predict_membership, AttackModel};
use crate::error::{Error, Result};
use crate::shadow::MembershipRecord;

/// All metrics for one `(model, attack, dataset)` triple.
///
/// `ece`/`oe` describe the model's calibration on the evaluated dataset;
/// they need class labels the membership records do not carry, so the
/// pipeline attaches them via [`EvalReport::with_calibration`] where labels
/// are available. `mmps_fp`/`mmps_tn` are `None` when the attack produced no
/// false positives / true negatives to average over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub attack: String,
    pub dataset: String,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub auroc: f64,
    pub auprc: f64,
    pub fpr_at_95tpr: f64,
    pub mmps_fp: Option<f64>,
    pub mmps_tn: Option<f64>,
    pub ece: Option<f64>,
    pub oe: Option<f64>,
    /// EMD between member and non-member maximum-score distributions.
    pub emd_vs_members: f64,
    pub counts: ConfusionCounts,
    /// Names of rates that hit a division-by-zero convention.
    pub degenerate_flags: Vec<String>,
}

impl EvalReport {
    pub fn with_calibration(mut self, ece: f64, oe: f64) -> Self {
        self.ece = Some(ece);
        self.oe = Some(oe);
        self
    }

    pub fn csv_header() -> &'static str {
        "attack,dataset,precision,recall,fpr,auroc,auprc,fpr_at_95tpr,\
         mmps_fp,mmps_tn,ece,oe,emd_vs_members,tp,fp,tn,fn,degenerate_flags"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.attack,
            self.dataset,
            self.precision,
            self.recall,
            self.fpr,
            self.auroc,
            self.auprc,
            self.fpr_at_95tpr,
            opt(self.mmps_fp),
            opt(self.mmps_tn),
            opt(self.ece),
            opt(self.oe),
            self.emd_vs_members,
            self.counts.true_positives,
            self.counts.false_positives,
            self.counts.true_negatives,
            self.counts.false_negatives,
            self.degenerate_flags.join(";"),
        )
    }
}

/// Evaluate one attack on records that carry ground-truth membership.
/// Records must contain both classes so the threshold-free metrics are
/// defined; MMPS is reported separately for the false-positive and
/// true-negative subsets.
pub fn evaluate_attack(attack: &AttackModel, records: &[MembershipRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut decisions = Vec::with_capacity(records.len());
    let mut raw_scores = Vec::with_capacity(records.len());
    let mut truths = Vec::with_capacity(records.len());
    for r in records {
        let (decision, raw) = predict_membership(attack, &r.scores);
        decisions.push(decision);
        raw_scores.push(raw);
        truths.push(r.is_member);
    }

    let counts = confusion(&decisions, &truths)?;
    let precision = counts.precision();
    let recall = counts.recall();
    let fpr = counts.fpr();
    let mut degenerate_flags = Vec::new();
    for (rate, name) in [(&precision, "precision"), (&recall, "recall"), (&fpr, "fpr")] {
        if rate.degenerate {
            degenerate_flags.push(name.to_string());
        }
    }

    let curve = roc_curve(&raw_scores, &truths)?;
    let auroc_value = auroc(&curve);
    let auprc_value = auprc(&raw_scores, &truths)?;
    let fpr95 = fpr_at_tpr(&curve, 0.95);

    let subset_mmps = |keep: &dyn Fn(bool, bool) -> bool| -> Option<f64> {
        let vectors: Vec<_> = records
            .iter()
            .zip(&decisions)
            .filter(|(r, &d)| keep(d, r.is_member))
            .map(|(r, _)| r.scores.clone())
            .collect();
        mmps(&vectors).ok()
    };
    let mmps_fp = subset_mmps(&|decision, member| decision && !member);
    let mmps_tn = subset_mmps(&|decision, member| !decision && !member);

    let member_maxes: Vec<f64> = records
        .iter()
        .filter(|r| r.is_member)
        .map(|r| r.scores.max_score())
        .collect();
    let nonmember_maxes: Vec<f64> = records
        .iter()
        .filter(|r| !r.is_member)
        .map(|r| r.scores.max_score())
        .collect();
    let emd_vs_members = emd_1d(&member_maxes, &nonmember_maxes)?;

    let mut nonmember_tags: Vec<&str> = records
        .iter()
        .filter(|r| !r.is_member)
        .map(|r| r.source_tag.as_str())
        .collect();
    nonmember_tags.sort_unstable();
    nonmember_tags.dedup();
    let dataset = nonmember_tags.join("+");

    Ok(EvalReport {
        attack: attack.name().to_string(),
        dataset,
        precision: precision.value,
        recall: recall.value,
        fpr: fpr.value,
        auroc: auroc_value,
        auprc: auprc_value,
        fpr_at_95tpr: fpr95,
        mmps_fp,
        mmps_tn,
        ece: None,
        oe: None,
        emd_vs_members,
        counts,
        degenerate_flags,
    })
}
