use std::io::Write;

use serde::{Deserialize, Serialize};

use super::input::ModelFrame;
use super::train::{is_primed, predict_many, score_pt, TrainedModel};
use crate::dataset::SequenceSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` count as positive; the first point uses +inf.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub roc_points: Vec<RocPoint>,
    pub auc: f64,
    pub tpr_at_primed: f64,
    pub fpr_at_primed: f64,
    /// Counts at the `p_t > 0` operating point.
    pub confusion: Confusion,
    pub prevalence: f64,
    pub posteriors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub auc: f64,
    pub tpr_at_primed: f64,
    pub fpr_at_primed: f64,
    pub confusion: Confusion,
    pub n: usize,
    pub positives: usize,
    pub prevalence: f64,
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Domain(format!(
            "AUC is undefined with {pos} positive and {neg} negative samples"
        )));
    }
    Ok((pos, neg))
}

/// ROC by sweeping every distinct score from high to low.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("scores contain NaN".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: t,
        });
    }
    Ok(points)
}

pub fn auc_trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn confusion_at(posteriors: &[f64], labels: &[u8], prevalence: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &l) in posteriors.iter().zip(labels) {
        match (is_primed(score_pt(p, prevalence)), l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Report over precomputed posteriors.
pub fn evaluate_scores(posteriors: &[f64], labels: &[u8], prevalence: f64) -> Result<EvalReport> {
    let roc_points = roc_curve(posteriors, labels)?;
    let auc = auc_trapezoid(&roc_points);
    let confusion = confusion_at(posteriors, labels, prevalence);
    Ok(EvalReport {
        auc,
        tpr_at_primed: confusion.tp as f64 / (confusion.tp + confusion.fn_) as f64,
        fpr_at_primed: confusion.fp as f64 / (confusion.fp + confusion.tn) as f64,
        confusion,
        roc_points,
        prevalence,
        posteriors: posteriors.to_vec(),
    })
}

pub fn evaluate<F: ModelFrame>(model: &TrainedModel, samples: &[SequenceSample<F>]) -> Result<EvalReport> {
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    class_counts(&labels)?;
    let posteriors = predict_many(model, samples)?;
    evaluate_scores(&posteriors, &labels, model.prevalence)
}

impl EvalReport {
    pub fn summary(&self) -> EvalSummary {
        let c = self.confusion;
        EvalSummary {
            auc: self.auc,
            tpr_at_primed: self.tpr_at_primed,
            fpr_at_primed: self.fpr_at_primed,
            confusion: c,
            n: c.tp + c.fp + c.tn + c.fn_,
            positives: c.tp + c.fn_,
            prevalence: self.prevalence,
        }
    }

    pub fn write_roc_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["fpr", "tpr", "threshold"]).map_err(csv_err)?;
        for p in &self.roc_points {
            out.write_record([format!("{:?}", p.fpr), format!("{:?}", p.tpr), format!("{:?}", p.threshold)])
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv write failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Mann-Whitney count with ties at half weight.
    fn pair_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
        wins / pairs
    }

    #[test]
    fn separated_scores_give_unit_auc() {
        let r = evaluate_scores(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0], 0.5).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.confusion, Confusion { tp: 2, fp: 0, tn: 2, fn_: 0 });
        assert_eq!((r.tpr_at_primed, r.fpr_at_primed), (1.0, 0.0));
    }

    #[test]
    fn random_scores_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let labels: Vec<u8> = (0..10_000).map(|_| rng.random_bool(0.4) as u8).collect();
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let auc = auc_trapezoid(&roc_curve(&scores, &labels).unwrap());
        assert!((0.47..=0.53).contains(&auc), "auc {auc}");
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[1, 1]), Err(Error::Domain(_))));
        assert!(roc_curve(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn exports() {
        let r = evaluate_scores(&[0.9, 0.4, 0.4, 0.1], &[1, 0, 1, 0], 0.5).unwrap();
        let mut buf = Vec::new();
        r.write_roc_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("fpr,tpr,threshold\n0.0,0.0,inf\n"));
        assert_eq!(text.lines().count(), 1 + r.roc_points.len());
        let v: serde_json::Value = serde_json::from_str(&r.summary_json().unwrap()).unwrap();
        assert_eq!(v["confusion"]["fn"], 1);
        assert_eq!(v["n"], 4);
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        prop::collection::vec((0u8..6, 0u8..2), 2..60).prop_filter_map("two classes", |v| {
            let labels: Vec<u8> = v.iter().map(|p| p.1).collect();
            let pos = labels.iter().filter(|&&l| l == 1).count();
            (pos > 0 && pos < labels.len()).then(|| (v.iter().map(|p| p.0 as f64 / 5.0).collect(), labels))
        })
    }

    proptest! {
        #[test]
        fn trapezoid_equals_pair_count((scores, labels) in scored()) {
            let pts = roc_curve(&scores, &labels).unwrap();
            prop_assert!((auc_trapezoid(&pts) - pair_auc(&scores, &labels)).abs() < 1e-9);
        }

        #[test]
        fn roc_is_monotone((scores, labels) in scored()) {
            let pts = roc_curve(&scores, &labels).unwrap();
            for w in pts.windows(2) {
                prop_assert!(w[1].threshold < w[0].threshold);
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
            let last = pts.last().unwrap();
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            let auc = auc_trapezoid(&pts);
            prop_assert!((0.0..=1.0).contains(&auc));
        }

        #[test]
        fn auc_invariant_under_increasing_maps((scores, labels) in scored()) {
            let a = auc_trapezoid(&roc_curve(&scores, &labels).unwrap());
            let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            let b = auc_trapezoid(&roc_curve(&mapped, &labels).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
