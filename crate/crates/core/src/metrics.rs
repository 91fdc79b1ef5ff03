//! Confusion-matrix statistics and ROC/AUC.
//!
//! The ROC sweeps a threshold over every distinct score (descending),
//! grouping ties, so the trapezoidal area equals the Mann–Whitney
//! statistic P(score⁺ > score⁻) + ½·P(score⁺ = score⁻) exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One ROC operating point: the rates obtained by predicting positive
/// whenever score ≥ `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// +∞ for the (0,0) sentinel (nothing predicted positive).
    pub threshold: f64,
}

/// Binary-classification evaluation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub acc: f64,
    pub sen: f64,
    pub spe: f64,
    pub auc: f64,
    pub roc_points: Vec<RocPoint>,
    /// True when the split had no positive labels; `sen` is then
    /// reported as 0 and `auc` as the chance value 0.5.
    pub sen_undefined: bool,
    /// True when the split had no negative labels; `spe` is then
    /// reported as 0 and `auc` as the chance value 0.5.
    pub spe_undefined: bool,
}

fn check_scores(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::argument("no samples to evaluate"));
    }
    if scores.len() != labels.len() {
        return Err(Error::argument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    for (i, &s) in scores.iter().enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::argument(format!(
                "score[{i}] = {s} outside [0, 1]"
            )));
        }
    }
    for (i, &l) in labels.iter().enumerate() {
        if l > 1 {
            return Err(Error::argument(format!("label[{i}] = {l}, expected 0 or 1")));
        }
    }
    Ok(())
}

/// Tally (tp, fp, tn, fn) under the rule: predicted positive iff
/// score ≥ threshold.
pub fn confusion(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<(usize, usize, usize, usize)> {
    check_scores(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok((tp, fp, tn, fn_))
}

/// ROC curve and area. Points start at (0,0) (threshold +∞) and end at
/// (1,1) (threshold = lowest score, which already predicts every sample
/// positive, so no −∞ sentinel is needed). Requires both classes.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<RocPoint>)> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::argument("no positive labels present"));
    }
    if n_neg == 0 {
        return Err(Error::argument("no negative labels present"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        // Consume the whole tie group before emitting a point, so ties
        // contribute a single diagonal segment (the ½ term).
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: s,
        });
    }

    let mut auc = 0.0;
    for pair in points.windows(2) {
        auc += (pair[1].fpr - pair[0].fpr) * (pair[0].tpr + pair[1].tpr) / 2.0;
    }
    Ok((auc, points))
}

impl EvalReport {
    /// Build the full report at the given decision threshold.
    ///
    /// When one class is absent the corresponding rate is reported as 0
    /// with its `*_undefined` flag set, and `auc` falls back to the
    /// chance diagonal (0.5) since no ranking information exists.
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport> {
        let (tp, fp, tn, fn_) = confusion(scores, labels, threshold)?;
        let total = (tp + fp + tn + fn_) as f64;
        let acc = (tp + tn) as f64 / total;
        let sen_undefined = tp + fn_ == 0;
        let spe_undefined = tn + fp == 0;
        let sen = if sen_undefined {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let spe = if spe_undefined {
            0.0
        } else {
            tn as f64 / (tn + fp) as f64
        };
        let (auc, roc_points) = if sen_undefined || spe_undefined {
            (
                0.5,
                vec![
                    RocPoint {
                        fpr: 0.0,
                        tpr: 0.0,
                        threshold: f64::INFINITY,
                    },
                    RocPoint {
                        fpr: 1.0,
                        tpr: 1.0,
                        threshold: 0.0,
                    },
                ],
            )
        } else {
            roc_auc(scores, labels)?
        };
        Ok(EvalReport {
            tp,
            fp,
            tn,
            fn_,
            acc,
            sen,
            spe,
            auc,
            roc_points,
            sen_undefined,
            spe_undefined,
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The machine-readable one-liner, columns in fixed order.
    pub fn summary_line(&self) -> String {
        format!(
            "AUC={:.4} ACC={:.4} SEN={:.4} SPE={:.4}",
            self.auc, self.acc, self.sen, self.spe
        )
    }
}

/// Render ROC points as `fpr<TAB>tpr<TAB>threshold` lines. The +∞
/// sentinel prints as `inf`, which numeric plotting tools accept.
pub fn roc_to_text(points: &[RocPoint]) -> String {
    let mut out = String::new();
    for p in points {
        let _ = writeln!(out, "{}\t{}\t{}", p.fpr, p.tpr, p.threshold);
    }
    out
}

pub fn write_roc(points: &[RocPoint], path: &Path) -> Result<()> {
    std::fs::write(path, roc_to_text(points))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    /// Independent AUC oracle: count the pairwise wins directly.
    fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
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
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    fn random_set(rng: &mut SplitMix64, n: usize, tie_grid: Option<u64>) -> (Vec<f64>, Vec<u8>) {
        loop {
            let scores: Vec<f64> = (0..n)
                .map(|_| match tie_grid {
                    Some(g) => rng.below(g + 1) as f64 / g as f64,
                    None => rng.next_f64(),
                })
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
            let pos = labels.iter().filter(|&&l| l == 1).count();
            if pos > 0 && pos < n {
                return (scores, labels);
            }
        }
    }

    #[test]
    fn confusion_perfect_separation() {
        let (tp, fp, tn, fn_) = confusion(&[0.9, 0.1], &[1, 0], 0.5).unwrap();
        assert_eq!((tp, fp, tn, fn_), (1, 0, 1, 0));
        let report = EvalReport::from_scores(&[0.9, 0.1], &[1, 0], 0.5).unwrap();
        assert_eq!(report.acc, 1.0);
    }

    #[test]
    fn confusion_threshold_tie_counts_as_positive() {
        let (tp, fp, tn, fn_) = confusion(&[0.5, 0.5], &[1, 0], 0.5).unwrap();
        assert_eq!((tp, fp, tn, fn_), (1, 1, 0, 0));
    }

    #[test]
    fn confusion_matches_direct_recount() {
        let mut rng = SplitMix64::new(0xC0);
        let (scores, labels) = random_set(&mut rng, 100, None);
        for &threshold in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let (tp, fp, tn, fn_) = confusion(&scores, &labels, threshold).unwrap();
            let (mut etp, mut efp, mut etn, mut efn) = (0, 0, 0, 0);
            for k in 0..100 {
                let pred = scores[k] >= threshold;
                match (pred, labels[k]) {
                    (true, 1) => etp += 1,
                    (true, 0) => efp += 1,
                    (false, 0) => etn += 1,
                    (false, 1) => efn += 1,
                    _ => unreachable!(),
                }
            }
            assert_eq!((tp, fp, tn, fn_), (etp, efp, etn, efn));
        }
    }

    #[test]
    fn confusion_rejects_bad_input() {
        assert!(confusion(&[], &[], 0.5).is_err());
        assert!(confusion(&[0.5], &[1, 0], 0.5).is_err());
        assert!(confusion(&[1.2], &[1], 0.5).is_err());
        assert!(confusion(&[-0.1], &[0], 0.5).is_err());
        assert!(confusion(&[f64::NAN], &[0], 0.5).is_err());
        assert!(confusion(&[0.5], &[2], 0.5).is_err());
    }

    #[test]
    fn auc_perfect_separation_is_one() {
        let (auc, _) = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let (auc, points) = roc_auc(&[0.4, 0.4, 0.4, 0.4], &[1, 0, 1, 0]).unwrap();
        assert_eq!(auc, 0.5);
        // One tie group: straight diagonal (0,0) → (1,1).
        assert_eq!(points.len(), 2);
    }

    #[test]
    fn auc_hand_example_three_of_four_pairs() {
        // Pairs (pos, neg): (0.8,0.6)✓ (0.8,0.2)✓ (0.4,0.6)✗ (0.4,0.2)✓ → 3/4.
        let (auc, points) = roc_auc(&[0.8, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).unwrap();
        assert_eq!(auc, 0.75);
        let expect = [
            (0.0, 0.0, f64::INFINITY),
            (0.0, 0.5, 0.8),
            (0.5, 0.5, 0.6),
            (0.5, 1.0, 0.4),
            (1.0, 1.0, 0.2),
        ];
        assert_eq!(points.len(), expect.len());
        for (p, &(fpr, tpr, t)) in points.iter().zip(&expect) {
            assert_eq!((p.fpr, p.tpr, p.threshold), (fpr, tpr, t));
        }
    }

    #[test]
    fn auc_equals_mann_whitney_on_1000_random_sets() {
        let mut rng = SplitMix64::new(0xA0C);
        for trial in 0..1000u64 {
            // Odd trials use a coarse grid to force ties.
            let grid = if trial % 2 == 1 { Some(8) } else { None };
            let n = 2 + rng.below(40) as usize;
            let (scores, labels) = random_set(&mut rng, n, grid);
            let (auc, _) = roc_auc(&scores, &labels).unwrap();
            let oracle = mann_whitney(&scores, &labels);
            assert!(
                (auc - oracle).abs() < 1e-12,
                "trial {trial}: trapezoid {auc} vs pairwise {oracle}"
            );
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transforms() {
        let mut rng = SplitMix64::new(0x707);
        let transforms: [fn(f64) -> f64; 3] = [
            |x| x * x * x,
            |x| 0.1 + 0.8 * x,
            |x| x.exp() / (1.0 + std::f64::consts::E), // keeps range inside [0,1]
        ];
        for _ in 0..50 {
            let (scores, labels) = random_set(&mut rng, 30, Some(10));
            let (base, _) = roc_auc(&scores, &labels).unwrap();
            for f in transforms {
                let mapped: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
                let (auc, _) = roc_auc(&mapped, &labels).unwrap();
                assert!((auc - base).abs() < 1e-12, "{auc} vs {base}");
            }
        }
    }

    #[test]
    fn roc_points_start_end_and_monotone() {
        let mut rng = SplitMix64::new(0x514);
        for _ in 0..50 {
            let (scores, labels) = random_set(&mut rng, 25, Some(6));
            let (_, points) = roc_auc(&scores, &labels).unwrap();
            let first = points.first().unwrap();
            let last = points.last().unwrap();
            assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
            assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            for pair in points.windows(2) {
                assert!(pair[1].fpr >= pair[0].fpr);
                assert!(pair[1].tpr >= pair[0].tpr);
                assert!(pair[1].threshold < pair[0].threshold);
            }
        }
    }

    #[test]
    fn confusion_rates_match_roc_point_at_same_threshold() {
        // sen(t) = tpr and 1 − spe(t) = fpr at the ROC point threshold t emits.
        let mut rng = SplitMix64::new(0x99);
        for _ in 0..20 {
            let (scores, labels) = random_set(&mut rng, 30, Some(5));
            let (_, points) = roc_auc(&scores, &labels).unwrap();
            for p in points.iter().skip(1) {
                let (tp, fp, tn, fn_) = confusion(&scores, &labels, p.threshold).unwrap();
                let sen = tp as f64 / (tp + fn_) as f64;
                let spe = tn as f64 / (tn + fp) as f64;
                assert!((sen - p.tpr).abs() < 1e-12);
                assert!(((1.0 - spe) - p.fpr).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn auc_rejects_single_class_naming_missing_one() {
        let err = roc_auc(&[0.2, 0.8], &[1, 1]).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
        let err = roc_auc(&[0.2, 0.8], &[0, 0]).unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn report_counts_and_rates_are_consistent() {
        let mut rng = SplitMix64::new(0xE7);
        let (scores, labels) = random_set(&mut rng, 60, None);
        let report = EvalReport::from_scores(&scores, &labels, 0.5).unwrap();
        assert_eq!(report.total(), 60);
        assert_eq!(
            report.acc,
            (report.tp + report.tn) as f64 / 60.0
        );
        assert_eq!(report.sen, report.tp as f64 / (report.tp + report.fn_) as f64);
        assert_eq!(report.spe, report.tn as f64 / (report.tn + report.fp) as f64);
        assert!(!report.sen_undefined && !report.spe_undefined);
        assert!((0.0..=1.0).contains(&report.auc));
    }

    #[test]
    fn report_flags_missing_class_and_falls_back_to_chance_auc() {
        let report = EvalReport::from_scores(&[0.9, 0.7], &[1, 1], 0.5).unwrap();
        assert!(report.spe_undefined && !report.sen_undefined);
        assert_eq!(report.spe, 0.0);
        assert_eq!(report.sen, 1.0);
        assert_eq!(report.auc, 0.5);
        let report = EvalReport::from_scores(&[0.1], &[0], 0.5).unwrap();
        assert!(report.sen_undefined && !report.spe_undefined);
        assert_eq!(report.sen, 0.0);
    }

    #[test]
    fn summary_line_has_fixed_column_order() {
        // At threshold 0.5: 0.8→tp, 0.6→fp, 0.4→fn, 0.2→tn.
        let report = EvalReport::from_scores(&[0.8, 0.6, 0.4, 0.2], &[1, 0, 1, 0], 0.5).unwrap();
        assert_eq!((report.tp, report.fp, report.tn, report.fn_), (1, 1, 1, 1));
        assert_eq!(report.summary_line(), "AUC=0.7500 ACC=0.5000 SEN=0.5000 SPE=0.5000");
    }

    #[test]
    fn roc_text_format_is_tab_separated_with_inf_sentinel() {
        let (_, points) = roc_auc(&[0.8, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).unwrap();
        let text = roc_to_text(&points);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "0\t0\tinf");
        assert_eq!(lines[1], "0\t0.5\t0.8");
        assert_eq!(lines[4], "1\t1\t0.2");
        // Every value on every line parses back as f64.
        for line in &lines {
            let fields: Vec<&str> = line.split('\t').collect();
            assert_eq!(fields.len(), 3);
            for f in fields {
                f.parse::<f64>().unwrap();
            }
        }
    }
}
