//! Layout and caption metrics: box IoU, label-matched mean IoU, BLEU-4 and
//! component-count accuracy, with batch report plumbing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Box2, LayoutAnnotation};

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &Box2, b: &Box2) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let ix = (a.x_br.min(b.x_br) - a.x_tl.max(b.x_tl)).max(0.0);
    let iy = (a.y_br.min(b.y_br) - a.y_tl.max(b.y_tl)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    Ok(inter / union)
}

/// Mean IoU over ground-truth components. Components match by identical
/// label; duplicate labels pair greedily by descending IoU; unmatched
/// ground-truth components contribute 0.
pub fn miou(pred: &LayoutAnnotation, gt: &LayoutAnnotation) -> Result<f64> {
    if gt.components.is_empty() {
        return Err(Error::argument("ground-truth layout has no components"));
    }
    let mut by_label: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, c) in gt.components.iter().enumerate() {
        by_label.entry(&c.label).or_default().0.push(i);
    }
    for (i, c) in pred.components.iter().enumerate() {
        by_label.entry(&c.label).or_default().1.push(i);
    }
    let mut total = 0.0;
    for (gt_idx, pred_idx) in by_label.values() {
        if gt_idx.is_empty() {
            continue;
        }
        // all label-pair IoUs, matched greedily from the best down
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &g in gt_idx {
            for &p in pred_idx {
                pairs.push((
                    iou(&gt.components[g].box_, &pred.components[p].box_)?,
                    g,
                    p,
                ));
            }
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_gt = vec![false; gt.components.len()];
        let mut used_pred = vec![false; pred.components.len()];
        for (v, g, p) in pairs {
            if !used_gt[g] && !used_pred[p] {
                used_gt[g] = true;
                used_pred[p] = true;
                total += v;
            }
        }
    }
    Ok(total / gt.components.len() as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts: BTreeMap<&[String], usize> = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Classic BLEU-4: geometric mean of clipped 1..4-gram precisions with
/// brevity penalty and no smoothing.
pub fn bleu4(candidate: &[String], references: &[Vec<String>]) -> f64 {
    if candidate.is_empty() || references.iter().all(|r| r.is_empty()) {
        log::warn!("bleu4 over empty candidate or references scores 0");
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let total: usize = cand.values().sum();
        if total == 0 {
            return 0.0;
        }
        let mut clipped = 0usize;
        for (gram, &count) in &cand {
            let max_ref = references
                .iter()
                .map(|r| *ngram_counts(r, n).get(gram).unwrap_or(&0))
                .max()
                .unwrap_or(0);
            clipped += count.min(max_ref);
        }
        if clipped == 0 {
            return 0.0;
        }
        log_sum += 0.25 * (clipped as f64 / total as f64).ln();
    }
    // closest reference length, ties toward the shorter
    let c = candidate.len();
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| ((l as i64 - c as i64).abs(), l))
        .unwrap();
    let bp = if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * log_sum.exp()
}

/// Fraction of samples whose predicted count equals the ground truth.
pub fn count_accuracy(pred: &[usize], gt: &[usize]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::argument(format!(
            "count lists differ in length: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::argument("count lists are empty"));
    }
    let hits = pred.iter().zip(gt).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub metric: String,
    pub per_sample: Vec<f64>,
    pub mean: f64,
    pub skipped: usize,
}

impl EvalReport {
    pub fn new(metric: impl Into<String>, per_sample: Vec<f64>, skipped: usize) -> Self {
        let mean = if per_sample.is_empty() {
            0.0
        } else {
            per_sample.iter().sum::<f64>() / per_sample.len() as f64
        };
        Self {
            metric: metric.into(),
            per_sample,
            mean,
            skipped,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,score\n");
        for (i, v) in self.per_sample.iter().enumerate() {
            out.push_str(&format!("{i},{v:.9}\n"));
        }
        out.push_str(&format!("mean,{:.9}\n", self.mean));
        out
    }
}

#[derive(Deserialize)]
struct LayoutPairWire {
    pred: serde_json::Value,
    gt: serde_json::Value,
}

#[derive(Deserialize)]
struct CaptionPairWire {
    candidate: Vec<String>,
    references: Vec<Vec<String>>,
}

/// Batch mIoU over JSON-lines of {"pred": layout, "gt": layout}.
pub fn batch_miou(jsonl: &str) -> Result<EvalReport> {
    let mut scores = Vec::new();
    let mut skipped = 0usize;
    for (ln, line) in jsonl.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let pair: LayoutPairWire = serde_json::from_str(line)
            .map_err(|e| Error::argument(format!("line {}: {e}", ln + 1)))?;
        let pred = LayoutAnnotation::from_json(&pair.pred.to_string());
        let gt = LayoutAnnotation::from_json(&pair.gt.to_string());
        match (pred, gt) {
            (Ok(p), Ok(g)) => scores.push(miou(&p, &g)?),
            _ => {
                log::warn!("skipping invalid layout pair on line {}", ln + 1);
                skipped += 1;
            }
        }
    }
    if scores.is_empty() && skipped == 0 {
        return Err(Error::argument("no layout pairs in input"));
    }
    Ok(EvalReport::new("miou", scores, skipped))
}

/// Batch BLEU-4 over JSON-lines of {"candidate": [...], "references": [[...]]}.
pub fn batch_bleu(jsonl: &str) -> Result<EvalReport> {
    let mut scores = Vec::new();
    for (ln, line) in jsonl.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let pair: CaptionPairWire = serde_json::from_str(line)
            .map_err(|e| Error::argument(format!("line {}: {e}", ln + 1)))?;
        scores.push(bleu4(&pair.candidate, &pair.references));
    }
    if scores.is_empty() {
        return Err(Error::argument("no caption pairs in input"));
    }
    Ok(EvalReport::new("bleu4", scores, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> Box2 {
        Box2::new(x0, y0, x1, y1)
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn iou_basics() {
        let a = b(0.0, 0.0, 0.5, 0.5);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &b(0.6, 0.6, 0.9, 0.9)).unwrap(), 0.0);
        // inter .25*.5=.125, union .25+.25-.125=.375
        let v = iou(&a, &b(0.25, 0.0, 0.75, 0.5)).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        assert!(iou(&b(0.5, 0.0, 0.5, 1.0), &a).is_err());
    }

    #[test]
    fn iou_symmetry() {
        let a = b(0.1, 0.2, 0.6, 0.9);
        let c = b(0.3, 0.1, 0.8, 0.5);
        assert_eq!(iou(&a, &c).unwrap(), iou(&c, &a).unwrap());
    }

    fn layout(parts: &[(&str, [f64; 4])]) -> LayoutAnnotation {
        let comps: Vec<String> = parts
            .iter()
            .map(|(l, bx)| format!(r#"{{"label":"{l}","box":[{},{},{},{}]}}"#, bx[0], bx[1], bx[2], bx[3]))
            .collect();
        LayoutAnnotation::from_json(&format!(
            r#"{{"id":"x","concept":"c","components":[{}]}}"#,
            comps.join(",")
        ))
        .unwrap()
    }

    #[test]
    fn miou_identity_and_missing() {
        let gt = layout(&[("a", [0.0, 0.0, 0.5, 0.5]), ("b", [0.5, 0.5, 1.0, 1.0])]);
        assert_eq!(miou(&gt, &gt).unwrap(), 1.0);
        let pred = layout(&[("a", [0.0, 0.0, 0.5, 0.5])]);
        assert_eq!(miou(&pred, &gt).unwrap(), 0.5);
    }

    #[test]
    fn miou_duplicate_labels_greedy() {
        let gt = layout(&[("a", [0.0, 0.0, 0.4, 1.0]), ("a", [0.6, 0.0, 1.0, 1.0])]);
        let pred = layout(&[("a", [0.6, 0.0, 1.0, 1.0]), ("a", [0.0, 0.0, 0.4, 1.0])]);
        // greedy pairs each prediction with its exact twin
        assert_eq!(miou(&pred, &gt).unwrap(), 1.0);
        // brute-force over both assignments agrees
        let swap = iou(&gt.components[0].box_, &pred.components[0].box_).unwrap()
            + iou(&gt.components[1].box_, &pred.components[1].box_).unwrap();
        let keep = iou(&gt.components[0].box_, &pred.components[1].box_).unwrap()
            + iou(&gt.components[1].box_, &pred.components[0].box_).unwrap();
        assert_eq!(miou(&pred, &gt).unwrap(), swap.max(keep) / 2.0);
    }

    #[test]
    fn miou_label_mismatch_scores_zero() {
        let gt = layout(&[("a", [0.0, 0.0, 1.0, 1.0])]);
        let pred = layout(&[("b", [0.0, 0.0, 1.0, 1.0])]);
        assert_eq!(miou(&pred, &gt).unwrap(), 0.0);
    }

    #[test]
    fn bleu_identity_and_zero() {
        let c = toks("the cat sat on the mat");
        assert!((bleu4(&c, &[c.clone()]) - 1.0).abs() < 1e-12);
        // no shared 4-gram
        let other = toks("a dog ran in a park today");
        assert_eq!(bleu4(&c, &[other]), 0.0);
        assert_eq!(bleu4(&[], &[c]), 0.0);
    }

    #[test]
    fn bleu_textbook_oracle() {
        // candidate and reference differing in one token
        let cand = toks("the cat sat on the mat here");
        let refr = toks("the cat sat on the mat today");
        // hand counts: 7 tokens; clipped matches 6/7, 5/6, 4/5, 3/4; bp = 1
        let expect = (6.0f64 / 7.0 * 5.0 / 6.0 * 4.0 / 5.0 * 3.0 / 4.0).powf(0.25);
        assert!((bleu4(&cand, &[refr]) - expect).abs() < 1e-12);
    }

    #[test]
    fn bleu_brevity_penalty() {
        let cand = toks("the cat sat on");
        let refr = toks("the cat sat on the mat");
        // precisions all 1, bp = exp(1 - 6/4)
        let expect = (1.0f64 - 6.0 / 4.0).exp();
        assert!((bleu4(&cand, &[refr]) - expect).abs() < 1e-12);
    }

    #[test]
    fn bleu_reference_order_invariant() {
        let cand = toks("the cat sat on the mat");
        let r1 = toks("the cat sat on a mat");
        let r2 = toks("a cat sat on the mat");
        let a = bleu4(&cand, &[r1.clone(), r2.clone()]);
        let b = bleu4(&cand, &[r2, r1]);
        assert_eq!(a, b);
        assert!(a <= 1.0);
    }

    #[test]
    fn count_accuracy_fractions() {
        assert_eq!(count_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(count_accuracy(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(count_accuracy(&[1, 2, 3, 4], &[1, 2, 3, 9]).unwrap(), 0.75);
        assert!(count_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn report_aggregate_is_mean() {
        let r = EvalReport::new("m", vec![0.25, 0.75, 0.5], 0);
        assert!((r.mean - 0.5).abs() < 1e-12);
        assert!(r.to_csv().lines().count() == 5);
        assert!(r.to_json().contains("\"mean\""));
    }

    #[test]
    fn batch_miou_jsonl() {
        let line = r#"{"pred": {"id":"x","concept":"c","components":[{"label":"a","box":[0.0,0.0,1.0,1.0]}]},
                       "gt": {"id":"x","concept":"c","components":[{"label":"a","box":[0.0,0.0,1.0,1.0]}]}}"#
            .replace('\n', " ");
        let report = batch_miou(&format!("{line}\n{line}\n")).unwrap();
        assert_eq!(report.per_sample, vec![1.0, 1.0]);
        assert!(batch_miou("").is_err());
    }

    #[test]
    fn batch_bleu_jsonl() {
        let line = r#"{"candidate": ["a","b","c","d"], "references": [["a","b","c","d"]]}"#;
        let report = batch_bleu(&format!("{line}\n")).unwrap();
        assert!((report.per_sample[0] - 1.0).abs() < 1e-12);
    }
}
