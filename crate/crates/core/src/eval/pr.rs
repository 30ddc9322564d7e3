use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub proportion_flagged: f64,
    /// `None` when nothing is flagged.
    pub precision: Option<f64>,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub prevalence: f64,
}

pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Number of grid intervals for a step size.
pub fn grid_steps(grid_step: f64) -> Result<usize, EvalError> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(EvalError::GridStep(grid_step));
    }
    Ok((1.0 / grid_step).round() as usize)
}

/// Flag `score >= t` at `t = i / steps`, `i = 0..=steps`.
pub fn pr_curve(scores: &[f64], labels: &[bool], grid_step: f64) -> Result<PrCurve, EvalError> {
    let steps = grid_steps(grid_step)?;
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    // tp[j]: positives among the j highest scores.
    let mut tp = Vec::with_capacity(n + 1);
    tp.push(0usize);
    for &i in &order {
        tp.push(tp.last().unwrap() + usize::from(labels[i]));
    }
    let points = (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let flagged = sorted.partition_point(|&s| s >= t);
            let hits = tp[flagged];
            PrPoint {
                threshold: t,
                proportion_flagged: flagged as f64 / n as f64,
                precision: (flagged > 0).then(|| hits as f64 / flagged as f64),
                recall: hits as f64 / positives as f64,
            }
        })
        .collect();
    Ok(PrCurve {
        points,
        prevalence: positives as f64 / n as f64,
    })
}

impl PrCurve {
    /// Precision at a proportion flagged, interpolating linearly between the
    /// grid points that bracket it. Outside the covered range the nearest
    /// defined point is used.
    pub fn precision_at_flagged(&self, q: f64) -> Option<f64> {
        let mut pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter_map(|p| p.precision.map(|v| (p.proportion_flagged, v)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|b, a| a.0 == b.0);
        let first = *pts.first()?;
        let last = *pts.last()?;
        if q <= first.0 {
            return Some(first.1);
        }
        if q >= last.0 {
            return Some(last.1);
        }
        let j = pts.partition_point(|p| p.0 < q);
        let (x0, y0) = pts[j - 1];
        let (x1, y1) = pts[j];
        Some(y0 + (y1 - y0) * (q - x0) / (x1 - x0))
    }

    /// Mean precision over `0.01, 0.02, …, max_flagged`, times
    /// `max_flagged`.
    pub fn area_under_precision(&self, max_flagged: f64) -> Option<f64> {
        let n = (max_flagged * 100.0).round() as usize;
        if n == 0 {
            return Some(0.0);
        }
        let mut s = 0.0;
        for j in 1..=n {
            s += self.precision_at_flagged(j as f64 / 100.0)?;
        }
        Some(s / n as f64 * max_flagged)
    }
}

/// Flat precision at the prevalence and diagonal recall, sampled on the
/// proportion-flagged axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReference {
    /// (proportion_flagged, precision)
    pub precision: Vec<(f64, f64)>,
    /// (proportion_flagged, recall)
    pub recall: Vec<(f64, f64)>,
}

pub fn baseline_references(prevalence: f64) -> Result<BaselineReference, EvalError> {
    if !(prevalence > 0.0 && prevalence <= 1.0) {
        return Err(EvalError::Prevalence(prevalence));
    }
    let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    Ok(BaselineReference {
        precision: xs.iter().map(|&x| (x, prevalence)).collect(),
        recall: xs.iter().map(|&x| (x, x)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(c: &PrCurve, t: f64) -> &PrPoint {
        c.points
            .iter()
            .find(|p| (p.threshold - t).abs() < 1e-12)
            .unwrap()
    }

    #[test]
    fn hand_enumerated_point() {
        let c = pr_curve(&[0.9, 0.8, 0.4, 0.2], &[true, true, false, true], 0.01).unwrap();
        let p = at(&c, 0.5);
        assert_eq!(p.precision, Some(1.0));
        assert_eq!(p.recall, 2.0 / 3.0);
        let z = at(&c, 0.0);
        assert_eq!(z.recall, 1.0);
        assert_eq!(z.proportion_flagged, 1.0);
        assert_eq!(z.precision, Some(0.75));
        let top = c.points.last().unwrap();
        assert_eq!(top.threshold, 1.0);
        assert_eq!(top.precision, None);
        assert_eq!(top.recall, 0.0);
    }

    #[test]
    fn no_positives_is_error() {
        assert_eq!(pr_curve(&[0.1], &[false], 0.1), Err(EvalError::NoPositives));
    }

    #[test]
    fn curves_are_monotone() {
        let s: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 50.0).collect();
        let l: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let c = pr_curve(&s, &l, 0.05).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].recall <= w[0].recall);
            assert!(w[1].proportion_flagged <= w[0].proportion_flagged);
        }
    }

    #[test]
    fn interpolation_between_points() {
        let c = PrCurve {
            prevalence: 0.5,
            points: vec![
                PrPoint {
                    threshold: 0.0,
                    proportion_flagged: 1.0,
                    precision: Some(0.5),
                    recall: 1.0,
                },
                PrPoint {
                    threshold: 0.5,
                    proportion_flagged: 0.2,
                    precision: Some(0.9),
                    recall: 0.36,
                },
                PrPoint {
                    threshold: 1.0,
                    proportion_flagged: 0.0,
                    precision: None,
                    recall: 0.0,
                },
            ],
        };
        assert!((c.precision_at_flagged(0.6).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(c.precision_at_flagged(0.1), Some(0.9));
        assert_eq!(c.precision_at_flagged(1.0), Some(0.5));
    }

    #[test]
    fn baselines() {
        let b = baseline_references(0.92).unwrap();
        assert!(b.precision.iter().all(|p| p.1 == 0.92));
        assert!(b.recall.iter().any(|p| p.0 == 0.5 && p.1 == 0.5));
        assert!(baseline_references(1.0)
            .unwrap()
            .precision
            .iter()
            .all(|p| p.1 == 1.0));
        assert!(baseline_references(0.0).is_err());
    }
}
