use serde::{Deserialize, Serialize};

/// Standardized training points and their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbors {
    pub k: usize,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Row-major, already standardized.
    pub points: Vec<f64>,
    pub labels: Vec<bool>,
}

impl Neighbors {
    pub fn fit(cols: &[Vec<f64>], labels: &[bool], k: usize) -> Neighbors {
        let n = labels.len();
        let p = cols.len();
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for c in cols {
            let m = c.iter().sum::<f64>() / n as f64;
            let var = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            means.push(m);
            scales.push(if sd > 0.0 { sd } else { 1.0 });
        }
        let mut points = Vec::with_capacity(n * p);
        for i in 0..n {
            for j in 0..p {
                points.push((cols[j][i] - means[j]) / scales[j]);
            }
        }
        Neighbors {
            k,
            means,
            scales,
            points,
            labels: labels.to_vec(),
        }
    }

    /// Positive share among the k nearest; every point tied with the k-th
    /// distance is included.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let p = self.means.len();
        let n = self.labels.len();
        if n == 0 {
            return 0.0;
        }
        let q: Vec<f64> = row
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        let dist: Vec<f64> = (0..n)
            .map(|i| {
                self.points[i * p..(i + 1) * p]
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            })
            .collect();
        let k = self.k.clamp(1, n);
        let mut sorted = dist.clone();
        let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
        let kth = *kth;
        let (mut pos, mut count) = (0usize, 0usize);
        for (d, &l) in dist.iter().zip(&self.labels) {
            if *d <= kth {
                count += 1;
                pos += usize::from(l);
            }
        }
        pos as f64 / count as f64
    }
}
