use serde::{Deserialize, Serialize};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningMeanStd {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningMeanStd {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn extend(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.push(x);
        }
    }

    /// Population variance.
    pub fn var(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.var().sqrt()
    }

    /// `(x - mean) / std`, leaving the scale alone while the spread is negligible.
    pub fn standardize(&self, x: f64) -> f64 {
        let s = self.std();
        if s < 1e-8 {
            x - self.mean
        } else {
            (x - self.mean) / s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass() {
        let xs = [0.0, 0.5, 0.0, 0.0, 1.0, 0.25, 0.0];
        let mut r = RunningMeanStd::new();
        r.extend(xs);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((r.mean - mean).abs() < 1e-15);
        assert!((r.var() - var).abs() < 1e-15);
    }
}
