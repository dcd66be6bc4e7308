//! Seed aggregation.

/// Mean, sample standard deviation (n - 1 denominator) and sample count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// `None` for fewer than two samples.
    pub std: Option<f64>,
    pub n: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some(libm::sqrt(ss / (xs.len() - 1) as f64))
}

pub fn summarize(xs: &[f64]) -> Summary {
    Summary {
        mean: mean(xs),
        std: sample_std(xs),
        n: xs.len(),
    }
}
