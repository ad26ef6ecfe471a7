use blocksim_core::ipe::StabilityLabel;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("inputs are empty")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("correlation is undefined for constant input")]
    Constant,
    #[error("pearson needs at least two points")]
    TooShort,
}

/// Overall and per-class accuracy. A class-specific accuracy is `None`
/// when no truth falls in that class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub overall: f64,
    pub stable: Option<f64>,
    pub unstable: Option<f64>,
    pub n: usize,
    pub n_stable: usize,
    pub n_unstable: usize,
}

pub fn accuracy(predictions: &[StabilityLabel], truths: &[StabilityLabel]) -> Result<Accuracy, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::Length(predictions.len(), truths.len()));
    }
    if truths.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for (p, t) in predictions.iter().zip(truths) {
        let class = usize::from(*t == StabilityLabel::Unstable);
        totals[class] += 1;
        hits[class] += usize::from(p == t);
    }
    let frac = |h: usize, n: usize| (n > 0).then(|| h as f64 / n as f64);
    Ok(Accuracy {
        overall: (hits[0] + hits[1]) as f64 / truths.len() as f64,
        stable: frac(hits[0], totals[0]),
        unstable: frac(hits[1], totals[1]),
        n: truths.len(),
        n_stable: totals[0],
        n_unstable: totals[1],
    })
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::Length(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::TooShort);
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
