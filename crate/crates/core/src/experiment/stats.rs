use serde::Serialize;

use super::ExperimentError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Quantile at probability `p` of already-sorted data, taken at rank
/// `h = (n - 1) p + 1` with linear interpolation between neighbours.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(samples: &[f64]) -> Result<Quartiles, ExperimentError> {
    if samples.is_empty() {
        return Err(ExperimentError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = sorted_quantile(&sorted, 0.25);
    let median = sorted_quantile(&sorted, 0.5);
    let q3 = sorted_quantile(&sorted, 0.75);
    Ok(Quartiles {
        q1,
        median,
        q3,
        iqr: q3 - q1,
    })
}

/// Quartiles plus mean and sample count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub mean: f64,
}

pub fn summarize(samples: &[f64]) -> Option<Summary> {
    let q = quartiles(samples).ok()?;
    Some(Summary {
        n: samples.len(),
        q1: q.q1,
        median: q.median,
        q3: q.q3,
        iqr: q.iqr,
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
    })
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3, q.iqr), (2.0, 3.0, 4.0, 2.0));
        let q = quartiles(&[7.0, 7.0, 7.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3, q.iqr), (7.0, 7.0, 7.0, 0.0));
        let q = quartiles(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3, q.iqr), (1.75, 2.5, 3.25, 1.5));
        assert!(matches!(quartiles(&[]), Err(ExperimentError::EmptySamples)));
    }

    #[test]
    fn single_sample() {
        let q = quartiles(&[3.5]).unwrap();
        assert_eq!((q.q1, q.median, q.q3, q.iqr), (3.5, 3.5, 3.5, 0.0));
    }

    proptest! {
        #[test]
        fn ordered(xs in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let q = quartiles(&xs).unwrap();
            prop_assert!(q.q1 <= q.median && q.median <= q.q3);
            prop_assert!(q.iqr >= 0.0);
            let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min <= q.q1 && q.q3 <= max);
        }
    }
}
