use crate::error::{Error, Result};

/// Nearest-rank percentile: the element at index `ceil(p/100 · n) − 1` of the
/// sorted values, index 0 for `p = 0`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty list".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank_index(sorted.len(), p)])
}

/// Percentile over values already sorted ascending.
pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    sorted[rank_index(sorted.len(), p)]
}

fn rank_index(n: usize, p: f64) -> usize {
    // p·n/100 rather than p/100·n keeps integer-valued products exact.
    let rank = (p * n as f64 / 100.0).ceil() as usize;
    rank.saturating_sub(1).min(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_to_hundred() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(percentile(&v, 95.0).unwrap(), 95.0);
        assert_eq!(percentile(&v, 99.0).unwrap(), 99.0);
        assert_eq!(percentile(&v, 50.0).unwrap(), 50.0);
        assert_eq!(percentile(&v, 5.0).unwrap(), 5.0);
    }

    #[test]
    fn single_element() {
        for p in [0.0, 12.5, 50.0, 100.0] {
            assert_eq!(percentile(&[7.0], p).unwrap(), 7.0);
        }
    }

    #[test]
    fn bounds_and_errors() {
        let v = [3.0, -1.0, 8.0, 2.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), -1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 8.0);
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&v, 101.0).is_err());
    }

    proptest! {
        #[test]
        fn matches_sorted_rank_oracle(v in prop::collection::vec(-1e6f64..1e6, 1..200), p in 0.0f64..=100.0) {
            let mut s = v.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = s.len();
            // Smallest element with at least p% of the list at or below it.
            let expected = s.iter().enumerate()
                .find(|(i, _)| (*i as f64 + 1.0) * 100.0 >= p * n as f64 - 1e-9)
                .map(|(_, x)| *x)
                .unwrap();
            prop_assert_eq!(percentile(&v, p).unwrap(), expected);
        }
    }
}
