use crate::scalar::Scalar;

/// Euclidean projection onto the probability simplex `{w >= 0, sum w = 1}`.
///
/// Sort-based threshold search, `O(N log N)`: the projection is
/// `max(v_i - t, 0)` for the unique `t` making the result sum to one.
/// Non-finite entries are not supported; the caller checks finiteness.
pub fn simplex_project<T: Scalar>(v: &[T]) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.cmp_total(a));
    let mut cumsum = T::zero();
    let mut threshold = T::zero();
    for (k, &x) in s.iter().enumerate() {
        cumsum = cumsum + x;
        let t = (cumsum - T::one()) / T::from_usize_lossy(k + 1);
        if x - t > T::zero() {
            threshold = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - threshold).max(T::zero())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(simplex_project(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(simplex_project(&[2.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(simplex_project(&[0.0, 0.0, 0.0, 0.0]), vec![0.25; 4]);
        let w = simplex_project(&[-5.0, 10.0, -5.0]);
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn lands_on_simplex_and_is_idempotent(v in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let w = simplex_project(&v);
            let s: f64 = w.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            let again = simplex_project(&w);
            for (a, b) in w.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn shift_invariant(v in proptest::collection::vec(-3.0f64..3.0, 1..20), c in -5.0f64..5.0) {
            let a = simplex_project(&v);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = simplex_project(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
