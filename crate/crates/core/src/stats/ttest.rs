use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample t-test without assuming equal variances.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "welch test needs two observations per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(StatsError::InsufficientData("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| StatsError::InvalidInput(format!("t distribution: {e}")))?;
    let p_two_sided = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(WelchResult { t, df, p_two_sided })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Closed-form Student t CDF for even degrees of freedom.
    pub(crate) fn t_cdf_even_df(t: f64, df: u32) -> f64 {
        assert!(df % 2 == 0 && df > 0);
        let nu = df as f64;
        let x = nu / (nu + t * t);
        let (mut term, mut sum) = (1.0, 1.0);
        for j in 1..df / 2 {
            term *= (2 * j - 1) as f64 / (2 * j) as f64 * x;
            sum += term;
        }
        0.5 + t / (2.0 * (nu + t * t).sqrt()) * sum
    }

    #[test]
    fn oracle_sanity() {
        assert!((t_cdf_even_df(0.0, 8) - 0.5).abs() < 1e-15);
        // df = 2: F(t) = 1/2 + t / (2 sqrt(2 + t^2))
        assert!((t_cdf_even_df(1.0, 2) - (0.5 + 1.0 / (2.0 * 3f64.sqrt()))).abs() < 1e-15);
    }

    #[test]
    fn shifted_fixture_matches_hand_oracle() {
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        // means 3 and 4, variances 2.5 each: se = 1, t = -1, df = 8
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        let oracle = 2.0 * (1.0 - t_cdf_even_df(1.0, 8));
        assert!((r.p_two_sided - oracle).abs() < 1e-3);
        assert!((r.p_two_sided - 0.3466).abs() < 1e-3);
    }

    #[test]
    fn identical_samples() {
        let r = welch_t_test(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p_two_sided - 1.0).abs() < 1e-12);
    }

    #[test]
    fn insufficient_data() {
        assert!(matches!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(StatsError::InsufficientData(_))));
        assert!(matches!(
            welch_t_test(&[1.0, 1.0], &[2.0, 2.0]),
            Err(StatsError::InsufficientData(_))
        ));
    }

    proptest! {
        #[test]
        fn antisymmetric(a in prop::collection::vec(-100.0f64..100.0, 2..20),
                         b in prop::collection::vec(-100.0f64..100.0, 2..20)) {
            if let (Ok(x), Ok(y)) = (welch_t_test(&a, &b), welch_t_test(&b, &a)) {
                prop_assert!((x.t + y.t).abs() < 1e-9);
                prop_assert!((x.df - y.df).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&x.p_two_sided));
            }
        }
    }
}
