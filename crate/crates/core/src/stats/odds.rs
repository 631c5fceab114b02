use super::StatsError;

/// Odds ratio kept as an exact fraction. With the 0.5 correction every
/// count is doubled and incremented, which leaves the ratio unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct OddsRatio {
    pub numerator: u128,
    pub denominator: u128,
    pub corrected: bool,
}

impl OddsRatio {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// `(a/b) / (c/d)` where `a`/`b` count successes with/without the dimension
/// and `c`/`d` failures with/without it. A zero cell adds 0.5 to all four.
pub fn odds_ratio(a: u64, b: u64, c: u64, d: u64) -> Result<OddsRatio, StatsError> {
    if a + b == 0 || c + d == 0 || a + c == 0 || b + d == 0 {
        return Err(StatsError::AllZeroMargin);
    }
    let corrected = [a, b, c, d].contains(&0);
    let adj = |x: u64| {
        if corrected {
            2 * x as u128 + 1
        } else {
            x as u128
        }
    };
    Ok(OddsRatio {
        numerator: adj(a) * adj(d),
        denominator: adj(b) * adj(c),
        corrected,
    })
}
