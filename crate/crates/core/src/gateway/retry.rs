use std::time::Duration;

use super::GatewayError;

/// Exponential backoff: retry `i` (0-based) waits `base · 2^i`, capped at
/// `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl RetryPolicy {
    pub fn delay_for(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// The full delay schedule, one entry per permitted retry.
    pub fn schedule(&self) -> Vec<Duration> {
        (0..self.max_retries).map(|i| self.delay_for(i)).collect()
    }

    /// Runs `op` until it succeeds, fails permanently, or the retry budget is
    /// spent. `op` receives the 1-based attempt number.
    pub fn run<T>(
        &self,
        mut sleep: impl FnMut(Duration),
        mut op: impl FnMut(u32) -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match op(attempt) {
                Ok(value) => return Ok(value),
                Err(err) if !err.is_transient() => return Err(err),
                Err(err) => {
                    let retries_used = attempt - 1;
                    if retries_used >= self.max_retries {
                        return Err(GatewayError::ExhaustedRetries {
                            attempts: attempt,
                            last: Box::new(err),
                        });
                    }
                    let delay = self.delay_for(retries_used);
                    tracing::debug!(attempt, ?delay, error = %err, "retrying chat request");
                    sleep(delay);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_secs(2),
        }
    }

    fn transient() -> GatewayError {
        GatewayError::RemoteError {
            status: 503,
            body: String::new(),
        }
    }

    #[test]
    fn succeeds_after_transient_failures() {
        let mut slept = Vec::new();
        let out = policy(3).run(
            |d| slept.push(d),
            |attempt| if attempt <= 2 { Err(transient()) } else { Ok(attempt) },
        );
        assert_eq!(out, Ok(3));
        assert_eq!(slept, vec![Duration::from_millis(100), Duration::from_millis(200)]);
    }

    #[test]
    fn exhausts_after_max_retries_plus_one_attempts() {
        let mut calls = 0;
        let out: Result<(), _> = policy(2).run(
            |_| {},
            |_| {
                calls += 1;
                Err(GatewayError::Timeout)
            },
        );
        assert_eq!(calls, 3);
        assert!(matches!(out, Err(GatewayError::ExhaustedRetries { attempts: 3, .. })));
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let mut calls = 0;
        let out: Result<(), _> = policy(5).run(
            |_| {},
            |_| {
                calls += 1;
                Err(GatewayError::RemoteError {
                    status: 400,
                    body: "bad".into(),
                })
            },
        );
        assert_eq!(calls, 1);
        assert!(matches!(out, Err(GatewayError::RemoteError { status: 400, .. })));
    }

    #[test]
    fn delays_are_capped() {
        let p = policy(8);
        assert_eq!(p.delay_for(0), Duration::from_millis(100));
        assert_eq!(p.delay_for(7), Duration::from_secs(2));
        assert_eq!(p.delay_for(40), Duration::from_secs(2));
    }

    proptest! {
        #[test]
        fn schedule_is_non_decreasing(base in 0u64..10_000, cap in 0u64..100_000, n in 0u32..=8) {
            let p = RetryPolicy {
                max_retries: n,
                base_delay: Duration::from_millis(base),
                max_delay: Duration::from_millis(cap.max(base)),
            };
            let s = p.schedule();
            prop_assert_eq!(s.len(), n as usize);
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
