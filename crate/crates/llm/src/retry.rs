use std::time::Duration;

use crate::error::LlmError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(20),
        }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt `attempt` (1-based): `base * 2^(attempt-1)`, capped.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Outcome of one failed attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptError {
    pub retryable: bool,
    pub status: Option<u16>,
    pub message: String,
    /// Server-requested wait, honoured if longer than the backoff delay.
    pub retry_after: Option<Duration>,
}

impl AttemptError {
    pub fn retryable(status: Option<u16>, message: impl Into<String>) -> Self {
        AttemptError {
            retryable: true,
            status,
            message: message.into(),
            retry_after: None,
        }
    }

    pub fn fatal(status: Option<u16>, message: impl Into<String>) -> Self {
        AttemptError {
            retryable: false,
            status,
            message: message.into(),
            retry_after: None,
        }
    }
}

/// Runs `op` until it succeeds, fails fatally, or the attempt budget runs out.
/// `op` receives the 1-based attempt number; `sleep` performs the waits.
pub fn retry_with_backoff<T>(
    policy: &RetryPolicy,
    mut sleep: impl FnMut(Duration),
    mut op: impl FnMut(u32) -> Result<T, AttemptError>,
) -> Result<T, LlmError> {
    let max = policy.max_attempts.max(1);
    let mut attempt = 1;
    loop {
        match op(attempt) {
            Ok(v) => return Ok(v),
            Err(e) if e.retryable && attempt < max => {
                let wait = policy
                    .delay_after(attempt)
                    .max(e.retry_after.unwrap_or_default().min(policy.max_delay));
                log::warn!(
                    "attempt {attempt}/{max} failed ({}), retrying in {:?}",
                    e.message,
                    wait
                );
                sleep(wait);
                attempt += 1;
            }
            Err(e) => {
                return Err(LlmError::Transport {
                    attempts: attempt,
                    status: e.status,
                    message: e.message,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(1000),
        }
    }

    #[test]
    fn exponential_delays_with_cap() {
        let p = policy();
        let d: Vec<u128> = (1..=6).map(|a| p.delay_after(a).as_millis()).collect();
        assert_eq!(d, vec![100, 200, 400, 800, 1000, 1000]);
    }

    #[test]
    fn retries_until_success() {
        let mut waits = Vec::new();
        let out = retry_with_backoff(&policy(), |d| waits.push(d), |a| {
            if a < 3 {
                Err(AttemptError::retryable(Some(429), "rate limited"))
            } else {
                Ok(a)
            }
        });
        assert_eq!(out.unwrap(), 3);
        assert_eq!(waits, vec![Duration::from_millis(100), Duration::from_millis(200)]);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let mut calls = 0;
        let err = retry_with_backoff(&policy(), |_| {}, |_| -> Result<(), _> {
            calls += 1;
            Err(AttemptError::retryable(Some(503), "unavailable"))
        })
        .unwrap_err();
        assert_eq!(calls, 5);
        assert!(matches!(err, LlmError::Transport { attempts: 5, status: Some(503), .. }));
    }

    #[test]
    fn fatal_errors_stop_immediately() {
        let mut calls = 0;
        let err = retry_with_backoff(&policy(), |_| {}, |_| -> Result<(), _> {
            calls += 1;
            Err(AttemptError::fatal(Some(401), "bad key"))
        })
        .unwrap_err();
        assert_eq!(calls, 1);
        assert!(matches!(err, LlmError::Transport { attempts: 1, status: Some(401), .. }));
    }

    #[test]
    fn retry_after_extends_wait() {
        let mut waits = Vec::new();
        let _ = retry_with_backoff(&policy(), |d| waits.push(d), |a| {
            if a == 1 {
                let mut e = AttemptError::retryable(Some(429), "slow down");
                e.retry_after = Some(Duration::from_millis(700));
                Err(e)
            } else {
                Ok(())
            }
        });
        assert_eq!(waits, vec![Duration::from_millis(700)]);
    }
}
