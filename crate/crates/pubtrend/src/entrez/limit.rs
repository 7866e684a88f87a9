//! Client-side request pacing: a sliding-window rate limiter and the retry
//! backoff schedule, both driven through a [`Clock`] so tests never sleep.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;

/// Time source used by the limiter and retry sleeps.
///
/// Production code uses [`SystemClock`]; tests use [`FakeClock`], whose
/// `sleep` merely advances a counter.
pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
    fn sleep(&self, duration: Duration);
}

/// Real wall-clock time and real sleeping.
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// A manually advanced clock. Sleeping advances time instantly.
#[derive(Debug)]
pub struct FakeClock {
    start: Instant,
    elapsed: Mutex<Duration>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            elapsed: Mutex::new(Duration::ZERO),
        }
    }

    /// Fake time elapsed since construction.
    pub fn elapsed(&self) -> Duration {
        *self.elapsed.lock().unwrap()
    }

    pub fn advance(&self, duration: Duration) {
        *self.elapsed.lock().unwrap() += duration;
    }
}

impl Default for FakeClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Instant {
        self.start + *self.elapsed.lock().unwrap()
    }

    fn sleep(&self, duration: Duration) {
        self.advance(duration);
    }
}

/// NCBI's published cap for clients without an API key.
pub const REQUESTS_PER_SECOND_ANONYMOUS: usize = 3;
/// NCBI's published cap for clients sending an API key.
pub const REQUESTS_PER_SECOND_WITH_KEY: usize = 10;

/// Sliding-window rate limiter: at most `cap` request-starts in any one
/// second. Shareable across threads; callers block in [`acquire`] until a
/// slot frees up.
///
/// [`acquire`]: RateLimiter::acquire
pub struct RateLimiter {
    cap: usize,
    window: Duration,
    starts: Mutex<VecDeque<Instant>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn per_second(cap: usize, clock: Arc<dyn Clock>) -> Self {
        Self {
            cap,
            window: Duration::from_secs(1),
            starts: Mutex::new(VecDeque::new()),
            clock,
        }
    }

    /// A limiter that never blocks. Used for fixture replay, where pacing
    /// requests against a file would only slow tests down.
    pub fn unlimited(clock: Arc<dyn Clock>) -> Self {
        Self::per_second(usize::MAX, clock)
    }

    /// Picks the NCBI cap based on whether an API key is configured.
    pub fn for_api_key(has_api_key: bool, clock: Arc<dyn Clock>) -> Self {
        let cap = if has_api_key {
            REQUESTS_PER_SECOND_WITH_KEY
        } else {
            REQUESTS_PER_SECOND_ANONYMOUS
        };
        Self::per_second(cap, clock)
    }

    /// Blocks until a request may start, then records the start.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut starts = self.starts.lock().unwrap();
                let now = self.clock.now();
                while let Some(&oldest) = starts.front() {
                    if now.duration_since(oldest) >= self.window {
                        starts.pop_front();
                    } else {
                        break;
                    }
                }
                if starts.len() < self.cap {
                    starts.push_back(now);
                    return;
                }
                let oldest = *starts.front().expect("window is full");
                (oldest + self.window).saturating_duration_since(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }

    /// Sleeps on the limiter's clock; retry backoff goes through here so a
    /// fake clock also fakes the backoff waits.
    pub fn sleep(&self, duration: Duration) {
        self.clock.sleep(duration);
    }

    pub fn now(&self) -> Instant {
        self.clock.now()
    }
}

/// Exponential backoff with full jitter: attempt `k` (1-based) may wait
/// anywhere in `[0, base * factor^(k-1)]`.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            factor: 2,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the jitter range after a failed attempt `attempt`.
    pub fn ceiling(&self, attempt: u32) -> Duration {
        self.base
            .saturating_mul(self.factor.saturating_pow(attempt.saturating_sub(1)))
    }

    /// Jittered delay after a failed attempt: uniform over `[0, ceiling]`.
    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let ceiling = self.ceiling(attempt).as_secs_f64();
        Duration::from_secs_f64(rng.random_range(0.0..=ceiling))
    }
}
