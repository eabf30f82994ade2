//! HTTP plumbing shared by the inference gateway and the scholarly-search
//! client: a narrow transport trait (so tests can inject counting fakes),
//! retry with exponential backoff, and request pacing.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use thiserror::Error;
use tokio::sync::Mutex;
use tokio::time::Instant;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("request timed out")]
    Timeout,
}

/// Minimal HTTP response surface the pipeline needs.
#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// 429 and 5xx responses are worth retrying; everything else is not.
    pub fn is_retryable(&self) -> bool {
        self.status == 429 || (500..600).contains(&self.status)
    }
}

/// The one seam between the pipeline and the network. Live code uses
/// [`ReqwestTransport`]; tests swap in [`CountingTransport`] or canned fakes.
#[async_trait]
pub trait HttpTransport: Send + Sync {
    async fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: serde_json::Value,
    ) -> Result<HttpResponse, TransportError>;

    async fn get(
        &self,
        url: &str,
        headers: &[(String, String)],
    ) -> Result<HttpResponse, TransportError>;
}

/// Production transport backed by reqwest.
pub struct ReqwestTransport {
    client: reqwest::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

fn classify_reqwest_error(e: reqwest::Error) -> TransportError {
    if e.is_timeout() {
        TransportError::Timeout
    } else {
        TransportError::Network(e.to_string())
    }
}

async fn into_response(res: reqwest::Response) -> Result<HttpResponse, TransportError> {
    let status = res.status().as_u16();
    let body = res.text().await.map_err(classify_reqwest_error)?;
    Ok(HttpResponse { status, body })
}

#[async_trait]
impl HttpTransport for ReqwestTransport {
    async fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: serde_json::Value,
    ) -> Result<HttpResponse, TransportError> {
        let mut req = self.client.post(url).json(&body);
        for (name, value) in headers {
            req = req.header(name, value);
        }
        let res = req.send().await.map_err(classify_reqwest_error)?;
        into_response(res).await
    }

    async fn get(
        &self,
        url: &str,
        headers: &[(String, String)],
    ) -> Result<HttpResponse, TransportError> {
        let mut req = self.client.get(url);
        for (name, value) in headers {
            req = req.header(name, value);
        }
        let res = req.send().await.map_err(classify_reqwest_error)?;
        into_response(res).await
    }
}

/// Test transport that counts calls (total and concurrently in flight) and
/// answers from a scripted closure. A counter that stays at zero proves a
/// code path never touched the network.
pub struct CountingTransport {
    total: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    responder: Box<dyn Fn(&str) -> Result<HttpResponse, TransportError> + Send + Sync>,
    delay: Duration,
}

impl CountingTransport {
    pub fn new(
        responder: impl Fn(&str) -> Result<HttpResponse, TransportError> + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(Self {
            total: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            responder: Box::new(responder),
            delay: Duration::ZERO,
        })
    }

    /// Like [`CountingTransport::new`] but holds each request open for
    /// `delay`, which makes the in-flight high-water mark observable.
    pub fn with_delay(
        delay: Duration,
        responder: impl Fn(&str) -> Result<HttpResponse, TransportError> + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(Self {
            total: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            responder: Box::new(responder),
            delay,
        })
    }

    pub fn total_calls(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }

    pub fn max_observed_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    async fn record(&self, url: &str) -> Result<HttpResponse, TransportError> {
        self.total.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        }
        let result = (self.responder)(url);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}

#[async_trait]
impl HttpTransport for CountingTransport {
    async fn post_json(
        &self,
        url: &str,
        _headers: &[(String, String)],
        _body: serde_json::Value,
    ) -> Result<HttpResponse, TransportError> {
        self.record(url).await
    }

    async fn get(
        &self,
        url: &str,
        _headers: &[(String, String)],
    ) -> Result<HttpResponse, TransportError> {
        self.record(url).await
    }
}

/// Exponential backoff with jitter. `delay(n)` is the pause before retry
/// attempt `n` (0-based): `initial * 2^n` plus up to 50% random jitter.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 4,
            initial_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let base = self.initial_delay.saturating_mul(1u32 << attempt.min(16));
        let jitter_ms = if base.as_millis() == 0 {
            0
        } else {
            rand::thread_rng().gen_range(0..=base.as_millis() as u64 / 2)
        };
        base + Duration::from_millis(jitter_ms)
    }
}

/// Paces requests so that no two start closer than `1 / rate_per_sec`
/// seconds apart. Shared across tasks; waiting tasks queue on the mutex.
pub struct RateLimiter {
    min_interval: Duration,
    next_allowed: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64) -> Self {
        let min_interval = if rate_per_sec > 0.0 {
            Duration::from_secs_f64(1.0 / rate_per_sec)
        } else {
            Duration::ZERO
        };
        Self {
            min_interval,
            next_allowed: Mutex::new(None),
        }
    }

    /// Waits until a request slot is available and claims it.
    pub async fn acquire(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let wake = {
            let mut next = self.next_allowed.lock().await;
            let now = Instant::now();
            let slot = match *next {
                Some(at) if at > now => at,
                _ => now,
            };
            *next = Some(slot + self.min_interval);
            slot
        };
        tokio::time::sleep_until(wake).await;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_grows_geometrically() {
        let policy = RetryPolicy {
            max_retries: 4,
            initial_delay: Duration::from_millis(500),
        };
        for attempt in 0..4 {
            let base = Duration::from_millis(500 * (1 << attempt));
            let d = policy.delay(attempt);
            assert!(d >= base, "attempt {attempt}: {d:?} < {base:?}");
            assert!(d <= base + base / 2, "attempt {attempt}: {d:?} too large");
        }
    }

    #[tokio::test]
    async fn rate_limiter_spaces_out_acquisitions() {
        let limiter = RateLimiter::new(100.0); // 10ms apart
        let start = Instant::now();
        for _ in 0..4 {
            limiter.acquire().await;
        }
        // First slot is immediate, three more at 10ms spacing.
        assert!(start.elapsed() >= Duration::from_millis(30));
    }

    #[tokio::test]
    async fn counting_transport_tracks_in_flight_high_water_mark() {
        let transport = CountingTransport::with_delay(Duration::from_millis(20), |_| {
            Ok(HttpResponse {
                status: 200,
                body: "{}".into(),
            })
        });
        let mut handles = Vec::new();
        for _ in 0..3 {
            let t = Arc::clone(&transport);
            handles.push(tokio::spawn(async move {
                t.get("http://fake", &[]).await.unwrap();
            }));
        }
        for h in handles {
            h.await.unwrap();
        }
        assert_eq!(transport.total_calls(), 3);
        assert!(transport.max_observed_in_flight() >= 2);
    }
}
