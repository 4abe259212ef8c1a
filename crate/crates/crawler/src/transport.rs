//! Where response bodies come from: fixtures, an on-disk cache, or the
//! live services.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;

use crate::error::{io, CrawlError, Result};
use crate::request::{Endpoints, Request};

pub trait Transport: Send + Sync {
    fn fetch(&self, req: &Request) -> Result<String>;
}

/// Refuses every request; stands in for the network in offline runs.
#[derive(Debug, Default)]
pub struct DenyAll {
    attempts: AtomicUsize,
}

impl DenyAll {
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Transport for DenyAll {
    fn fetch(&self, req: &Request) -> Result<String> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(CrawlError::Denied(req.cache_key()))
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn fetch(&self, req: &Request) -> Result<String> {
        (**self).fetch(req)
    }
}

fn record_path(dir: &Path, req: &Request) -> PathBuf {
    dir.join(format!("{}.json", req.cache_key()))
}

/// Reads `<dir>/<cache_key>.json` and nothing else.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureTransport { dir: dir.into() }
    }
}

impl Transport for FixtureTransport {
    fn fetch(&self, req: &Request) -> Result<String> {
        let path = record_path(&self.dir, req);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CrawlError::MissingFixture(path)),
            Err(e) => Err(io(path, e)),
        }
    }
}

/// Serves cached bodies and stores fresh ones from `inner`. The cache
/// layout matches the fixture layout.
pub struct CachingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: Transport> CachingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        CachingTransport { inner, dir: dir.into() }
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: Transport> Transport for CachingTransport<T> {
    fn fetch(&self, req: &Request) -> Result<String> {
        let path = record_path(&self.dir, req);
        if let Ok(body) = fs::read_to_string(&path) {
            return Ok(body);
        }
        let body = self.inner.fetch(req)?;
        fs::create_dir_all(&self.dir).map_err(|e| io(&self.dir, e))?;
        // Write then rename so concurrent readers never see a partial file.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, &body).map_err(|e| io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io(&path, e))?;
        Ok(body)
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoints: Endpoints,
    /// Sent with every request; the services reject anonymous clients.
    pub user_agent: String,
    pub max_concurrency: usize,
    pub max_retries: u32,
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl LiveConfig {
    pub fn new(user_agent: impl Into<String>) -> Self {
        LiveConfig {
            endpoints: Endpoints::default(),
            user_agent: user_agent.into(),
            max_concurrency: 2,
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        }
    }
}

pub struct LiveTransport {
    agent: ureq::Agent,
    config: LiveConfig,
    limiter: Semaphore,
}

impl LiveTransport {
    pub fn new(config: LiveConfig) -> Result<Self> {
        if config.user_agent.trim().is_empty() {
            return Err(CrawlError::Config("a descriptive user agent is required".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Ok(LiveTransport {
            agent,
            limiter: Semaphore::new(config.max_concurrency),
            config,
        })
    }

    /// Delay before retry `attempt` (0-based): exponential with full jitter.
    fn backoff(&self, attempt: u32) -> Duration {
        let cap = self.config.base_delay * 2u32.saturating_pow(attempt);
        cap.mul_f64(rand::rng().random_range(0.5..1.0))
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl Transport for LiveTransport {
    fn fetch(&self, req: &Request) -> Result<String> {
        let url = req.url(&self.config.endpoints)?;
        let mut attempt = 0;
        loop {
            let outcome = {
                let _permit = self.limiter.acquire();
                self.agent
                    .get(&url)
                    .header("User-Agent", &self.config.user_agent)
                    .header("Accept", "application/json")
                    .call()
            };
            match outcome {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 200 {
                        return resp.body_mut().read_to_string().map_err(|e| CrawlError::Network {
                            url: url.clone(),
                            msg: e.to_string(),
                        });
                    }
                    if !retryable(status) || attempt >= self.config.max_retries {
                        return Err(CrawlError::Status {
                            url,
                            status,
                            attempts: attempt + 1,
                        });
                    }
                }
                Err(e) => {
                    if attempt >= self.config.max_retries {
                        return Err(CrawlError::Network { url, msg: e.to_string() });
                    }
                }
            }
            thread::sleep(self.backoff(attempt));
            attempt += 1;
        }
    }
}
