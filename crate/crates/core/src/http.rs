//! Blocking JSON POST with bounded retries, shared by the embedding and chat clients.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HttpFailure {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("{0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            initial_backoff: Duration::from_millis(250),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    policy: RetryPolicy,
}

impl JsonClient {
    pub fn new(policy: RetryPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .http_status_as_error(false)
            .build();
        JsonClient {
            agent: config.into(),
            policy,
        }
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    /// POSTs `body`, retrying transport errors, timeouts and 5xx/429 statuses
    /// with doubling backoff. Returns the last failure once retries run out.
    pub fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
        bearer: Option<&str>,
    ) -> Result<R, HttpFailure> {
        let mut backoff = self.policy.initial_backoff;
        let mut attempt = 0;
        loop {
            match self.post_once(url, body, bearer) {
                Ok(r) => return Ok(r),
                Err(e) if attempt < self.policy.retries && retryable(&e) => {
                    log::warn!("POST {url} failed ({e}); retry {} of {}", attempt + 1, self.policy.retries);
                    thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B, bearer: Option<&str>) -> Result<R, HttpFailure> {
        let mut req = self.agent.post(url);
        if let Some(key) = bearer {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(from_ureq)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(HttpFailure::Status { status, body });
        }
        resp.body_mut().read_json::<R>().map_err(|e| match e {
            ureq::Error::Json(e) => HttpFailure::Decode(e.to_string()),
            other => from_ureq(other),
        })
    }
}

fn retryable(e: &HttpFailure) -> bool {
    match e {
        HttpFailure::Status { status, .. } => *status >= 500 || *status == 429,
        HttpFailure::Timeout | HttpFailure::Transport(_) => true,
        HttpFailure::Decode(_) => false,
    }
}

fn from_ureq(e: ureq::Error) -> HttpFailure {
    match e {
        ureq::Error::Timeout(_) => HttpFailure::Timeout,
        other => HttpFailure::Transport(other.to_string()),
    }
}
