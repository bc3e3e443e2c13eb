use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{fingerprint, read_records, BackendError, BackendKind, GenerationRequest, Generator, ModelRef};

pub const API_KEY_ENV: &str = "ROOMFORGE_API_KEY";
pub const API_BASE_ENV: &str = "ROOMFORGE_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_BASE_MODEL: &str = "davinci-002";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RequestBody {
    Empty,
    Json(Value),
    File {
        purpose: String,
        filename: String,
        bytes: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub method: Method,
    /// Path below the API base, starting with `/`.
    pub path: String,
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Sends one request. Only connection-level failures are errors; any HTTP
/// status comes back as a response.
pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, BackendError>;
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub api_base: String,
    pub api_key: String,
    /// Model fine-tuned when no base model is given.
    pub base_model: String,
    pub poll_interval: Duration,
    pub job_timeout: Duration,
    /// Extra attempts after a 429 or 5xx.
    pub max_retries: u32,
}

impl RemoteConfig {
    pub fn new(api_base: impl Into<String>, api_key: impl Into<String>) -> RemoteConfig {
        RemoteConfig {
            api_base: api_base.into(),
            api_key: api_key.into(),
            base_model: DEFAULT_BASE_MODEL.to_string(),
            poll_interval: Duration::from_secs(10),
            job_timeout: Duration::from_secs(2 * 60 * 60),
            max_retries: 4,
        }
    }

    pub fn from_env() -> Result<RemoteConfig, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| BackendError::Config(format!("{API_KEY_ENV} is not set")))?;
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        Ok(RemoteConfig::new(base, key))
    }
}

/// [`Transport`] over blocking reqwest with bearer auth.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
    api_base: String,
    api_key: String,
}

impl ReqwestTransport {
    pub fn new(config: &RemoteConfig) -> Result<ReqwestTransport, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(ReqwestTransport {
            client,
            api_base: config.api_base.trim_end_matches('/').to_string(),
            api_key: config.api_key.clone(),
        })
    }
}

impl Transport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, BackendError> {
        let url = format!("{}{}", self.api_base, request.path);
        let builder = match request.method {
            Method::Get => self.client.get(url),
            Method::Post => self.client.post(url),
        }
        .bearer_auth(&self.api_key);
        let builder = match &request.body {
            RequestBody::Empty => builder,
            RequestBody::Json(v) => builder.json(v),
            RequestBody::File {
                purpose,
                filename,
                bytes,
            } => {
                let part = reqwest::blocking::multipart::Part::bytes(bytes.clone()).file_name(filename.clone());
                let form = reqwest::blocking::multipart::Form::new()
                    .text("purpose", purpose.clone())
                    .part("file", part);
                builder.multipart(form)
            }
        };
        let response = builder.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

/// Client for an OpenAI-compatible files / fine-tuning / completions API.
pub struct RemoteBackend {
    transport: Box<dyn Transport>,
    config: RemoteConfig,
    sleeper: Sleeper,
    audit: Mutex<Vec<String>>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<RemoteBackend, BackendError> {
        let transport = ReqwestTransport::new(&config)?;
        Ok(RemoteBackend::with_transport(config, Box::new(transport)))
    }

    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>) -> RemoteBackend {
        RemoteBackend {
            transport,
            config,
            sleeper: Box::new(std::thread::sleep),
            audit: Mutex::new(Vec::new()),
        }
    }

    /// Replaces the function used to wait between polls and retries.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> RemoteBackend {
        self.sleeper = Box::new(sleeper);
        self
    }

    /// One line per request sent, `METHOD path -> status`.
    pub fn audit_log(&self) -> Vec<String> {
        self.audit.lock().expect("audit log poisoned").clone()
    }

    fn call(&self, request: HttpRequest) -> Result<Value, BackendError> {
        let mut attempt = 0;
        loop {
            let response = self.transport.send(&request)?;
            self.audit
                .lock()
                .expect("audit log poisoned")
                .push(format!("{:?} {} -> {}", request.method, request.path, response.status));
            let retryable = response.status == 429 || response.status >= 500;
            if retryable && attempt < self.config.max_retries {
                attempt += 1;
                log::warn!("{} returned {}, retry {attempt}", request.path, response.status);
                (self.sleeper)(Duration::from_millis(500 << attempt.min(6)));
                continue;
            }
            if !(200..300).contains(&response.status) {
                return Err(BackendError::RemoteRejected {
                    status: response.status,
                    body: response.body,
                });
            }
            return serde_json::from_str(&response.body)
                .map_err(|e| BackendError::BadResponse(format!("{}: {e}", request.path)));
        }
    }

    fn poll_delay(&self) -> Duration {
        let base = self.config.poll_interval;
        let jitter_ms = base.as_millis() as u64 / 10;
        if jitter_ms == 0 {
            base
        } else {
            base + Duration::from_millis(rand::rng().random_range(0..=jitter_ms))
        }
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str, BackendError> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::BadResponse(format!("missing string field {key:?}")))
}

impl Generator for RemoteBackend {
    fn fine_tune(&self, base: Option<&ModelRef>, records_path: &Path, epochs: u32) -> Result<ModelRef, BackendError> {
        let bytes = std::fs::read(records_path)?;
        read_records(&bytes)?;
        let trained_on = fingerprint(&bytes);
        let filename = records_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "records.jsonl".into());
        let file = self.call(HttpRequest {
            method: Method::Post,
            path: "/files".into(),
            body: RequestBody::File {
                purpose: "fine-tune".into(),
                filename,
                bytes,
            },
        })?;
        let file_id = str_field(&file, "id")?;
        let model = base.map_or(self.config.base_model.as_str(), |b| b.handle.as_str());
        let job = self.call(HttpRequest {
            method: Method::Post,
            path: "/fine_tuning/jobs".into(),
            body: RequestBody::Json(json!({
                "training_file": file_id,
                "model": model,
                "hyperparameters": { "n_epochs": epochs },
            })),
        })?;
        let job_id = str_field(&job, "id")?.to_string();
        let mut state = job;
        let mut waited = Duration::ZERO;
        loop {
            match str_field(&state, "status")? {
                "succeeded" => {
                    let handle = str_field(&state, "fine_tuned_model")?.to_string();
                    log::info!("fine-tune job {job_id} produced {handle}");
                    return Ok(ModelRef {
                        backend_kind: BackendKind::Remote,
                        handle,
                        trained_on,
                        epochs,
                        parent: base.map(|b| b.handle.clone()),
                    });
                }
                status @ ("failed" | "cancelled") => {
                    return Err(BackendError::JobFailed {
                        job: job_id,
                        status: status.to_string(),
                    })
                }
                _ => {}
            }
            if waited >= self.config.job_timeout {
                return Err(BackendError::JobTimeout { job: job_id });
            }
            let delay = self.poll_delay();
            (self.sleeper)(delay);
            waited += delay;
            state = self.call(HttpRequest {
                method: Method::Get,
                path: format!("/fine_tuning/jobs/{job_id}"),
                body: RequestBody::Empty,
            })?;
        }
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        if request.n == 0 {
            return Ok(Vec::new());
        }
        let mut body = json!({
            "model": request.model.handle,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "n": request.n,
            "stop": request.stop,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let response = self.call(HttpRequest {
            method: Method::Post,
            path: "/completions".into(),
            body: RequestBody::Json(body),
        })?;
        let choices = response
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::BadResponse("missing choices".into()))?;
        let mut texts = choices
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let index = c.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
                Ok((index, str_field(c, "text")?.to_string()))
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        texts.sort_by_key(|(i, _)| *i);
        Ok(texts.into_iter().map(|(_, t)| t).collect())
    }
}
