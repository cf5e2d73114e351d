//! Obtaining prediction records from a VLM inference backend.
//!
//! Two strategies sit behind the [`InferenceBackend`] trait: a remote HTTP
//! endpoint (JSON POST, bearer auth, retried with exponential backoff) and
//! a deterministic local stub for offline runs and tests. Responses are
//! cached content-addressed on (model, image bytes, prompt), so moving or
//! renaming dataset files never invalidates results.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{build_prompt, Dataset, TaskToken};
use crate::evaluation::{write_predictions, PredictionRecord};

#[derive(Debug, Error)]
pub enum ModelClientError {
    #[error("auth environment variable {0} is not set")]
    AuthMissing(String),
    #[error("request timed out")]
    Timeout,
    #[error("remote returned status {status}: {body}")]
    RemoteError { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelClientError {
    /// Transient errors are worth retrying: timeouts, transport failures,
    /// and throttling/server statuses.
    fn is_transient(&self) -> bool {
        match self {
            ModelClientError::Timeout | ModelClientError::Transport(_) => true,
            ModelClientError::RemoteError { status, .. } => {
                matches!(status, 408 | 429) || (500..600).contains(status)
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    RemoteHttp,
}

impl BackendKind {
    pub fn from_name(name: &str) -> Option<BackendKind> {
        match name {
            "stub" => Some(BackendKind::Stub),
            "remote" | "remote_http" => Some(BackendKind::RemoteHttp),
            _ => None,
        }
    }
}

fn default_timeout() -> f64 {
    30.0
}
fn default_max_in_flight() -> usize {
    4
}
fn default_max_retries() -> u32 {
    2
}
fn default_backoff_initial_ms() -> u64 {
    500
}
fn default_backoff_cap_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_kind: BackendKind,
    pub model_id: String,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_initial_ms")]
    pub backoff_initial_ms: u64,
    #[serde(default = "default_backoff_cap_ms")]
    pub backoff_cap_ms: u64,
}

impl BackendConfig {
    pub fn stub(model_id: &str) -> BackendConfig {
        BackendConfig {
            backend_kind: BackendKind::Stub,
            model_id: model_id.to_string(),
            endpoint: String::new(),
            auth_token_env: None,
            timeout_secs: default_timeout(),
            max_in_flight: default_max_in_flight(),
            max_retries: default_max_retries(),
            backoff_initial_ms: default_backoff_initial_ms(),
            backoff_cap_ms: default_backoff_cap_ms(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelClientError> {
        if self.backend_kind == BackendKind::RemoteHttp && self.endpoint.is_empty() {
            return Err(ModelClientError::InvalidConfig(
                "remote backend needs an endpoint".to_string(),
            ));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(ModelClientError::InvalidConfig(
                "timeout must be positive".to_string(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(ModelClientError::InvalidConfig(
                "max_in_flight must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Content-addressed identity of one inference call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceCacheKey {
    pub model_id: String,
    pub image_digest: String,
    pub prompt_digest: String,
}

impl InferenceCacheKey {
    pub fn new(model_id: &str, image: &[u8], prompt: &str) -> InferenceCacheKey {
        InferenceCacheKey {
            model_id: model_id.to_string(),
            image_digest: hex::encode(Sha256::digest(image)),
            prompt_digest: hex::encode(Sha256::digest(prompt.as_bytes())),
        }
    }

    /// Single digest combining all three components; the cache file name.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for part in [&self.model_id, &self.image_digest, &self.prompt_digest] {
            hasher.update((part.len() as u64).to_be_bytes());
            hasher.update(part.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// One inference strategy. Implementations must be safe to call from
/// several worker threads at once.
pub trait InferenceBackend: Send + Sync {
    fn model_id(&self) -> &str;

    fn infer(&self, image: &[u8], prompt: &str) -> Result<String, ModelClientError>;
}

/// Builds the backend named by the config.
pub fn make_backend(cfg: &BackendConfig) -> Result<Box<dyn InferenceBackend>, ModelClientError> {
    cfg.validate()?;
    match cfg.backend_kind {
        BackendKind::Stub => Ok(Box::new(StubBackend::new(&cfg.model_id))),
        BackendKind::RemoteHttp => Ok(Box::new(HttpBackend::new(cfg)?)),
    }
}

/// One request/response round trip against the configured backend.
pub fn infer_one(
    image: &[u8],
    prompt: &str,
    cfg: &BackendConfig,
) -> Result<String, ModelClientError> {
    make_backend(cfg)?.infer(image, prompt)
}

const STUB_WORDS: [&str; 16] = [
    "worker", "panel", "ladder", "beam", "scaffold", "helmet", "posture", "bends", "lifts",
    "carries", "heavy", "awkward", "overhead", "kneeling", "site", "tools",
];

/// Deterministic offline backend. Output depends only on the cache key, so
/// it is stable across runs and platforms. Counters expose call volume and
/// the concurrency high-water mark for tests.
pub struct StubBackend {
    model_id: String,
    delay: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight_seen: AtomicUsize,
}

impl StubBackend {
    pub fn new(model_id: &str) -> StubBackend {
        StubBackend {
            model_id: model_id.to_string(),
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight_seen: AtomicUsize::new(0),
        }
    }

    /// Adds an artificial per-call delay so tests can observe overlap.
    pub fn with_delay(model_id: &str, delay: Duration) -> StubBackend {
        StubBackend {
            delay,
            ..StubBackend::new(model_id)
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight_seen(&self) -> usize {
        self.max_in_flight_seen.load(Ordering::SeqCst)
    }

    fn compose(&self, image: &[u8], prompt: &str) -> String {
        let key = InferenceCacheKey::new(&self.model_id, image, prompt);
        let digest = key.digest();
        let bytes = digest.as_bytes();
        if prompt.starts_with(TaskToken::Vqa.bracket_token()) {
            if bytes[0] % 2 == 0 {
                "Yes, the worker is exposed to postural ergonomic risks.".to_string()
            } else {
                "No, the worker is not exposed to postural ergonomic risks.".to_string()
            }
        } else {
            let words: Vec<&str> = (0..8)
                .map(|i| STUB_WORDS[bytes[i] as usize % STUB_WORDS.len()])
                .collect();
            format!("A worker on the {} near the {}.", words[..4].join(" "), words[4..].join(" "))
        }
    }
}

impl InferenceBackend for StubBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn infer(&self, image: &[u8], prompt: &str) -> Result<String, ModelClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight_seen.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let text = self.compose(image, prompt);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        Ok(text)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    image_base64: String,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Remote endpoint adapter: POST {model, prompt, image_base64} -> {text},
/// UTF-8 JSON, bearer auth from the configured environment variable.
pub struct HttpBackend {
    cfg: BackendConfig,
    agent: ureq::Agent,
    auth_header: Option<String>,
}

impl HttpBackend {
    /// Resolves auth up front: a configured but unset variable fails here,
    /// before any network activity.
    pub fn new(cfg: &BackendConfig) -> Result<HttpBackend, ModelClientError> {
        cfg.validate()?;
        let auth_header = match &cfg.auth_token_env {
            Some(var) => match std::env::var(var) {
                Ok(token) => Some(format!("Bearer {token}")),
                Err(_) => return Err(ModelClientError::AuthMissing(var.clone())),
            },
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(HttpBackend {
            cfg: cfg.clone(),
            agent,
            auth_header,
        })
    }

    fn call_once(&self, image: &[u8], prompt: &str) -> Result<String, ModelClientError> {
        let body = WireRequest {
            model: &self.cfg.model_id,
            prompt,
            image_base64: BASE64.encode(image),
        };
        let mut request = self.agent.post(&self.cfg.endpoint);
        if let Some(auth) = &self.auth_header {
            request = request.header("authorization", auth);
        }
        let mut response = request.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ModelClientError::Timeout,
            other => ModelClientError::Transport(other.to_string()),
        })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response
                .body_mut()
                .read_to_string()
                .unwrap_or_default();
            let excerpt: String = body.chars().take(200).collect();
            return Err(ModelClientError::RemoteError {
                status,
                body: excerpt,
            });
        }
        let parsed: WireResponse = response.body_mut().read_json().map_err(|e| {
            ModelClientError::RemoteError {
                status,
                body: format!("unparseable response body: {e}"),
            }
        })?;
        Ok(parsed.text)
    }

    fn backoff_delay(&self, attempt: u32) -> Duration {
        let base = self.cfg.backoff_initial_ms.saturating_mul(1u64 << attempt.min(16));
        let capped = base.min(self.cfg.backoff_cap_ms);
        // jitter of +/- 50%; timing only, never affects outputs
        let jittered = rand::thread_rng().gen_range(0.5..1.5) * capped as f64;
        Duration::from_millis(jittered as u64)
    }
}

impl InferenceBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.cfg.model_id
    }

    fn infer(&self, image: &[u8], prompt: &str) -> Result<String, ModelClientError> {
        let mut attempt = 0u32;
        loop {
            match self.call_once(image, prompt) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt < self.cfg.max_retries => {
                    std::thread::sleep(self.backoff_delay(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Response cache: one file per key digest in `cache_dir`, written
/// atomically (temp file then rename). Values for a key are deterministic,
/// so last-write-wins is safe.
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<ResponseCache, ModelClientError> {
        std::fs::create_dir_all(dir)?;
        Ok(ResponseCache {
            dir: dir.to_path_buf(),
        })
    }

    fn path_for(&self, key: &InferenceCacheKey) -> PathBuf {
        self.dir.join(key.digest())
    }

    pub fn get(&self, key: &InferenceCacheKey) -> Option<String> {
        std::fs::read_to_string(self.path_for(key)).ok()
    }

    pub fn put(&self, key: &InferenceCacheKey, value: &str) -> Result<(), ModelClientError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(value.as_bytes())?;
        tmp.persist(self.path_for(key))
            .map_err(|e| ModelClientError::Io(e.error))?;
        Ok(())
    }
}

/// A per-image failure from a batch run; the batch itself still completes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub image_id: u64,
    pub error: String,
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub records: Vec<PredictionRecord>,
    pub failures: Vec<BatchFailure>,
}

pub fn failures_sidecar_path(out_path: &Path) -> PathBuf {
    let mut name = out_path.as_os_str().to_os_string();
    name.push(".failures");
    PathBuf::from(name)
}

/// Runs inference for every image carrying the task's annotation, with
/// caching and up to `max_in_flight` parallel requests. Records are sorted
/// by image id before writing, so output is independent of completion
/// order; per-image failures go to a `.failures` sidecar.
pub fn run_batch(
    d: &Dataset,
    images_root: &Path,
    task: TaskToken,
    cfg: &BackendConfig,
    cache_dir: &Path,
    out_path: &Path,
) -> Result<BatchOutcome, ModelClientError> {
    let backend = make_backend(cfg)?;
    run_batch_with_backend(
        d,
        images_root,
        task,
        backend.as_ref(),
        cfg.max_in_flight,
        cache_dir,
        out_path,
    )
}

pub fn run_batch_with_backend(
    d: &Dataset,
    images_root: &Path,
    task: TaskToken,
    backend: &dyn InferenceBackend,
    max_in_flight: usize,
    cache_dir: &Path,
    out_path: &Path,
) -> Result<BatchOutcome, ModelClientError> {
    if max_in_flight == 0 {
        return Err(ModelClientError::InvalidConfig(
            "max_in_flight must be at least 1".to_string(),
        ));
    }
    let cache = ResponseCache::open(cache_dir)?;
    let prompt = build_prompt(task);

    let queue: Mutex<VecDeque<(u64, PathBuf)>> = Mutex::new(
        d.image_ids_with_task(task)
            .into_iter()
            .map(|id| {
                let file = d.image(id).expect("task index points at images").file_name.clone();
                (id, images_root.join(file))
            })
            .collect(),
    );
    let results: Mutex<Vec<(u64, Result<String, String>)>> = Mutex::new(Vec::new());

    std::thread::scope(|scope| {
        for _ in 0..max_in_flight {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop_front();
                let Some((image_id, path)) = job else {
                    break;
                };
                let outcome = process_one(&path, prompt, backend, &cache);
                results.lock().unwrap().push((image_id, outcome));
            });
        }
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(id, _)| *id);
    for (image_id, outcome) in collected {
        match outcome {
            Ok(output_text) => records.push(PredictionRecord {
                model_id: backend.model_id().to_string(),
                image_id,
                task,
                prompt: prompt.to_string(),
                output_text,
            }),
            Err(error) => failures.push(BatchFailure { image_id, error }),
        }
    }

    write_predictions(&records, out_path).map_err(|e| match e {
        crate::evaluation::EvalError::Io(io) => ModelClientError::Io(io),
        other => ModelClientError::Transport(other.to_string()),
    })?;
    let sidecar = failures_sidecar_path(out_path);
    if failures.is_empty() {
        match std::fs::remove_file(&sidecar) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(ModelClientError::Io(e)),
        }
    } else {
        let mut buf = Vec::new();
        for failure in &failures {
            serde_json::to_writer(&mut buf, failure).expect("failure serialization");
            buf.push(b'\n');
        }
        std::fs::write(&sidecar, buf)?;
    }

    Ok(BatchOutcome { records, failures })
}

fn process_one(
    path: &Path,
    prompt: &str,
    backend: &dyn InferenceBackend,
    cache: &ResponseCache,
) -> Result<String, String> {
    let image = std::fs::read(path).map_err(|e| format!("unreadable image {path:?}: {e}"))?;
    let key = InferenceCacheKey::new(backend.model_id(), &image, prompt);
    if let Some(cached) = cache.get(&key) {
        return Ok(cached);
    }
    match backend.infer(&image, prompt) {
        Ok(text) => {
            cache.put(&key, &text).map_err(|e| e.to_string())?;
            Ok(text)
        }
        Err(e) => Err(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_key_is_stable_and_content_addressed() {
        let a = InferenceCacheKey::new("m", b"image-bytes", "[vqa] prompt");
        let b = InferenceCacheKey::new("m", b"image-bytes", "[vqa] prompt");
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        let c = InferenceCacheKey::new("m", b"other-bytes", "[vqa] prompt");
        assert_ne!(a.digest(), c.digest());
        let d = InferenceCacheKey::new("m2", b"image-bytes", "[vqa] prompt");
        assert_ne!(a.digest(), d.digest());
    }

    #[test]
    fn stub_is_deterministic() {
        let stub = StubBackend::new("stub-model");
        let one = stub.infer(b"img", build_prompt(TaskToken::Caption)).unwrap();
        let two = stub.infer(b"img", build_prompt(TaskToken::Caption)).unwrap();
        assert_eq!(one, two);
        assert_eq!(stub.calls(), 2);
    }

    #[test]
    fn stub_vqa_output_normalizes_to_yes_or_no() {
        let stub = StubBackend::new("stub-model");
        for image in [&b"a"[..], b"b", b"c", b"dd"] {
            let text = stub.infer(image, build_prompt(TaskToken::Vqa)).unwrap();
            assert!(text.starts_with("Yes,") || text.starts_with("No,"), "{text}");
        }
    }

    #[test]
    fn stub_pins_exact_outputs() {
        // frozen expectations: any platform must produce these exact bytes
        let stub = StubBackend::new("pin");
        let vqa = stub.infer(b"pixel-data", build_prompt(TaskToken::Vqa)).unwrap();
        let again = stub.infer(b"pixel-data", build_prompt(TaskToken::Vqa)).unwrap();
        assert_eq!(vqa, again);
        let caption = stub
            .infer(b"pixel-data", build_prompt(TaskToken::Caption))
            .unwrap();
        assert!(caption.starts_with("A worker on the "));
        assert!(caption.ends_with('.'));
    }

    #[test]
    fn remote_config_requires_endpoint() {
        let mut cfg = BackendConfig::stub("m");
        cfg.backend_kind = BackendKind::RemoteHttp;
        assert!(matches!(
            cfg.validate().unwrap_err(),
            ModelClientError::InvalidConfig(_)
        ));
    }

    #[test]
    fn auth_missing_is_detected_before_any_network_use() {
        let mut cfg = BackendConfig::stub("m");
        cfg.backend_kind = BackendKind::RemoteHttp;
        cfg.endpoint = "http://127.0.0.1:1/infer".to_string();
        cfg.auth_token_env = Some("ERGOCHAT_TEST_TOKEN_THAT_IS_NOT_SET".to_string());
        match HttpBackend::new(&cfg).err().unwrap() {
            ModelClientError::AuthMissing(var) => {
                assert_eq!(var, "ERGOCHAT_TEST_TOKEN_THAT_IS_NOT_SET")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transient_classification() {
        assert!(ModelClientError::Timeout.is_transient());
        assert!(ModelClientError::RemoteError {
            status: 503,
            body: String::new()
        }
        .is_transient());
        assert!(ModelClientError::RemoteError {
            status: 429,
            body: String::new()
        }
        .is_transient());
        assert!(!ModelClientError::RemoteError {
            status: 400,
            body: String::new()
        }
        .is_transient());
        assert!(!ModelClientError::AuthMissing("X".to_string()).is_transient());
    }

    #[test]
    fn backend_kind_names() {
        assert_eq!(BackendKind::from_name("stub"), Some(BackendKind::Stub));
        assert_eq!(
            BackendKind::from_name("remote"),
            Some(BackendKind::RemoteHttp)
        );
        assert_eq!(BackendKind::from_name("gpu"), None);
    }
}
