//! Request/response plumbing shared by every role.
//!
//! Roles talk to each other only through a [`Transport`]. URLs are always the
//! public `https://host/path` form; the loopback network dispatches on the
//! authority, and the HTTP transport in [`crate::http`] maps authorities to
//! local sockets.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::did::{DocumentFetcher, FetchError, FetchLimits};
use crate::model::ErrorBody;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("host unreachable: {0}")]
    Unreachable(String),
    #[error("request timed out")]
    Timeout,
    #[error("bad url: {0}")]
    BadUrl(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    #[serde(skip)]
    pub timeout: Option<Duration>,
}

impl HttpRequest {
    pub fn new(method: &str, url: impl Into<String>) -> Self {
        Self { method: method.to_string(), url: url.into(), headers: Vec::new(), body: Vec::new(), timeout: None }
    }

    pub fn get(url: impl Into<String>) -> Self {
        Self::new("GET", url)
    }

    pub fn post_json<T: Serialize + ?Sized>(url: impl Into<String>, body: &T) -> Self {
        Self::new("POST", url)
            .header("content-type", "application/json")
            .body(serde_json::to_vec(body).expect("request bodies serialize"))
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_ascii_lowercase(), value.into()));
        self
    }

    pub fn body(mut self, body: Vec<u8>) -> Self {
        self.body = body;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn header_value(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn remove_header(&mut self, name: &str) {
        self.headers.retain(|(n, _)| !n.eq_ignore_ascii_case(name));
    }

    pub fn set_header(&mut self, name: &str, value: impl Into<String>) {
        self.remove_header(name);
        self.headers.push((name.to_ascii_lowercase(), value.into()));
    }

    pub fn parsed_url(&self) -> Result<url::Url, TransportError> {
        url::Url::parse(&self.url).map_err(|e| TransportError::BadUrl(format!("{}: {e}", self.url)))
    }

    pub fn path(&self) -> String {
        self.parsed_url().map(|u| u.path().to_string()).unwrap_or_default()
    }

    pub fn query(&self, name: &str) -> Option<String> {
        let url = self.parsed_url().ok()?;
        url.query_pairs().find(|(k, _)| k == name).map(|(_, v)| v.into_owned())
    }

    /// `scheme://authority/path` without the query string.
    pub fn target_uri(&self) -> String {
        match self.parsed_url() {
            Ok(mut u) => {
                u.set_query(None);
                u.set_fragment(None);
                u.to_string()
            }
            Err(_) => self.url.clone(),
        }
    }

    pub fn json<T: DeserializeOwned>(&self) -> Result<T, String> {
        serde_json::from_slice(&self.body).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn new(status: u16, body: Vec<u8>) -> Self {
        Self { status, headers: Vec::new(), body }
    }

    pub fn json<T: Serialize + ?Sized>(status: u16, body: &T) -> Self {
        Self {
            status,
            headers: vec![("content-type".into(), "application/json".into())],
            body: serde_json::to_vec(body).expect("response bodies serialize"),
        }
    }

    pub fn error(status: u16, body: ErrorBody) -> Self {
        Self::json(status, &body)
    }

    pub fn not_found() -> Self {
        Self::error(404, ErrorBody::new("not_found"))
    }

    pub fn bad_request(description: impl Into<String>) -> Self {
        Self::error(400, ErrorBody::new("invalid_request").with_description(description))
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn parse<T: DeserializeOwned>(&self) -> Result<T, String> {
        serde_json::from_slice(&self.body).map_err(|e| e.to_string())
    }

    /// The error body of a failed response, or a synthetic one.
    pub fn error_body(&self) -> ErrorBody {
        self.parse::<ErrorBody>().unwrap_or_else(|_| ErrorBody::new(format!("http_{}", self.status)))
    }

    pub fn header_value(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// A role's request handler.
pub trait Service: Send + Sync {
    fn handle(&self, request: &HttpRequest) -> HttpResponse;
}

impl<F> Service for F
where
    F: Fn(&HttpRequest) -> HttpResponse + Send + Sync,
{
    fn handle(&self, request: &HttpRequest) -> HttpResponse {
        self(request)
    }
}

pub trait Transport: Send + Sync {
    /// `origin` names the calling role; it is used for traffic accounting only.
    fn send(&self, origin: &str, request: HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// A transport handle tagged with the calling role.
#[derive(Clone)]
pub struct Client {
    origin: String,
    transport: Arc<dyn Transport>,
}

impl std::fmt::Debug for Client {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Client").field("origin", &self.origin).finish_non_exhaustive()
    }
}

impl Client {
    pub fn new(origin: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Self { origin: origin.into(), transport }
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn send(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        self.transport.send(&self.origin, request)
    }
}

impl DocumentFetcher for Client {
    fn fetch(&self, url: &str, limits: &FetchLimits) -> Result<Vec<u8>, FetchError> {
        let response = self.send(HttpRequest::get(url).with_timeout(limits.timeout)).map_err(|e| match e {
            TransportError::Timeout => FetchError::Timeout,
            other => FetchError::Unreachable(other.to_string()),
        })?;
        if !response.is_success() {
            return Err(FetchError::Status(response.status));
        }
        if response.body.len() > limits.max_bytes {
            return Err(FetchError::TooLarge(limits.max_bytes));
        }
        Ok(response.body)
    }
}

fn authority(url: &url::Url) -> String {
    match (url.host_str(), url.port()) {
        (Some(h), Some(p)) => format!("{h}:{p}"),
        (Some(h), None) => h.to_string(),
        _ => String::new(),
    }
}

pub fn authority_of(url: &str) -> Result<String, TransportError> {
    let parsed = url::Url::parse(url).map_err(|e| TransportError::BadUrl(format!("{url}: {e}")))?;
    Ok(authority(&parsed))
}

/// In-process network: requests to `https://<authority>/...` go straight to the
/// service mounted under that authority.
#[derive(Default)]
pub struct LoopbackNetwork {
    hosts: RwLock<HashMap<String, Arc<dyn Service>>>,
}

impl LoopbackNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mount(&self, authority: &str, service: Arc<dyn Service>) {
        self.hosts.write().expect("hosts lock").insert(authority.to_string(), service);
    }

    pub fn unmount(&self, authority: &str) -> Option<Arc<dyn Service>> {
        self.hosts.write().expect("hosts lock").remove(authority)
    }

    pub fn authorities(&self) -> Vec<String> {
        self.hosts.read().expect("hosts lock").keys().cloned().collect()
    }
}

impl Transport for LoopbackNetwork {
    fn send(&self, _origin: &str, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let target = authority_of(&request.url)?;
        let service =
            self.hosts.read().expect("hosts lock").get(&target).cloned().ok_or(TransportError::Unreachable(target))?;
        Ok(service.handle(&request))
    }
}

/// Path-prefix dispatch for several services sharing one host.
#[derive(Default)]
pub struct Router {
    routes: Vec<(String, Arc<dyn Service>)>,
    fallback: Option<Arc<dyn Service>>,
}

impl Router {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(mut self, prefix: &str, service: Arc<dyn Service>) -> Self {
        self.routes.push((prefix.to_string(), service));
        self
    }

    pub fn fallback(mut self, service: Arc<dyn Service>) -> Self {
        self.fallback = Some(service);
        self
    }
}

impl Service for Router {
    fn handle(&self, request: &HttpRequest) -> HttpResponse {
        let path = request.path();
        let chosen = self
            .routes
            .iter()
            .filter(|(prefix, _)| path.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _)| prefix.len())
            .map(|(_, s)| s)
            .or(self.fallback.as_ref());
        match chosen {
            Some(service) => service.handle(request),
            None => HttpResponse::not_found(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub origin: String,
    pub method: String,
    pub url: String,
    /// `None` when the transport failed.
    pub status: Option<u16>,
    pub request: HttpRequest,
    pub response_body: Vec<u8>,
}

pub type Interceptor = Arc<dyn Fn(&str, &mut HttpRequest) + Send + Sync>;

/// Wraps a transport, logging every exchange and letting test code rewrite
/// requests in transit.
pub struct RecordingTransport {
    inner: Arc<dyn Transport>,
    log: Mutex<Vec<TrafficRecord>>,
    interceptors: Mutex<Vec<Interceptor>>,
}

impl RecordingTransport {
    pub fn new(inner: Arc<dyn Transport>) -> Self {
        Self { inner, log: Mutex::new(Vec::new()), interceptors: Mutex::new(Vec::new()) }
    }

    pub fn intercept(&self, interceptor: Interceptor) {
        self.interceptors.lock().expect("interceptor lock").push(interceptor);
    }

    pub fn clear_interceptors(&self) {
        self.interceptors.lock().expect("interceptor lock").clear();
    }

    pub fn records(&self) -> Vec<TrafficRecord> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().expect("log lock").clear();
    }
}

impl Transport for RecordingTransport {
    fn send(&self, origin: &str, mut request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let interceptors = self.interceptors.lock().expect("interceptor lock").clone();
        for hook in &interceptors {
            hook(origin, &mut request);
        }
        let logged = request.clone();
        let result = self.inner.send(origin, request);
        self.log.lock().expect("log lock").push(TrafficRecord {
            origin: origin.to_string(),
            method: logged.method.clone(),
            url: logged.url.clone(),
            status: result.as_ref().ok().map(|r| r.status),
            response_body: result.as_ref().map(|r| r.body.clone()).unwrap_or_default(),
            request: logged,
        });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn echo() -> Arc<dyn Service> {
        Arc::new(|req: &HttpRequest| HttpResponse::new(200, req.path().into_bytes()))
    }

    #[test]
    fn loopback_dispatches_by_authority() {
        let net = Arc::new(LoopbackNetwork::new());
        net.mount("a.example", echo());
        let client = Client::new("test", net.clone());
        let resp = client.send(HttpRequest::get("https://a.example/x/y?z=1")).unwrap();
        assert_eq!(resp.body, b"/x/y");
        assert_eq!(
            client.send(HttpRequest::get("https://b.example/")).unwrap_err(),
            TransportError::Unreachable("b.example".into())
        );
        net.unmount("a.example");
        assert!(client.send(HttpRequest::get("https://a.example/")).is_err());
    }

    #[test]
    fn router_prefers_longest_prefix() {
        let a: Arc<dyn Service> = Arc::new(|_: &HttpRequest| HttpResponse::new(200, b"a".to_vec()));
        let b: Arc<dyn Service> = Arc::new(|_: &HttpRequest| HttpResponse::new(200, b"b".to_vec()));
        let router = Router::new().route("/x", a).route("/x/y", b).fallback(echo());
        assert_eq!(router.handle(&HttpRequest::get("https://h/x/y/z")).body, b"b");
        assert_eq!(router.handle(&HttpRequest::get("https://h/x/q")).body, b"a");
        assert_eq!(router.handle(&HttpRequest::get("https://h/other")).body, b"/other");
    }

    #[test]
    fn recording_transport_logs_and_rewrites() {
        let net = Arc::new(LoopbackNetwork::new());
        net.mount("a.example", echo());
        let rec = Arc::new(RecordingTransport::new(net));
        rec.intercept(Arc::new(|_, req: &mut HttpRequest| req.url = req.url.replace("/old", "/new")));
        let client = Client::new("consumer", rec.clone());
        let resp = client.send(HttpRequest::get("https://a.example/old")).unwrap();
        assert_eq!(resp.body, b"/new");
        let log = rec.records();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].origin, "consumer");
        assert_eq!(log[0].url, "https://a.example/new");
    }

    #[test]
    fn fetcher_enforces_size_limit() {
        let net = Arc::new(LoopbackNetwork::new());
        net.mount("big.example", Arc::new(|_: &HttpRequest| HttpResponse::new(200, vec![0; 100])));
        let client = Client::new("t", net);
        let limits = FetchLimits { timeout: Duration::from_secs(1), max_bytes: 99 };
        assert_eq!(client.fetch("https://big.example/", &limits), Err(FetchError::TooLarge(99)));
    }

    #[test]
    fn target_uri_strips_query() {
        let req = HttpRequest::get("https://p.example/api/data?x=1#f");
        assert_eq!(req.target_uri(), "https://p.example/api/data");
        assert_eq!(req.query("x").as_deref(), Some("1"));
    }
}
