//! Real HTTP binding of [`Service`] and [`Transport`].
//!
//! Each [`HttpServer`] serves one public origin (for example
//! `https://provider.example`) from a local socket; inbound requests are given
//! back their public URL so signatures over request targets stay valid.
//! [`HttpTransport`] rewrites mapped authorities to those sockets and sends
//! everything else to the network unchanged.

use std::collections::HashMap;
use std::io::Read;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::transport::{authority_of, HttpRequest, HttpResponse, Service, Transport, TransportError};

const MAX_BODY_BYTES: u64 = 16 * 1024 * 1024;
const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

pub struct HttpServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    accept: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for HttpServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpServer").field("addr", &self.addr).finish_non_exhaustive()
    }
}

impl HttpServer {
    /// Binds `bind` (use port 0 for an ephemeral port) and serves `service`.
    pub fn start(bind: &str, public_origin: &str, service: Arc<dyn Service>) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(bind).map_err(|e| std::io::Error::other(e.to_string()))?;
        let addr =
            server.server_addr().to_ip().ok_or_else(|| std::io::Error::other("server is not bound to an IP socket"))?;
        let server = Arc::new(server);
        let origin = public_origin.trim_end_matches('/').to_string();
        let accept_server = Arc::clone(&server);
        let accept = std::thread::spawn(move || {
            for request in accept_server.incoming_requests() {
                let service = Arc::clone(&service);
                let origin = origin.clone();
                std::thread::spawn(move || serve_one(request, &origin, service.as_ref()));
            }
        });
        Ok(Self { addr, server, accept: Some(accept) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_one(mut request: tiny_http::Request, origin: &str, service: &dyn Service) {
    let mut body = Vec::new();
    let read = request.as_reader().take(MAX_BODY_BYTES).read_to_end(&mut body);
    let response = match read {
        Ok(_) => {
            let inbound = HttpRequest {
                method: request.method().as_str().to_ascii_uppercase(),
                url: format!("{origin}{}", request.url()),
                headers: request
                    .headers()
                    .iter()
                    .map(|h| (h.field.as_str().as_str().to_ascii_lowercase(), h.value.as_str().to_string()))
                    .collect(),
                body,
                timeout: None,
            };
            service.handle(&inbound)
        }
        Err(e) => HttpResponse::bad_request(format!("unreadable body: {e}")),
    };
    let mut out = tiny_http::Response::from_data(response.body).with_status_code(response.status);
    for (name, value) in response.headers {
        if let Ok(h) = tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes()) {
            out.add_header(h);
        }
    }
    let _ = request.respond(out);
}

/// HTTP client transport with an authority -> local socket map.
pub struct HttpTransport {
    agent: ureq::Agent,
    routes: RwLock<HashMap<String, SocketAddr>>,
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpTransport {
    pub fn new() -> Self {
        Self { agent: ureq::AgentBuilder::new().timeout(DEFAULT_TIMEOUT).build(), routes: RwLock::new(HashMap::new()) }
    }

    pub fn route(&self, authority: &str, addr: SocketAddr) {
        self.routes.write().expect("routes lock").insert(authority.to_string(), addr);
    }

    pub fn unroute(&self, authority: &str) {
        self.routes.write().expect("routes lock").remove(authority);
    }

    fn wire_url(&self, url: &str) -> Result<String, TransportError> {
        let authority = authority_of(url)?;
        let Some(addr) = self.routes.read().expect("routes lock").get(&authority).copied() else {
            return Ok(url.to_string());
        };
        let parsed = url::Url::parse(url).map_err(|e| TransportError::BadUrl(e.to_string()))?;
        let mut wire = format!("http://{addr}{}", parsed.path());
        if let Some(q) = parsed.query() {
            wire.push('?');
            wire.push_str(q);
        }
        Ok(wire)
    }
}

fn into_response(resp: ureq::Response) -> Result<HttpResponse, TransportError> {
    let status = resp.status();
    let headers = resp
        .headers_names()
        .into_iter()
        .filter_map(|n| resp.header(&n).map(|v| (n.to_ascii_lowercase(), v.to_string())))
        .collect();
    let mut body = Vec::new();
    resp.into_reader().take(MAX_BODY_BYTES).read_to_end(&mut body).map_err(|e| TransportError::Io(e.to_string()))?;
    Ok(HttpResponse { status, headers, body })
}

impl Transport for HttpTransport {
    fn send(&self, _origin: &str, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let wire = self.wire_url(&request.url)?;
        let mut call = self.agent.request(&request.method, &wire);
        if let Some(t) = request.timeout {
            call = call.timeout(t);
        }
        for (name, value) in &request.headers {
            call = call.set(name, value);
        }
        match call.send_bytes(&request.body) {
            Ok(resp) => into_response(resp),
            Err(ureq::Error::Status(_, resp)) => into_response(resp),
            Err(ureq::Error::Transport(t)) => {
                let text = t.to_string();
                match t.kind() {
                    ureq::ErrorKind::Io if text.contains("timed out") => Err(TransportError::Timeout),
                    ureq::ErrorKind::ConnectionFailed | ureq::ErrorKind::Dns => {
                        Err(TransportError::Unreachable(authority_of(&request.url).unwrap_or(text)))
                    }
                    ureq::ErrorKind::Io => Err(TransportError::Io(text)),
                    _ => Err(TransportError::Io(text)),
                }
            }
        }
    }
}
