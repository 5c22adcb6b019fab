use gnap4vp_core::model::ErrorBody;
use gnap4vp_core::transport::{HttpRequest, HttpResponse, Service};
use gnap4vp_core::vc::Selection;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agent::WalletAgent;
use crate::error::WalletError;
use crate::exchange::{IngestRequest, WalletExchange, WalletStatus};

/// Body of `POST /wallet/exchanges/{id}/approve`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproveRequest {
    pub selection: Selection,
}

fn error(e: WalletError) -> HttpResponse {
    HttpResponse::error(e.status(), ErrorBody::new(e.label()).with_description(e.to_string()))
}

fn respond(r: Result<WalletExchange, WalletError>) -> HttpResponse {
    match r {
        Ok(ex) => HttpResponse::json(200, &ex),
        Err(e) => error(e),
    }
}

fn status_filter(req: &HttpRequest) -> Result<Option<WalletStatus>, HttpResponse> {
    match req.query("status") {
        None => Ok(None),
        Some(s) => serde_json::from_value(serde_json::Value::String(s.clone()))
            .map(Some)
            .map_err(|_| HttpResponse::bad_request(format!("unknown status {s}"))),
    }
}

impl Service for WalletAgent {
    fn handle(&self, req: &HttpRequest) -> HttpResponse {
        let path = req.path();
        let method = req.method.as_str();
        if path == "/ui" || path.starts_with("/ui/") {
            return match method {
                "GET" => crate::ui::serve(self.config().ui_dir.as_deref(), &path),
                _ => HttpResponse::not_found(),
            };
        }
        if path == "/wallet/credentials" && method == "GET" {
            let summaries: Vec<_> = self
                .credentials()
                .iter()
                .map(|c| {
                    json!({
                        "credential_id": c.credential_id,
                        "types": c.types,
                        "issuer_did": c.issuer_did,
                        "claims": c.claims.keys().collect::<Vec<_>>(),
                        "valid_until": c.valid_until,
                    })
                })
                .collect();
            return HttpResponse::json(200, &summaries);
        }
        if path == "/wallet/exchanges" {
            return match method {
                "POST" => match req.json::<IngestRequest>() {
                    Ok(body) => respond(self.ingest(&body.uri, body.mode)),
                    Err(e) => HttpResponse::bad_request(e),
                },
                "GET" => match status_filter(req) {
                    Ok(filter) => HttpResponse::json(200, &self.exchanges(filter)),
                    Err(resp) => resp,
                },
                _ => HttpResponse::not_found(),
            };
        }
        let Some(rest) = path.strip_prefix("/wallet/exchanges/") else {
            return HttpResponse::not_found();
        };
        match (method, rest.split_once('/')) {
            ("GET", None) => respond(self.exchange(rest)),
            ("POST", Some((id, "approve"))) => match req.json::<ApproveRequest>() {
                Ok(body) => respond(self.approve(id, body.selection)),
                Err(e) => HttpResponse::bad_request(e),
            },
            ("POST", Some((id, "deny"))) => respond(self.deny(id)),
            ("POST", Some((id, "submit"))) => respond(self.submit_and_relay(id)),
            _ => HttpResponse::not_found(),
        }
    }
}
