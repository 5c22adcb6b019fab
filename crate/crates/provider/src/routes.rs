//! HTTP binding of [`ProviderService`].

use gnap4vp_core::crypto::PossessionProof;
use gnap4vp_core::model::{ContinueRequest, GrantRequest, VpSubmission};
use gnap4vp_core::transport::{HttpRequest, HttpResponse, Service};

use crate::error::ProviderError;
use crate::service::{ContinueCall, ProviderService, ResourceCall};

pub const PROOF_HEADER: &str = "gnap-proof";

/// Value of an `Authorization: GNAP <value>` header.
pub fn gnap_credential(req: &HttpRequest) -> Option<&str> {
    req.header_value("authorization")?.strip_prefix("GNAP ").map(str::trim)
}

fn proof(req: &HttpRequest) -> Option<PossessionProof> {
    req.header_value(PROOF_HEADER).and_then(PossessionProof::from_header)
}

fn fail(e: ProviderError) -> HttpResponse {
    HttpResponse::error(e.status(), e.to_body())
}

fn invalid(description: String) -> HttpResponse {
    fail(ProviderError::InvalidRequest(vec![description]))
}

fn respond<T: serde::Serialize>(result: Result<T, ProviderError>) -> HttpResponse {
    match result {
        Ok(body) => HttpResponse::json(200, &body),
        Err(e) => fail(e),
    }
}

impl ProviderService {
    fn route(&self, req: &HttpRequest) -> HttpResponse {
        let path = req.path();
        let method = req.method.as_str();
        if path == "/gnap/grant" && method == "POST" {
            return match req.json::<GrantRequest>() {
                Ok(grant) => respond(self.handle_grant(&grant)),
                Err(e) => invalid(e),
            };
        }
        if let Some(grant_id) = path.strip_prefix("/gnap/continue/") {
            if method != "POST" {
                return HttpResponse::not_found();
            }
            let body: ContinueRequest = match req.json() {
                Ok(b) => b,
                Err(e) => return invalid(e),
            };
            let Some(token) = gnap_credential(req) else {
                return fail(ProviderError::BadContinuationToken);
            };
            let uri = req.target_uri();
            return respond(self.continue_grant(&ContinueCall {
                grant_id,
                continuation_token: token,
                interact_ref: &body.interact_ref,
                proof: proof(req),
                method,
                uri: &uri,
                body: &req.body,
            }));
        }
        if let Some(exchange_id) = path.strip_prefix("/vp/exchange/") {
            return match method {
                "GET" => respond(self.get_presentation_definition(exchange_id)),
                "POST" => match req.json::<VpSubmission>() {
                    Ok(s) => respond(self.submit_vp(exchange_id, &s)),
                    Err(e) => invalid(e),
                },
                _ => HttpResponse::not_found(),
            };
        }
        if self.config().resources.contains_key(&path) {
            let uri = req.target_uri();
            return respond(self.serve_resource(&ResourceCall {
                path: &path,
                token: gnap_credential(req),
                proof: proof(req),
                method,
                uri: &uri,
                body: &req.body,
            }));
        }
        HttpResponse::not_found()
    }
}

impl Service for ProviderService {
    fn handle(&self, req: &HttpRequest) -> HttpResponse {
        let response = self.route(req);
        if req.method != "GET" {
            if let Some(path) = &self.config().snapshot_path {
                if let Err(e) = self.save_snapshot(path) {
                    eprintln!("provider: snapshot to {} failed: {e}", path.display());
                }
            }
        }
        response
    }
}
