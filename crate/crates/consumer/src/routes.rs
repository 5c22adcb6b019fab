//! HTTP surface of the consumer instance: the wallet-facing callback and the
//! machine-facing session API.

use gnap4vp_core::model::{CallbackMessage, CallbackParams, ErrorBody, InteractionResult};
use gnap4vp_core::transport::{HttpRequest, HttpResponse, Service};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ConsumerError;
use crate::instance::{ConsumerInstance, StartRequest};
use crate::session::{CallbackOutcome, DeliveryReceipt, SessionView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartResponse {
    pub session: SessionView,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery: Option<DeliveryReceipt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchRequest {
    pub path: String,
}

fn error(e: &ConsumerError) -> HttpResponse {
    let status = match e {
        ConsumerError::UnknownSession(_) => 404,
        ConsumerError::MachineAuth(_) => 401,
        ConsumerError::WrongState(_) => 409,
        ConsumerError::Transport(_) => 502,
        _ => 400,
    };
    HttpResponse::error(status, ErrorBody::new(e.label()).with_description(e.to_string()))
}

/// Redirect form: `?interaction_ref=..&hash=..` or `?result=denied`.
fn callback_from_query(req: &HttpRequest) -> Option<CallbackMessage> {
    if req.query("result").as_deref() == Some("denied") {
        return Some(CallbackMessage::Denied { result: InteractionResult::Denied });
    }
    Some(CallbackMessage::Authorized(CallbackParams {
        interaction_ref: req.query("interaction_ref")?,
        interaction_hash: req.query("hash")?,
    }))
}

impl ConsumerInstance {
    fn callback(&self, req: &HttpRequest) -> HttpResponse {
        let Some(session) = req.query("session") else {
            return HttpResponse::bad_request("missing session parameter");
        };
        let message = match req.method.as_str() {
            "GET" => callback_from_query(req),
            "POST" => req.json::<CallbackMessage>().ok(),
            _ => return HttpResponse::not_found(),
        };
        let Some(message) = message else {
            return HttpResponse::bad_request("malformed callback parameters");
        };
        match self.handle_callback(&session, &message) {
            CallbackOutcome::Accept => HttpResponse::json(200, &json!({"status": "accepted"})),
            CallbackOutcome::Abort(reason) => HttpResponse::error(400, ErrorBody::new(format!("{reason:?}"))),
        }
    }

    fn route(&self, req: &HttpRequest) -> HttpResponse {
        let path = req.path();
        if path == "/callback" {
            return self.callback(req);
        }
        if path == "/machine/sessions" && req.method == "POST" {
            let start: StartRequest = match req.json() {
                Ok(s) => s,
                Err(e) => return HttpResponse::bad_request(e),
            };
            return match self.start_for_machine(&start) {
                Ok((session, delivery)) => {
                    HttpResponse::json(200, &StartResponse { session: session.view(), delivery })
                }
                Err(e) => error(&e),
            };
        }
        if let Some(rest) = path.strip_prefix("/machine/sessions/") {
            if let Some(id) = rest.strip_suffix("/fetch") {
                if req.method != "POST" {
                    return HttpResponse::not_found();
                }
                let fetch: FetchRequest = match req.json() {
                    Ok(f) => f,
                    Err(e) => return HttpResponse::bad_request(e),
                };
                return match self.continue_and_fetch(id, &fetch.path) {
                    Ok(payload) => HttpResponse::json(200, &json!({ "payload": payload })),
                    Err(e) => error(&e),
                };
            }
            return match self.session(rest) {
                Ok(s) => HttpResponse::json(200, &s.view()),
                Err(e) => error(&e),
            };
        }
        HttpResponse::not_found()
    }
}

impl Service for ConsumerInstance {
    fn handle(&self, req: &HttpRequest) -> HttpResponse {
        let response = self.route(req);
        let mutating = req.method != "GET" || req.path() == "/callback";
        if mutating {
            if let Some(path) = &self.config().state_path {
                if let Err(e) = self.save_state(path) {
                    eprintln!("consumer: saving state to {} failed: {e}", path.display());
                }
            }
        }
        response
    }
}
