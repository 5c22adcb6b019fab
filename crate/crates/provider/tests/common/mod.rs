#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use gnap4vp_core::clock::{Clock, ManualClock};
use gnap4vp_core::crypto::{self, KeyPair};
use gnap4vp_core::did::{DidDocument, DidResolver, LVP_SERVICE_TYPE};
use gnap4vp_core::model::*;
use gnap4vp_core::random::RandomSource;
use gnap4vp_core::transcript::StepLog;
use gnap4vp_core::transport::{Client, HttpRequest, HttpResponse, LoopbackNetwork, Router, Service};
use gnap4vp_core::vc::*;
use gnap4vp_provider::*;
use serde_json::json;

pub const T0: i64 = 1_760_000_000;
pub const CONSUMER: &str = "did:web:consumer.example";
pub const ISSUER: &str = "did:web:issuer.example";
pub const AS: &str = "https://provider.example";

pub struct World {
    pub clock: Arc<ManualClock>,
    pub net: Arc<LoopbackNetwork>,
    pub consumer_key: KeyPair,
    pub issuer_key: KeyPair,
    pub credential: Credential,
    pub provider: Arc<ProviderService>,
}

pub fn config(flows: &[FlowId]) -> ProviderConfig {
    ProviderConfig {
        public_base: AS.into(),
        as_id: None,
        supported_flows: flows.to_vec(),
        rights: BTreeMap::from([(
            "membership".to_string(),
            RightConfig { descriptors: vec![InputDescriptor::new("member", "MembershipCredential", &["member_id"])] },
        )]),
        resources: BTreeMap::from([(
            "/api/data".to_string(),
            ResourceConfig { right: "membership".into(), payload: json!({"dataset": "demo"}) },
        )]),
        registry_path: None,
        snapshot_path: None,
        ttl: Ttls::default(),
        bind: None,
        hosts: BTreeMap::new(),
    }
}

fn static_json(body: Vec<u8>) -> Arc<dyn Service> {
    Arc::new(move |_: &HttpRequest| {
        let mut r = HttpResponse::new(200, body.clone());
        r.headers.push(("content-type".into(), "application/json".into()));
        r
    })
}

impl World {
    pub fn new(flows: &[FlowId]) -> World {
        Self::with_registry(flows, true)
    }

    pub fn with_registry(flows: &[FlowId], trust_issuer: bool) -> World {
        let rng = RandomSource::seeded(7, "provider-tests");
        let clock = Arc::new(ManualClock::new(T0));
        let net = Arc::new(LoopbackNetwork::new());
        let consumer_key = KeyPair::generate(format!("{CONSUMER}#key-1"), &rng);
        let issuer_key = KeyPair::generate(format!("{ISSUER}#key-1"), &rng);
        let credential = issue_credential(
            &issuer_key,
            CredentialDraft {
                credential_id: Some("urn:vc:member".into()),
                types: vec!["MembershipCredential".into()],
                issuer_did: ISSUER.into(),
                subject_did: CONSUMER.into(),
                claims: BTreeMap::from([("member_id".to_string(), json!("M-1"))]),
                valid_from: T0 - 3600,
                valid_until: T0 + 86_400,
            },
        )
        .unwrap();
        let lvp = build_presentation(&consumer_key, CONSUMER, std::slice::from_ref(&credential), None, None).unwrap();
        let consumer_doc = DidDocument::new(CONSUMER).with_key(consumer_key.public_key()).with_service(
            "#lvp",
            LVP_SERVICE_TYPE,
            "https://consumer.example/lvp",
        );
        net.mount(
            "consumer.example",
            Arc::new(
                Router::new()
                    .route("/.well-known/did.json", static_json(consumer_doc.to_json()))
                    .route("/lvp", static_json(serde_json::to_vec(&lvp).unwrap())),
            ),
        );
        let issuer_doc = DidDocument::new(ISSUER).with_key(issuer_key.public_key());
        net.mount("issuer.example", static_json(issuer_doc.to_json()));

        let mut registry = TrustedIssuerRegistry::new();
        if trust_issuer {
            registry.allow(ISSUER, ["MembershipCredential"]).unwrap();
        }
        let client = Arc::new(Client::new("provider", net.clone()));
        let provider = Arc::new(ProviderService::new(
            config(flows),
            registry,
            ProviderDeps {
                resolver: Arc::new(DidResolver::new(client.clone(), clock.clone())),
                fetcher: client,
                clock: clock.clone(),
                rng: RandomSource::seeded(8, "provider"),
                steps: StepLog::disabled(),
            },
        ));
        net.mount("provider.example", provider.clone());
        World { clock, net, consumer_key, issuer_key, credential, provider }
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    pub fn metadata(&self, from: i64, until: i64) -> SignedClientMetadata {
        ClientMetadata {
            valid_from: from,
            valid_until: until,
            audience: AS.into(),
            did: CONSUMER.into(),
            key_id: self.consumer_key.key_id().to_string(),
        }
        .sign(&self.consumer_key)
        .unwrap()
    }

    pub fn lvp_request(&self, metadata: SignedClientMetadata) -> GrantRequest {
        GrantRequest {
            access: vec![AccessRight::new("membership", &["read"])],
            client: ClientIdentity { did: CONSUMER.into(), key: None, metadata: Some(metadata), display_name: None },
            interact: None,
            flow_preferences: vec![FlowId::LvpAuthorization],
        }
    }

    pub fn wallet_request(&self) -> GrantRequest {
        GrantRequest {
            access: vec![AccessRight::new("membership", &["read"])],
            client: ClientIdentity {
                did: CONSUMER.into(),
                key: Some(self.consumer_key.public_key()),
                metadata: None,
                display_name: None,
            },
            interact: Some(InteractionSpec {
                callback_uri: "https://consumer.example/callback?session=s1".into(),
                callback_mode: CallbackMode::Push,
                client_nonce: "client-nonce-0123456789abcdef".into(),
            }),
            flow_preferences: vec![FlowId::WalletInteraction],
        }
    }

    pub fn exchange_id(resp: &GrantResponse) -> String {
        let uri = &resp.interact_info.as_ref().unwrap().vp_exchange_uri;
        uri.rsplit('/').next().unwrap().to_string()
    }

    pub fn grant_id(resp: &GrantResponse) -> String {
        resp.continue_info.as_ref().unwrap().uri.rsplit('/').next().unwrap().to_string()
    }

    pub fn honest_vp(&self, nonce: &str) -> Presentation {
        build_presentation(&self.consumer_key, CONSUMER, std::slice::from_ref(&self.credential), Some(AS), Some(nonce))
            .unwrap()
    }

    /// Runs the wallet flow up to an authorized exchange.
    pub fn authorized_wallet_grant(&self) -> (GrantResponse, VpSubmissionResult) {
        let resp = self.provider.handle_grant(&self.wallet_request()).unwrap();
        let ex = Self::exchange_id(&resp);
        let object = self.provider.get_presentation_definition(&ex).unwrap();
        let result = self
            .provider
            .submit_vp(&ex, &VpSubmission::Presentation { vp_token: self.honest_vp(&object.server_nonce) })
            .unwrap();
        (resp, result)
    }

    pub fn continue_request(&self, resp: &GrantResponse, interact_ref: &str, signer: Option<&KeyPair>) -> HttpRequest {
        let info = resp.continue_info.as_ref().unwrap();
        let body = serde_json::to_vec(&ContinueRequest { interact_ref: interact_ref.into() }).unwrap();
        let mut req = HttpRequest::new("POST", info.uri.clone())
            .header("authorization", format!("GNAP {}", info.continuation_token))
            .header("content-type", "application/json")
            .body(body.clone());
        if let Some(k) = signer {
            let proof = crypto::make_possession_proof("POST", &info.uri, &body, k, self.now()).unwrap();
            req = req.header(PROOF_HEADER, proof.to_header());
        }
        req
    }

    pub fn resource_request(&self, token: &str, signer: Option<&KeyPair>) -> HttpRequest {
        let url = format!("{AS}/api/data");
        let mut req = HttpRequest::get(url.clone()).header("authorization", format!("GNAP {token}"));
        if let Some(k) = signer {
            let proof = crypto::make_possession_proof("GET", &url, b"", k, self.now()).unwrap();
            req = req.header(PROOF_HEADER, proof.to_header());
        }
        req
    }

    pub fn send(&self, req: HttpRequest) -> HttpResponse {
        self.provider.handle(&req)
    }
}
