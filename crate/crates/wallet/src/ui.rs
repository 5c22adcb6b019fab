//! Static files for the approval UI. The UI is built separately; without a
//! configured directory `/ui` answers 404.

use std::path::{Component, Path};

use gnap4vp_core::model::ErrorBody;
use gnap4vp_core::transport::HttpResponse;

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

pub(crate) fn serve(dir: Option<&Path>, request_path: &str) -> HttpResponse {
    let Some(dir) = dir else {
        return HttpResponse::error(404, ErrorBody::new("not_found").with_description("approval UI is not installed"));
    };
    let rel = request_path.trim_start_matches("/ui").trim_start_matches('/');
    let rel = Path::new(if rel.is_empty() { "index.html" } else { rel });
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return HttpResponse::not_found();
    }
    let mut file = dir.join(rel);
    if file.is_dir() {
        file = file.join("index.html");
    }
    match std::fs::read(&file) {
        Ok(body) => {
            let mut resp = HttpResponse::new(200, body);
            resp.headers.push(("content-type".into(), content_type(&file).into()));
            resp
        }
        Err(_) => HttpResponse::not_found(),
    }
}
