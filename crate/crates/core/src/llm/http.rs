use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse};

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// POSTs `{"prompt", "temperature"}` and reads `{"text"}` back.
pub struct HttpBackend {
    endpoint: String,
    auth_token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, auth_token: Option<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            endpoint: endpoint.into(),
            auth_token,
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut builder = self.client.post(&self.endpoint).json(&WireRequest {
            prompt: &request.prompt,
            temperature: request.temperature,
        });
        if let Some(token) = &self.auth_token {
            builder = builder.bearer_auth(token);
        }
        let reply = builder
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = reply.status();
        let body = reply
            .text()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: WireResponse =
            serde_json::from_str(&body).map_err(|e| LlmError::BadReply(e.to_string()))?;
        let mut response = LlmResponse::new(parsed.text, "http");
        response
            .meta
            .insert("status".to_string(), status.as_u16().to_string());
        Ok(response)
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::TemplateId;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    // Serves one canned HTTP response and hands back the raw request.
    fn serve_once(status: &'static str, body: &'static str) -> (String, mpsc::Receiver<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/complete", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut content_length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut payload = vec![0; content_length];
            reader.read_exact(&mut payload).unwrap();
            head.push_str(&String::from_utf8(payload).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            tx.send(head).unwrap();
        });
        (url, rx)
    }

    #[test]
    fn posts_prompt_and_temperature() {
        let (url, rx) = serve_once("200 OK", r#"{"text":"hello"}"#);
        let backend = HttpBackend::new(url, Some("secret".into())).unwrap();
        let req = LlmRequest::new(TemplateId::Dedup, 0, "the prompt");
        let response = backend.complete(&req).unwrap();
        assert_eq!(response.text, "hello");
        let raw = rx.recv().unwrap();
        assert!(raw.starts_with("POST /complete"));
        assert!(raw.to_ascii_lowercase().contains("authorization: bearer secret"));
        let body = &raw[raw.find("\r\n\r\n").unwrap() + 4..];
        let json: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(json, serde_json::json!({"prompt": "the prompt", "temperature": 0.8}));
    }

    #[test]
    fn surfaces_status_errors() {
        let (url, _rx) = serve_once("503 Service Unavailable", r#"{"error":"busy"}"#);
        let backend = HttpBackend::new(url, None).unwrap();
        let err = backend
            .complete(&LlmRequest::new(TemplateId::Dedup, 0, "p"))
            .unwrap_err();
        assert!(matches!(err, LlmError::Status { status: 503, .. }));
    }

    #[test]
    fn rejects_reply_without_text() {
        let (url, _rx) = serve_once("200 OK", r#"{"output":"x"}"#);
        let backend = HttpBackend::new(url, None).unwrap();
        let err = backend
            .complete(&LlmRequest::new(TemplateId::Dedup, 0, "p"))
            .unwrap_err();
        assert!(matches!(err, LlmError::BadReply(_)));
    }
}
