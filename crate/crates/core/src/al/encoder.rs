//! Client for an external encoder service.
//!
//! Request `{"tokens": [...]}` and response `{"vectors": [[...], ...]}`,
//! one JSON object per line over TCP, or as a JSON POST body over HTTP.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::AlError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "transport", content = "address", rename_all = "lowercase")]
pub enum EncoderEndpoint {
    /// `host:port` speaking line-delimited JSON.
    Tcp(String),
    /// URL accepting a POST with the same request body.
    Http(String),
}

#[derive(Serialize)]
struct EncodeRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct EncodeResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderClient {
    pub endpoint: EncoderEndpoint,
    pub dim: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl EncoderClient {
    pub fn new(endpoint: EncoderEndpoint, dim: usize) -> Self {
        Self { endpoint, dim, timeout_ms: default_timeout_ms() }
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, AlError> {
        let request = EncodeRequest { tokens };
        let response: EncodeResponse = match &self.endpoint {
            EncoderEndpoint::Tcp(addr) => self.round_trip_tcp(addr, &request)?,
            EncoderEndpoint::Http(url) => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_millis(self.timeout_ms)))
                    .build()
                    .into();
                agent
                    .post(url)
                    .send_json(&request)
                    .and_then(|mut r| r.body_mut().read_json::<EncodeResponse>())
                    .map_err(|e| AlError::Encoder(e.to_string()))?
            }
        };
        if response.vectors.len() != tokens.len() {
            return Err(AlError::Encoder(format!(
                "expected {} vectors, got {}",
                tokens.len(),
                response.vectors.len()
            )));
        }
        if let Some(v) = response.vectors.iter().find(|v| v.len() != self.dim) {
            return Err(AlError::Encoder(format!("expected dim {}, got {}", self.dim, v.len())));
        }
        Ok(response.vectors)
    }

    fn round_trip_tcp(&self, addr: &str, request: &EncodeRequest<'_>) -> Result<EncodeResponse, AlError> {
        let io = |e: std::io::Error| AlError::Encoder(format!("{addr}: {e}"));
        let mut stream = TcpStream::connect(addr).map_err(io)?;
        let timeout = Some(Duration::from_millis(self.timeout_ms));
        stream.set_read_timeout(timeout).map_err(io)?;
        stream.set_write_timeout(timeout).map_err(io)?;
        let mut line = serde_json::to_vec(request).map_err(|e| AlError::Encoder(e.to_string()))?;
        line.push(b'\n');
        stream.write_all(&line).map_err(io)?;
        let mut reply = String::new();
        BufReader::new(stream).read_line(&mut reply).map_err(io)?;
        serde_json::from_str(&reply).map_err(|e| AlError::Encoder(format!("bad encoder reply: {e}")))
    }
}
