//! Remote completion endpoint: one wire shape, prompt in, text choices out.
//! Authentication rides in a bearer token read from an environment variable
//! named in the annotator config; the token itself never touches disk.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::providers::ProviderError;
use crate::types::DecodingParams;

/// How many transport attempts (connect errors, 5xx) before giving up.
const TRANSPORT_ATTEMPTS: u32 = 3;

pub struct RemoteEndpoint {
    url: String,
    model: String,
    bearer: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

impl RemoteEndpoint {
    pub fn new(
        url: &str,
        model: &str,
        auth_env: Option<&str>,
        timeout: Duration,
    ) -> Result<Self, ProviderError> {
        let bearer = match auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Config(format!("auth environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(RemoteEndpoint {
            url: url.to_string(),
            model: model.to_string(),
            bearer,
            client,
        })
    }

    /// One sampled completion for the prompt.
    pub fn complete(&self, prompt: &str, decoding: &DecodingParams) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.model,
            "prompt": prompt,
            "n": 1,
            "temperature": decoding.temperature,
            "top_p": decoding.nucleus_p,
            "max_tokens": decoding.max_tokens,
        });
        let mut last_error = None;
        for attempt in 0..TRANSPORT_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 << attempt));
            }
            let mut request = self.client.post(&self.url).json(&body);
            if let Some(token) = &self.bearer {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Err(e) => last_error = Some(ProviderError::Network(e.to_string())),
                Ok(response) => {
                    let status = response.status();
                    if status.is_server_error() {
                        last_error = Some(ProviderError::Endpoint {
                            status: status.as_u16(),
                            body: response.text().unwrap_or_default(),
                        });
                        continue;
                    }
                    if !status.is_success() {
                        return Err(ProviderError::Endpoint {
                            status: status.as_u16(),
                            body: response.text().unwrap_or_default(),
                        });
                    }
                    let parsed: CompletionResponse = response
                        .json()
                        .map_err(|e| ProviderError::Endpoint {
                            status: status.as_u16(),
                            body: format!("malformed completion payload: {e}"),
                        })?;
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.text)
                        .ok_or_else(|| ProviderError::Endpoint {
                            status: status.as_u16(),
                            body: "no choices in completion payload".into(),
                        });
                }
            }
        }
        Err(last_error.unwrap_or_else(|| ProviderError::Network("no attempts made".into())))
    }
}
