use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{EmbeddingError, EmbeddingProvider, EmbeddingProviderDescriptor};

/// Client for an embeddings endpoint speaking the common
/// `{"model", "input": [..]}` → `{"data": [{"embedding": [..]}]}` shape.
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    token: Option<String>,
    agent: ureq::Agent,
    descriptor: EmbeddingProviderDescriptor,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        token: Option<String>,
    ) -> Self {
        let model = model.into();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        HttpEmbedder {
            endpoint: endpoint.into(),
            descriptor: EmbeddingProviderDescriptor {
                provider_id: format!("http:{model}"),
                dimension,
                deterministic: true,
            },
            model,
            token,
            agent,
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn descriptor(&self) -> &EmbeddingProviderDescriptor {
        &self.descriptor
    }

    fn raw_embedding(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let body = json!({ "model": self.model, "input": [text] });
        let mut resp = req
            .send_json(&body)
            .map_err(|e| EmbeddingError::ProviderUnreachable(e.to_string()))?;
        let parsed: EmbeddingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbeddingError::ProviderUnreachable(format!("bad response body: {e}")))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| EmbeddingError::ProviderUnreachable("response had no embeddings".into()))
    }
}
