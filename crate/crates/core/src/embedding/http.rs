use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingProvider, EmbeddingVector};
use crate::http::{JsonClient, RetryPolicy};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for a `POST {base}/embed` service taking `{"texts": [...]}` and
/// answering `{"vectors": [[...], ...]}` in request order.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    url: String,
    name: String,
    client: JsonClient,
    batch_size: usize,
    max_in_flight: usize,
}

impl HttpEmbeddingProvider {
    pub fn new(base_url: &str, model_name: &str, policy: RetryPolicy) -> Self {
        let base = base_url.trim_end_matches('/');
        HttpEmbeddingProvider {
            url: format!("{base}/embed"),
            name: format!("http:{model_name}@{base}"),
            client: JsonClient::new(policy),
            batch_size: 64,
            max_in_flight: 4,
        }
    }

    pub fn with_batching(mut self, batch_size: usize, max_in_flight: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self.max_in_flight = max_in_flight.max(1);
        self
    }

    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let resp: EmbedResponse = self
            .client
            .post(&self.url, &EmbedRequest { texts }, None)
            .map_err(|e| EmbeddingError::Provider(format!("{} (after {} retries)", e, self.client.policy().retries)))?;
        if resp.vectors.len() != texts.len() {
            return Err(EmbeddingError::Provider(format!(
                "expected {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        Ok(resp.vectors.into_iter().map(EmbeddingVector::new).collect())
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let chunks: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in chunks.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<EmbeddingVector>, EmbeddingError>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|c| s.spawn(move || self.embed_chunk(c))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(EmbeddingError::Provider("worker panicked".into()))))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}
