//! HTTP client for the NLI classification endpoint.
//!
//! Wire protocol: POST `/classify` with `{"premise": str, "hypothesis": str}`,
//! response `{"logits": [f, f, f]}`. The wire order of the three classes is
//! part of the endpoint contract and defaults to entail, neutral, contra.

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;

use super::{cache_key, format_pair, NliCache, NliError, NliLogits, NliScorer};

/// Position of each class in the wire logits array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassOrder {
    entail: usize,
    neutral: usize,
    contra: usize,
}

impl Default for ClassOrder {
    fn default() -> Self {
        Self {
            entail: 0,
            neutral: 1,
            contra: 2,
        }
    }
}

impl ClassOrder {
    fn pick(&self, wire: &[f64; 3]) -> NliLogits {
        NliLogits::new(wire[self.entail], wire[self.neutral], wire[self.contra])
    }
}

impl FromStr for ClassOrder {
    type Err = String;

    /// Parse a comma-separated permutation of `entail,neutral,contra`.
    fn from_str(s: &str) -> Result<Self, String> {
        let names: Vec<&str> = s.split(',').map(|p| p.trim()).collect();
        if names.len() != 3 {
            return Err(format!("expected 3 class names, got {}", names.len()));
        }
        let mut order = ClassOrder::default();
        let mut seen = [false; 3];
        for (pos, name) in names.iter().enumerate() {
            let slot = match *name {
                "entail" | "entailment" => {
                    order.entail = pos;
                    0
                }
                "neutral" => {
                    order.neutral = pos;
                    1
                }
                "contra" | "contradiction" => {
                    order.contra = pos;
                    2
                }
                other => return Err(format!("unknown class name `{other}`")),
            };
            if seen[slot] {
                return Err(format!("class `{name}` listed twice"));
            }
            seen[slot] = true;
        }
        Ok(order)
    }
}

#[derive(Debug, Clone)]
pub struct NliEndpointConfig {
    /// Base URL of the classifier, e.g. `http://127.0.0.1:8080`.
    pub url: String,
    pub class_order: ClassOrder,
    pub timeout: Duration,
    /// Politeness bound on concurrent requests across all callers.
    pub max_in_flight: usize,
    /// First retry delay; doubles per attempt.
    pub retry_base_delay: Duration,
}

impl NliEndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            class_order: ClassOrder::default(),
            timeout: Duration::from_secs(30),
            max_in_flight: 8,
            retry_base_delay: Duration::from_millis(100),
        }
    }
}

const RETRY_ATTEMPTS: u32 = 3;

/// Counting semaphore bounding in-flight requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.available.notify_one();
    }
}

/// Cache-backed NLI endpoint client. Safe to share across threads; cached
/// pairs never touch the network again.
pub struct NliClient {
    endpoint: Option<NliEndpointConfig>,
    agent: Option<ureq::Agent>,
    cache: Mutex<NliCache>,
    semaphore: Semaphore,
    network_calls: AtomicU64,
    cache_hits: AtomicU64,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    logits: Vec<f64>,
}

/// Counters from a cache prefill pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefetchStats {
    pub pairs: usize,
    pub cache_hits: usize,
    pub network_calls: usize,
}

impl NliClient {
    pub fn new(endpoint: Option<NliEndpointConfig>, cache: NliCache) -> Self {
        let agent = endpoint.as_ref().map(|cfg| {
            ureq::Agent::config_builder()
                .timeout_global(Some(cfg.timeout))
                .build()
                .into()
        });
        let max_in_flight = endpoint.as_ref().map(|c| c.max_in_flight).unwrap_or(1);
        Self {
            endpoint,
            agent,
            cache: Mutex::new(cache),
            semaphore: Semaphore::new(max_in_flight),
            network_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn has_endpoint(&self) -> bool {
        self.endpoint.is_some()
    }

    /// Total requests actually sent (retries counted once per pair).
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Persist any new cache entries.
    pub fn flush_cache(&self) -> Result<(), NliError> {
        self.cache.lock().unwrap().flush()
    }

    /// Class logits for an ordered (premise, hypothesis) pair: cache first,
    /// then the endpoint with retry and exponential backoff.
    pub fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliLogits, NliError> {
        if let Some(hit) = self.cache.lock().unwrap().get(premise, hypothesis) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit);
        }
        let logits = self.fetch(premise, hypothesis)?;
        self.cache
            .lock()
            .unwrap()
            .insert(premise, hypothesis, logits);
        Ok(logits)
    }

    fn fetch(&self, premise: &str, hypothesis: &str) -> Result<NliLogits, NliError> {
        let pair_key = cache_key(premise, hypothesis);
        let (Some(cfg), Some(agent)) = (&self.endpoint, &self.agent) else {
            return Err(NliError::EndpointNotConfigured { pair_key });
        };
        let url = format!("{}/classify", cfg.url.trim_end_matches('/'));
        let body = serde_json::json!({ "premise": premise, "hypothesis": hypothesis });

        let mut last_error = String::new();
        for attempt in 0..RETRY_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(cfg.retry_base_delay * 2u32.pow(attempt - 1));
            }
            self.semaphore.acquire();
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let result = agent.post(&url).send_json(&body);
            self.semaphore.release();
            match result {
                Ok(mut response) => {
                    let payload = response
                        .body_mut()
                        .read_to_string()
                        .unwrap_or_else(|e| format!("<unreadable body: {e}>"));
                    return parse_wire_payload(&payload, cfg.class_order, &pair_key);
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(NliError::Endpoint {
            pair_key,
            attempts: RETRY_ATTEMPTS,
            message: last_error,
        })
    }

    /// Fetch logits for many ordered pairs, at most `max_in_flight` at a
    /// time. Results line up with the input slice regardless of completion
    /// order.
    pub fn classify_batch(
        &self,
        pairs: &[(String, String)],
    ) -> Result<Vec<NliLogits>, NliError> {
        let workers = self
            .endpoint
            .as_ref()
            .map(|c| c.max_in_flight)
            .unwrap_or(1)
            .min(pairs.len())
            .max(1);
        let results: Vec<Mutex<Option<Result<NliLogits, NliError>>>> =
            pairs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicU64::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst) as usize;
                    if i >= pairs.len() {
                        break;
                    }
                    let (premise, hypothesis) = &pairs[i];
                    *results[i].lock().unwrap() = Some(self.classify(premise, hypothesis));
                });
            }
        });
        let mut out = Vec::with_capacity(pairs.len());
        for slot in results {
            out.push(slot.into_inner().unwrap().expect("worker filled slot")?);
        }
        Ok(out)
    }

    /// Pre-fill the cache for every ordered distinct-text response pair of
    /// every question, then persist it.
    pub fn prefetch_dataset(
        &self,
        dataset: &[crate::ingest::ResponseSet],
    ) -> Result<PrefetchStats, NliError> {
        let hits_before = self.cache_hits() as usize;
        let calls_before = self.network_calls() as usize;
        let mut pairs = Vec::new();
        for rs in dataset {
            for (a, b) in distinct_ordered_pairs(&rs.responses) {
                let (premise, hypothesis) = format_pair(&rs.question, a, b);
                pairs.push((premise, hypothesis));
            }
        }
        self.classify_batch(&pairs)?;
        self.flush_cache()?;
        Ok(PrefetchStats {
            pairs: pairs.len(),
            cache_hits: self.cache_hits() as usize - hits_before,
            network_calls: self.network_calls() as usize - calls_before,
        })
    }
}

/// Ordered pairs of distinct representative texts, in (row, column) index
/// order. Duplicates cost nothing: only representatives are compared.
pub fn distinct_ordered_pairs(responses: &[String]) -> Vec<(&str, &str)> {
    let reps = crate::ingest::dedup_pairs(responses);
    let mut uniques: Vec<usize> = reps.clone();
    uniques.sort_unstable();
    uniques.dedup();
    let mut out = Vec::new();
    for &i in &uniques {
        for &j in &uniques {
            if i != j {
                out.push((responses[i].as_str(), responses[j].as_str()));
            }
        }
    }
    out
}

fn parse_wire_payload(
    payload: &str,
    class_order: ClassOrder,
    pair_key: &str,
) -> Result<NliLogits, NliError> {
    let excerpt = |p: &str| {
        let mut e: String = p.chars().take(200).collect();
        if p.len() > e.len() {
            e.push('…');
        }
        e
    };
    let parsed: WireResponse =
        serde_json::from_str(payload).map_err(|e| NliError::Protocol {
            pair_key: pair_key.to_string(),
            reason: e.to_string(),
            payload_excerpt: excerpt(payload),
        })?;
    if parsed.logits.len() != 3 {
        return Err(NliError::Protocol {
            pair_key: pair_key.to_string(),
            reason: format!("expected 3 logits, got {}", parsed.logits.len()),
            payload_excerpt: excerpt(payload),
        });
    }
    let wire = [parsed.logits[0], parsed.logits[1], parsed.logits[2]];
    let logits = class_order.pick(&wire);
    if !logits.is_finite() {
        return Err(NliError::NonFiniteLogits {
            pair_key: pair_key.to_string(),
        });
    }
    Ok(logits)
}

impl NliScorer for NliClient {
    fn pair_logits(&self, question: &str, a: &str, b: &str) -> Result<NliLogits, NliError> {
        let (premise, hypothesis) = format_pair(question, a, b);
        self.classify(&premise, &hypothesis)
    }
}
